from django.urls import path

from . import api_views

app_name = 'api'

urlpatterns = [
    path('runs/', api_views.ExperimentRunListView.as_view(), name='run-list'),
    path('runs/<str:config_hash>/', api_views.ExperimentRunDetailView.as_view(), name='run-detail'),
    path('runs/<str:config_hash>/tables/<str:table>/', api_views.ReportTableView.as_view(), name='run-table'),
]
