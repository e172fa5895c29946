"""
URL configuration for the acelab project.

The admin browses recorded runs; /api/ serves them read-only as JSON.
"""
from django.contrib import admin
from django.urls import path, include

urlpatterns = [
    path('admin/', admin.site.urls),
    path('api/', include('ace.api_urls')),
]
