from django.shortcuts import get_object_or_404
from rest_framework import generics

from .models import ExperimentRun, ReportRow
from .serializers import ExperimentRunDetailSerializer, ExperimentRunListSerializer, ReportRowSerializer


class ExperimentRunListView(generics.ListAPIView):
    """
    API view to list recorded runs, newest first
    Supports ?name= filtering
    """
    serializer_class = ExperimentRunListSerializer

    def get_queryset(self):
        queryset = ExperimentRun.objects.prefetch_related('rows')
        name = self.request.query_params.get('name', None)
        if name:
            queryset = queryset.filter(name=name)
        return queryset.order_by('-created_at')


class ExperimentRunDetailView(generics.RetrieveAPIView):
    """
    API view to retrieve one run and all its rows by config hash
    """
    queryset = ExperimentRun.objects.prefetch_related('rows')
    serializer_class = ExperimentRunDetailSerializer
    lookup_field = 'config_hash'


class ReportTableView(generics.ListAPIView):
    """
    API view to list the rows of one table of a run, by ascending epsilon
    """
    serializer_class = ReportRowSerializer
    pagination_class = None

    def get_queryset(self):
        run = get_object_or_404(ExperimentRun, config_hash=self.kwargs['config_hash'])
        rows = ReportRow.objects.filter(run=run, table=self.kwargs['table']).order_by('position')
        return rows
