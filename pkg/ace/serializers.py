from rest_framework import serializers

from .models import ExperimentRun, ReportRow


class ReportRowSerializer(serializers.ModelSerializer):
    """One epsilon row"""

    class Meta:
        model = ReportRow
        fields = [
            'table', 'position', 'epsilon', 'effective_epsilon', 'aurc_x1000', 'nll', 'brier',
            'accuracy_percent', 'selective_risk', 'coverage', 'mean_queries',
        ]


class ExperimentRunListSerializer(serializers.ModelSerializer):
    """Run summary for list views"""
    tables = serializers.SerializerMethodField()

    class Meta:
        model = ExperimentRun
        fields = ['config_hash', 'name', 'seed', 'status', 'output_dir', 'tables', 'created_at']

    def get_tables(self, obj):
        return obj.table_names


class ExperimentRunDetailSerializer(ExperimentRunListSerializer):
    """Run with every report row"""
    rows = ReportRowSerializer(many=True, read_only=True)

    class Meta(ExperimentRunListSerializer.Meta):
        fields = ExperimentRunListSerializer.Meta.fields + ['rows']
