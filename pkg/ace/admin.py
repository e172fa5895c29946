from django.contrib import admin

from .models import ExperimentRun, ReportRow


class ReportRowInline(admin.TabularInline):
    model = ReportRow
    extra = 0
    can_delete = False
    fields = ['table', 'position', 'epsilon', 'effective_epsilon', 'aurc_x1000', 'nll', 'brier',
              'accuracy_percent', 'selective_risk', 'coverage', 'mean_queries']
    readonly_fields = fields


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['name', 'short_hash', 'seed', 'status', 'row_count', 'created_at']
    list_filter = ['status', 'created_at']
    search_fields = ['name', 'config_hash']
    readonly_fields = ['config_hash', 'created_at', 'updated_at']
    inlines = [ReportRowInline]

    def short_hash(self, obj):
        return obj.config_hash[:12]
    short_hash.short_description = 'Config'

    def row_count(self, obj):
        return obj.rows.count()
    row_count.short_description = 'Rows'


@admin.register(ReportRow)
class ReportRowAdmin(admin.ModelAdmin):
    list_display = ['run', 'table', 'epsilon', 'effective_epsilon', 'aurc_x1000', 'accuracy_percent']
    list_filter = ['table', 'run']
    search_fields = ['table', 'run__name']
