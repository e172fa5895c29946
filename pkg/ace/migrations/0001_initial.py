from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('config_hash', models.CharField(max_length=64, unique=True)),
                ('name', models.CharField(max_length=100)),
                ('seed', models.CharField(help_text='Master seed, an unsigned 64-bit integer', max_length=20)),
                ('output_dir', models.CharField(blank=True, max_length=500)),
                ('status', models.CharField(choices=[('complete', 'Complete'), ('checked', 'Checked'), ('failed_checks', 'Failed checks')], default='complete', max_length=20)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='ReportRow',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('table', models.CharField(max_length=100)),
                ('position', models.PositiveIntegerField()),
                ('epsilon', models.FloatField()),
                ('effective_epsilon', models.FloatField()),
                ('aurc_x1000', models.FloatField()),
                ('nll', models.FloatField()),
                ('brier', models.FloatField()),
                ('accuracy_percent', models.FloatField()),
                ('selective_risk', models.FloatField(blank=True, null=True)),
                ('coverage', models.FloatField(blank=True, null=True)),
                ('mean_queries', models.FloatField(blank=True, null=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='rows', to='ace.experimentrun')),
            ],
            options={
                'ordering': ['run', 'table', 'position'],
                'indexes': [models.Index(fields=['run', 'table'], name='ace_row_run_table_idx')],
                'constraints': [models.UniqueConstraint(fields=('run', 'table', 'position'), name='unique_row_per_table')],
            },
        ),
    ]
