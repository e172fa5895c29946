from django.apps import AppConfig


class AceConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'ace'
    verbose_name = 'Confidence attack lab'
