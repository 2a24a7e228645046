from django.apps import AppConfig


class CutfemConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "cutfem"
    verbose_name = "Cut finite elements on moving domains"
