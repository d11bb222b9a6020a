from django.apps import AppConfig


class MultifluidConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "multifluid"
