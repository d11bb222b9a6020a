from django.apps import AppConfig


class LagrangianConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "lagrangian"
