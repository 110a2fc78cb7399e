# scenfuzz/apps.py
from django.apps import AppConfig


class ScenfuzzConfig(AppConfig):
    """scenfuzz app configuration"""

    default_auto_field = "django.db.models.BigAutoField"
    name = "scenfuzz"
    verbose_name = "Scenario Falsification"
