from django.apps import AppConfig
from django.conf import settings


class LabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'lab'
    verbose_name = 'Scenario laboratory'

    def ready(self):
        from core.utils import geometry

        geometry.configure(boundary_flux_tol=settings.HYPERKS['BOUNDARY_FLUX_TOL'])
