from django.db import models


class Core(models.Model):
    """
    Timestamped base for every persisted record of the laboratory.
    """
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        abstract = True  # inherited by lab records, never stored directly

    def __str__(self):
        return f"{self.__class__.__name__} (ID: {self.pk})"
