"""
Django settings for the hyperks laboratory.

The numerical library in core.utils takes every parameter explicitly; the
HYPERKS dict below holds the environment-level defaults that the lab app
resolves scenario files against.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.1/ref/settings/
"""

from pathlib import Path
from decouple import config
# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = config('SECRET_KEY', default='django-insecure-hyperks-local-key')
DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'rest_framework',
    'core',
    'lab',
]


# Database
# https://docs.djangoproject.com/en/5.1/ref/settings/#databases
# Run records of parameter sweeps can be aggregated in PostgreSQL.

if config('USE_POSTGRES', default=False, cast=bool):
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': config('POSTGRES_DB', default='hyperks'),
            'USER': config('POSTGRES_USER', default='hyperks'),
            'PASSWORD': config('POSTGRES_PASSWORD', default='hyperks'),
            'HOST': config('POSTGRES_HOST', default='localhost'),
            'PORT': config('POSTGRES_PORT', default='5432'),
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / 'db.sqlite3',
        }
    }


# Laboratory defaults, overridable from the environment or a .env file.

HYPERKS = {
    'NUM_NODES': config('HYPERKS_NUM_NODES', default=2048, cast=int),
    'R_MAX': config('HYPERKS_R_MAX', default=20.0, cast=float),
    'DT': config('HYPERKS_DT', default=0.01, cast=float),
    'T_END': config('HYPERKS_T_END', default=20.0, cast=float),
    'OUTPUT_DIR': config('HYPERKS_OUTPUT_DIR', default='runs'),
    'BOUNDARY_FLUX_TOL': config('HYPERKS_BOUNDARY_FLUX_TOL', default=1e-10, cast=float),
    'SIGMA_MARGIN': config('HYPERKS_SIGMA_MARGIN', default=0.05, cast=float),
    'LOG_LEVEL': config('HYPERKS_LOG_LEVEL', default='INFO'),
    'JOBS': config('HYPERKS_JOBS', default=1, cast=int),
}


# Logging
# https://docs.djangoproject.com/en/5.1/topics/logging/

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(asctime)s %(levelname)s %(name)s %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'core': {
            'handlers': ['console'],
            'level': HYPERKS['LOG_LEVEL'],
            'propagate': False,
        },
        'lab': {
            'handlers': ['console'],
            'level': HYPERKS['LOG_LEVEL'],
            'propagate': False,
        },
    },
}


# Internationalization
# https://docs.djangoproject.com/en/5.1/topics/i18n/

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True


# Default primary key field type
# https://docs.djangoproject.com/en/5.1/ref/settings/#default-auto-field

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
