# Django settings for test_project project.
# Don't change this file for local needs. Create local_settings.py instead.

import os


DEBUG = True

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))

# The reconstruction commands do not touch the database.
DATABASES = {}

TIME_ZONE = 'UTC'

USE_TZ = True

# Make this unique, and don't share it with anybody.
SECRET_KEY = 'test-project-not-secret'

INSTALLED_APPS = (
    'django_maxrigid',
)

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '%(levelname)s %(name)s: %(message)s'
        }
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple'
        }
    },
    'loggers': {
        'django_maxrigid': {
            'handlers': ['console'],
            'level': 'WARNING',
            'propagate': True,
        },
    }
}

MAXRIGID_OUTPUT_DIRECTORY = os.path.abspath(os.path.join(PROJECT_ROOT, 'output'))
MAXRIGID_SOLVER = {
    'eps_primal': 1e-6,
    'eps_dual': 1e-6,
    'eps_gap': 1e-6,
}

# local_settings.py can be used to override environment-specific settings.
try:
    from local_settings import *
except ImportError:
    pass
