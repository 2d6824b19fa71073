"""
``maxrigid`` console script: runs the management commands without a Django
project. With ``DJANGO_SETTINGS_MODULE`` set, that project's settings are used.
"""
import os
import sys

import django
from django.conf import settings
from django.core.management import execute_from_command_line

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {'format': '%(levelname)s %(name)s: %(message)s'},
    },
    'handlers': {
        'console': {'class': 'logging.StreamHandler', 'formatter': 'simple'},
    },
    'loggers': {
        'django_maxrigid': {'handlers': ['console'], 'level': 'WARNING'},
    },
}


def configure():
    if settings.configured or os.environ.get('DJANGO_SETTINGS_MODULE'):
        return
    settings.configure(
        INSTALLED_APPS=['django_maxrigid'],
        LOGGING=LOGGING,
        MAXRIGID_OUTPUT_DIRECTORY=os.environ.get('MAXRIGID_OUTPUT_DIR'),
    )
    django.setup()


def main(argv=None):
    configure()
    argv = sys.argv[1:] if argv is None else list(argv)
    execute_from_command_line(['maxrigid'] + argv)


if __name__ == '__main__':
    main()
