from django.utils.version import get_version

VERSION = (0, 3, 0, 'beta', 0)

__version__ = get_version(VERSION)
