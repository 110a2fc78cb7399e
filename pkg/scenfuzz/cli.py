"""
``scenfuzz`` console entry point

Runs the management commands outside a Django project by configuring
minimal standalone settings first.
"""

import os
import sys

import django
from django.conf import settings
from django.core.management import execute_from_command_line

COMMANDS = ("falsify", "replay", "report", "validate_bundles")


def configure_standalone():
    if settings.configured or os.environ.get("DJANGO_SETTINGS_MODULE"):
        return
    settings.configure(
        INSTALLED_APPS=["scenfuzz"],
        DATABASES={},
        USE_TZ=True,
        LOGGING_CONFIG=None,
    )


def main(argv=None):
    argv = list(sys.argv if argv is None else argv)
    configure_standalone()
    django.setup()
    if len(argv) < 2 or argv[1] not in COMMANDS:
        sys.stderr.write(f"usage: scenfuzz {{{','.join(COMMANDS)}}} [options]\n")
        return 2
    execute_from_command_line(["scenfuzz", *argv[1:]])
    return 0


if __name__ == "__main__":
    sys.exit(main())
