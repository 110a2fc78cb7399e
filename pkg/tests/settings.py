"""
Django settings for the scenfuzz test suite
"""

SECRET_KEY = "scenfuzz-tests"
DEBUG = False
USE_TZ = True

INSTALLED_APPS = [
    "scenfuzz",
]

DATABASES = {}

LOGGING_CONFIG = None

SCENFUZZ_CONFIG = {
    "BUDGET": {
        "MAX_SAMPLES": 5,
        "MAX_SECONDS": None,
    },
    "SIMULATION": {
        "HORIZON": 10.0,
    },
    "MONITORING": {
        "ENABLE_PROFILING": True,
    },
}
