import sys
from pathlib import Path

import environ

env = environ.Env(
    # set casting, default value
    DEBUG=(bool, False),
    CUTMOVE_THREADS=(int, 1),
    CUTMOVE_LOG_LEVEL=(str, "INFO"),
    CUTMOVE_RUN_SLOW_TESTS=(bool, False),
)

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

environ.Env.read_env(BASE_DIR / ".env")

# Nothing is signed or served; the key only satisfies Django's startup checks.
SECRET_KEY = env("DJANGO_SECRET_KEY", default="cutmove-local-development-key")

DEBUG = env("DEBUG")

ALLOWED_HOSTS = env.list("ALLOWED_HOSTS", default=[])


# Application definition
INSTALLED_APPS = [
    "rest_framework",
    "cutfem",
]

# No models are stored; the dummy backend keeps the test runner from creating databases.
DATABASES = {}

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

USE_TZ = True

TIME_ZONE = "UTC"


# Solver configuration
CUTMOVE_THREADS = max(1, env("CUTMOVE_THREADS"))
CUTMOVE_OUTPUT_DIR = Path(env("CUTMOVE_OUTPUT_DIR", default=str(BASE_DIR / "results")))
CUTMOVE_RUN_SLOW_TESTS = env("CUTMOVE_RUN_SLOW_TESTS")

# Built-in numerical defaults; command line flags and case files override these.
CUTMOVE = {
    "C_GAMMA": 1.0,
    "GAMMA_SCALING": "strip",
    "GHOST": "dir",
    "FORM": "impl",
    "SCHEME": "ie",
    "NITSCHE_LAMBDA0": 10.0,
    "QUADRATURE_DEGREE": 4,
    "ERROR_QUADRATURE_DEGREE": 6,
    "SOLVER": "lu",
    "SOLVER_TOL": 1e-10,
    "RHO_MAX": 3.0,
    "TIE_BREAK": 1e-14,
    "CONDITION_ITERATIONS": 50,
    "MESH_PATTERN": "diagonal",
}


# Logging
# https://docs.djangoproject.com/en/4.2/topics/logging/

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{levelname} {asctime} {name} {message}",
            "style": "{",
        },
        "bare": {"format": "%(message)s"},
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stderr",
            "formatter": "verbose",
        },
        "diagnostics": {
            "class": "logging.StreamHandler",
            "stream": "ext://sys.stdout",
            "formatter": "bare",
        },
    },
    "loggers": {
        "cutfem": {
            "handlers": ["console"],
            "level": env("CUTMOVE_LOG_LEVEL"),
        },
        "cutfem.diagnostics": {
            "handlers": ["diagnostics"],
            "level": "INFO",
            "propagate": False,
        },
    },
}

if "test" in sys.argv:
    # keep test output readable; records are still created and can be asserted on
    LOGGING["loggers"]["cutfem"]["level"] = "ERROR"
    LOGGING["loggers"]["cutfem.diagnostics"]["handlers"] = []
