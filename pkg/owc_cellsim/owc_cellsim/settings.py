"""
Django settings for the owc_cellsim project.

The simulator uses Django for its command framework, form validation and test runner;
no database, URLs or templates are configured.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

load_dotenv()  # Load environment variables from .env file

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'owc-cellsim-local-only')

DEBUG = False

ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'optics',
    'links',
    'scenarios',
]

DATABASES = {}

USE_TZ = True

# Simulator configuration

# Worker threads for grid sweeps; 0 uses every core
OWC_THREADS = int(os.getenv('OWC_THREADS', '0'))

OWC_OUTPUT_DIR = os.getenv('OWC_OUTPUT_DIR', 'results')

OWC_DEFAULT_SCENARIO = os.getenv(
    'OWC_DEFAULT_SCENARIO',
    str(BASE_DIR / 'scenarios' / 'defaults' / 'office_scenario.json'),
)

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': os.getenv('OWC_LOG_LEVEL', 'INFO'),
    },
}
