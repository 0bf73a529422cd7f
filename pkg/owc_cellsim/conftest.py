import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'owc_cellsim.settings')
django.setup()
