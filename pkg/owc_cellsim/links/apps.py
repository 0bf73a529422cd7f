from django.apps import AppConfig


class LinksConfig(AppConfig):
    name = 'links'
    verbose_name = 'Link budget and co-existence'
