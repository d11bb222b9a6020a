"""vlasovlimit URL Configuration

The `urlpatterns` list routes URLs to views. For more information please see:
    https://docs.djangoproject.com/en/4.0/topics/http/urls/
"""
from django.contrib import admin
from django.urls import include, path

admin.site.site_header = "Vlasov limit runs"
admin.site.index_title = "Vlasov limit runs"
admin.site.site_title = "Vlasov limit runs"

urlpatterns = [
    path("admin/", admin.site.urls),
    path("api/", include("harness.urls")),
]
