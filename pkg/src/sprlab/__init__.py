"""Laboratorio numérico de SPR y entropía en el infinito para grupos fuchsianos."""

__version__ = "0.1.0"
