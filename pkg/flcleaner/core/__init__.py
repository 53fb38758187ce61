"""
Módulo core - Configuración central, paralelismo y utilidades
"""
