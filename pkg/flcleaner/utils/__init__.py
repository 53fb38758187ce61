"""
Utilidades compartidas: excepciones y funciones numéricas auxiliares
"""
