"""
flcleaner - Simulador determinista de aprendizaje federado con la defensa FL-CLEANER
"""
__version__ = "1.0.0"
