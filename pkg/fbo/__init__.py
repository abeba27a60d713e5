"""
Optimización bayesiana con hiperparámetros ML-II y totalmente bayesianos (FBO).
"""

__version__ = '0.1.0'
