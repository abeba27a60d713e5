"""
Excepciones del benchmark de optimización bayesiana.
"""


class BenchmarkError(Exception):
    """Error base del paquete."""


class DomainError(BenchmarkError, ValueError):
    """Argumento fuera del dominio permitido."""


class NumericalError(BenchmarkError):
    """Falla numérica (Cholesky) tras escalar el jitter."""

    def __init__(self, message: str, jitter_levels=()):
        super().__init__(message)
        self.jitter_levels = tuple(jitter_levels)


class InferenceError(BenchmarkError):
    """Falla en la inferencia de hiperparámetros (ML-II o muestreo)."""

    def __init__(self, message: str, failures=(), diagnostics=None):
        super().__init__(message)
        self.failures = list(failures)
        self.diagnostics = diagnostics


class AcquisitionError(BenchmarkError):
    """Ningún reinicio produjo un valor de adquisición finito."""


class RunAbortedError(BenchmarkError):
    """Corrida de BO abortada en un paso; conserva la historia parcial."""

    def __init__(self, message: str, step: int, method: str, history=None, diagnostics=None):
        super().__init__(message)
        self.step = step
        self.method = method
        self.history = history
        self.diagnostics = diagnostics
