"""
Sub-flujos aleatorios reproducibles.

Cada consumidor obtiene su propio generador a partir de (semilla, paso, rol):
``SeedSequence([seed, step, role_code])`` alimenta un generador Philox
(basado en contador), de modo que los resultados no dependen de la
plataforma ni del orden en que se ejecuten las corridas.
"""

import numpy as np

from fbo.errors import DomainError

ROLES = {
    'init': 0,
    'mlii': 1,
    'sampler': 2,
    'acquisition': 3,
}


def random_stream(seed: int, step: int = 0, role: str = 'init') -> np.random.Generator:
    """Generador independiente para (seed, step, role)."""
    if role not in ROLES:
        raise DomainError(f"Rol desconocido: {role!r}")
    if seed < 0 or step < 0:
        raise DomainError(f"Semilla y paso deben ser no negativos: seed={seed}, step={step}")
    sequence = np.random.SeedSequence([int(seed), int(step), ROLES[role]])
    return np.random.Generator(np.random.Philox(sequence))
