#!/usr/bin/env python3
"""
Priors log-normales para los hiperparámetros del GP.

Los priors se especifican por momentos (media y desviación estándar de la
log-normal) y se guardan con los parámetros de la normal subyacente. La
densidad conjunta se evalúa directamente en el espacio logarítmico, donde
trabajan tanto el muestreador como el optimizador.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from fbo.errors import DomainError

logger = logging.getLogger(__name__)

HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)

# Valores por defecto del benchmark (media, desviación estándar)
OUTPUT_SCALE_MOMENTS = (10.0, 10.0)
LENGTH_SCALE_MOMENTS = (0.5, 0.5)


@dataclass(frozen=True)
class LogNormalSpec:
    """Prior log-normal expresado por la normal subyacente (mu_N, sigma_N)."""

    mu_N: float
    sigma_N: float
    target_mean: float
    target_std: float

    def log_density(self, u):
        """Log-densidad normal de u = log(hiperparámetro)."""
        if self.sigma_N <= 0:
            raise DomainError("Prior degenerado (sigma_N = 0): la densidad no está definida")
        z = (np.asarray(u, dtype=np.float64) - self.mu_N) / self.sigma_N
        return -0.5 * z * z - np.log(self.sigma_N) - HALF_LOG_2PI

    def log_density_gradient(self, u):
        if self.sigma_N <= 0:
            raise DomainError("Prior degenerado (sigma_N = 0): la densidad no está definida")
        return -(np.asarray(u, dtype=np.float64) - self.mu_N) / self.sigma_N ** 2


def lognormal_from_moments(mean: float, std: float) -> LogNormalSpec:
    """Parámetros de la normal subyacente para una log-normal con media y std dadas."""
    if not np.isfinite(mean) or mean <= 0:
        raise DomainError(f"La media de la log-normal debe ser positiva: {mean}")
    if not np.isfinite(std) or std < 0:
        raise DomainError(f"La desviación estándar no puede ser negativa: {std}")

    log_ratio = np.log1p(std ** 2 / mean ** 2)
    mu_N = float(np.log(mean) - 0.5 * log_ratio)
    sigma_N = float(np.sqrt(log_ratio))
    return LogNormalSpec(mu_N=mu_N, sigma_N=sigma_N, target_mean=float(mean), target_std=float(std))


@dataclass(frozen=True)
class PriorSet:
    """Priors independientes: escala de salida y escalas de longitud (compartido)."""

    output_scale_prior: LogNormalSpec
    length_scale_prior: LogNormalSpec

    @classmethod
    def from_moments(cls, output_scale_mean: float = OUTPUT_SCALE_MOMENTS[0],
                     output_scale_std: float = OUTPUT_SCALE_MOMENTS[1],
                     length_scale_mean: float = LENGTH_SCALE_MOMENTS[0],
                     length_scale_std: float = LENGTH_SCALE_MOMENTS[1]) -> 'PriorSet':
        return cls(
            output_scale_prior=lognormal_from_moments(output_scale_mean, output_scale_std),
            length_scale_prior=lognormal_from_moments(length_scale_mean, length_scale_std),
        )

    def prior_means(self, dim: int) -> np.ndarray:
        """mu_N de cada componente: punto inicial de la cadena."""
        return np.concatenate([[self.output_scale_prior.mu_N], np.full(dim, self.length_scale_prior.mu_N)])


def default_priors() -> PriorSet:
    return PriorSet.from_moments()


def _check_log_hp(log_hp, dim: Optional[int]) -> np.ndarray:
    log_hp = np.asarray(log_hp, dtype=np.float64).ravel()
    if log_hp.size < 2:
        raise DomainError(f"Se esperan 1 + d componentes, recibidas {log_hp.size}")
    if dim is not None and log_hp.size != 1 + dim:
        raise DomainError(f"Se esperan {1 + dim} componentes, recibidas {log_hp.size}")
    return log_hp


def log_prior_density(log_hp, priors: PriorSet, dim: Optional[int] = None) -> float:
    """Suma de log-densidades de cada componente evaluadas en espacio log."""
    log_hp = _check_log_hp(log_hp, dim)
    value = priors.output_scale_prior.log_density(log_hp[0])
    value = value + np.sum(priors.length_scale_prior.log_density(log_hp[1:]))
    return float(value)


def log_prior_gradient(log_hp, priors: PriorSet, dim: Optional[int] = None) -> np.ndarray:
    log_hp = _check_log_hp(log_hp, dim)
    grad = np.empty_like(log_hp)
    grad[0] = priors.output_scale_prior.log_density_gradient(log_hp[0])
    grad[1:] = priors.length_scale_prior.log_density_gradient(log_hp[1:])
    return grad
