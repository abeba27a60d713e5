#!/usr/bin/env python3
"""
Expected improvement y su versión marginalizada sobre muestras de hiperparámetros.

La versión marginalizada promedia el EI de cada muestra θ_m (aproximación por
promedio muestral); dado el conjunto de muestras es una función determinista
que se maximiza con multistart + L-BFGS-B sobre el cubo unitario.
"""

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import List, Tuple, Union

import numpy as np
from scipy.stats import norm, qmc

from fbo.errors import AcquisitionError, BenchmarkError, DomainError
from fbo.gp_core import Dataset, GPPosterior, Hyperparameters, condition
from fbo.inference import PosteriorDraws, bounded_quasi_newton
from fbo.random_streams import random_stream

logger = logging.getLogger(__name__)

MIN_STD = 1e-9
FD_STEP = 1e-6


@dataclass(frozen=True)
class AcquisitionConfig:
    restarts: int = 10
    candidates_per_restart: int = 100

    def __post_init__(self):
        if self.restarts < 1 or self.candidates_per_restart < 1:
            raise DomainError(
                f"restarts y candidates_per_restart deben ser >= 1: "
                f"({self.restarts}, {self.candidates_per_restart})"
            )


@dataclass(frozen=True, eq=False)
class AcquisitionContext:
    """Datos, modo (estimación puntual o muestras) e incumbente estandarizado."""

    data: Dataset
    mode: str
    hyperparameters: Tuple[Hyperparameters, ...]

    def __post_init__(self):
        if self.mode not in ('point', 'draws'):
            raise DomainError(f"Modo de adquisición desconocido: {self.mode}")
        if len(self.hyperparameters) < 1:
            raise DomainError("El contexto requiere al menos un conjunto de hiperparámetros")
        if self.mode == 'point' and len(self.hyperparameters) != 1:
            raise DomainError("El modo puntual admite un único conjunto de hiperparámetros")

    @classmethod
    def point_estimate(cls, data: Dataset, hp: Hyperparameters) -> 'AcquisitionContext':
        return cls(data=data, mode='point', hyperparameters=(hp,))

    @classmethod
    def from_draws(cls, data: Dataset, draws: Union[PosteriorDraws, List[Hyperparameters]]) -> 'AcquisitionContext':
        if isinstance(draws, PosteriorDraws):
            draws = draws.hyperparameters()
        return cls(data=data, mode='draws', hyperparameters=tuple(draws))

    @property
    def best_observed(self) -> float:
        return float(np.min(self.data.outputs_std))

    @property
    def dim(self) -> int:
        return self.data.dim

    @cached_property
    def posteriors(self) -> Tuple[GPPosterior, ...]:
        return tuple(condition(self.data, hp) for hp in self.hyperparameters)


def expected_improvement(mean, variance, best):
    """EI para minimización: (best - μ) Φ(z) + σ φ(z), z = (best - μ)/σ."""
    mean = np.asarray(mean, dtype=np.float64)
    variance = np.asarray(variance, dtype=np.float64)
    if np.any(variance < 0):
        raise DomainError("La varianza predictiva no puede ser negativa")

    sigma = np.sqrt(variance)
    improvement = best - mean
    safe_sigma = np.where(sigma < MIN_STD, 1.0, sigma)
    z = improvement / safe_sigma
    ei = improvement * norm.cdf(z) + sigma * norm.pdf(z)
    ei = np.where(sigma < MIN_STD, np.maximum(improvement, 0.0), ei)
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def acquisition_values(ctx: AcquisitionContext, X) -> np.ndarray:
    """EI (promediado sobre muestras) en un lote de puntos del cubo unitario."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    best = ctx.best_observed
    per_draw = np.empty((len(ctx.posteriors), X.shape[0]))
    for m, posterior in enumerate(ctx.posteriors):
        prediction = posterior.predict(X)
        per_draw[m] = expected_improvement(prediction.means, prediction.variances, best)
    return per_draw.mean(axis=0)


def marginalized_ei(x, ctx: AcquisitionContext) -> float:
    """(1/M) Σ_m EI(x | θ_m, D_n)"""
    if ctx.mode != 'draws':
        raise DomainError("marginalized_ei requiere un contexto con muestras")
    return float(acquisition_values(ctx, np.asarray(x)[None, :])[0])


def _negative_with_fd_gradient(ctx: AcquisitionContext):
    def fun(u):
        d = u.size
        offsets = np.vstack([np.zeros(d), FD_STEP * np.eye(d), -FD_STEP * np.eye(d)])
        values = acquisition_values(ctx, u[None, :] + offsets)
        grad = (values[1:d + 1] - values[d + 1:]) / (2.0 * FD_STEP)
        return -values[0], -grad
    return fun


def _sobol_candidates(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    sampler = qmc.Sobol(d=dim, scramble=True, seed=rng)
    with warnings.catch_warnings():
        # n no siempre es potencia de 2
        warnings.filterwarnings('ignore', message='.*balance properties.*')
        return sampler.random(n)


def optimize_acquisition(ctx: AcquisitionContext, restarts: int = 10, candidates_per_restart: int = 100,
                         seed: Union[int, np.random.Generator] = 0) -> np.ndarray:
    """Maximiza la adquisición en [0, 1]^d y devuelve el mejor punto."""
    if restarts < 1 or candidates_per_restart < 1:
        raise DomainError("restarts y candidates_per_restart deben ser >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else random_stream(int(seed), 0, 'acquisition')

    dim = ctx.dim
    candidates = _sobol_candidates(restarts * candidates_per_restart, dim, rng)
    candidate_values = acquisition_values(ctx, candidates)
    order = np.argsort(-candidate_values, kind='stable')[:restarts]

    fun = _negative_with_fd_gradient(ctx)
    box = [(0.0, 1.0)] * dim
    best_x, best_value = None, -np.inf
    for i, index in enumerate(order):
        start = candidates[index]
        x, value = start, candidate_values[index]
        try:
            refined, neg_value = bounded_quasi_newton(fun, box, start)
            if np.isfinite(neg_value) and -neg_value >= value:
                x, value = refined, -neg_value
        except BenchmarkError as e:
            logger.warning(f"Reinicio {i} de la adquisición falló: {e}")

        if np.isfinite(value) and value > best_value:
            best_x, best_value = x, value

    if best_x is None:
        raise AcquisitionError("Ningún reinicio produjo un valor de adquisición finito")

    logger.debug(f"Adquisición máxima {best_value:.6g} en {best_x}")
    return np.clip(best_x, 0.0, 1.0)
