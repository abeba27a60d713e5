#!/usr/bin/env python3
"""
Bucle secuencial de optimización bayesiana (ML-II o FBO).

En cada paso se reconstruye el Dataset (normalización con límites fijos y
estandarización recalculada), se infieren hiperparámetros desde cero, se
maximiza la adquisición y se evalúa el objetivo una vez. Con presupuesto N el
objetivo se evalúa exactamente N + 1 veces contando x₀.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Tuple

import numpy as np

from fbo.acquisition import AcquisitionConfig, AcquisitionContext, optimize_acquisition
from fbo.errors import BenchmarkError, DomainError, RunAbortedError
from fbo.gp_core import Dataset, denormalize_inputs
from fbo.inference import MLIIConfig, SamplerConfig, fit_mlii, sample_posterior
from fbo.priors import PriorSet, default_priors
from fbo.random_streams import random_stream

logger = logging.getLogger(__name__)

METHODS = ('mlii', 'fbo')
REGRET_SLACK = 1e-12


@dataclass(frozen=True)
class RunConfig:
    method: str
    budget: int
    seed: int
    initial_point: Tuple[float, ...]
    bounds: Tuple[Tuple[float, float], ...]
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    mlii: MLIIConfig = field(default_factory=MLIIConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    priors: PriorSet = field(default_factory=default_priors)

    def __post_init__(self):
        object.__setattr__(self, 'initial_point', tuple(float(v) for v in self.initial_point))
        object.__setattr__(self, 'bounds', tuple((float(lo), float(hi)) for lo, hi in self.bounds))
        if self.method not in METHODS:
            raise DomainError(f"Método desconocido: {self.method!r} (opciones: {METHODS})")
        if self.budget < 1:
            raise DomainError(f"El presupuesto debe ser >= 1: {self.budget}")
        if len(self.initial_point) != len(self.bounds):
            raise DomainError("initial_point y bounds tienen dimensiones distintas")
        for i, (value, (lo, hi)) in enumerate(zip(self.initial_point, self.bounds)):
            if not lo <= value <= hi:
                raise DomainError(f"initial_point[{i}] = {value} fuera de [{lo}, {hi}]")


@dataclass(frozen=True)
class HistoryEntry:
    step: int
    x: Tuple[float, ...]
    y: float
    best_so_far: float
    seconds: float


@dataclass(frozen=True)
class History:
    method: str
    seed: int
    entries: Tuple[HistoryEntry, ...]

    def __len__(self):
        return len(self.entries)

    @property
    def best_so_far(self) -> np.ndarray:
        return np.array([e.best_so_far for e in self.entries])

    @property
    def observations(self) -> np.ndarray:
        return np.array([e.y for e in self.entries])


def _evaluate(objective, x: np.ndarray, step: int, cfg: RunConfig, entries) -> float:
    """Evalúa el objetivo; cualquier falla aborta la corrida conservando la historia."""
    try:
        return float(objective(x))
    except Exception as e:
        logger.error(f"[{cfg.method} seed={cfg.seed}] objetivo falló en el paso {step}: {e}")
        raise RunAbortedError(
            f"Paso {step} ({cfg.method}) falló al evaluar el objetivo: {e}",
            step=step,
            method=cfg.method,
            history=History(cfg.method, cfg.seed, tuple(entries)),
        ) from e


def run_bo(objective: Callable[[np.ndarray], float], cfg: RunConfig) -> History:
    """Ejecuta N pasos de BO desde cfg.initial_point y devuelve la historia."""
    bounds = np.array(cfg.bounds)
    entries = []

    start = time.perf_counter()
    x0 = np.array(cfg.initial_point)
    y0 = _evaluate(objective, x0, 0, cfg, entries)
    entries.append(HistoryEntry(0, tuple(x0), y0, y0, time.perf_counter() - start))
    inputs, outputs = [x0], [y0]
    best = y0

    for step in range(1, cfg.budget + 1):
        start = time.perf_counter()
        diagnostics = None
        try:
            data = Dataset.from_observations(np.array(inputs), np.array(outputs), bounds)
            if cfg.method == 'mlii':
                hp = fit_mlii(data, cfg.mlii, rng=random_stream(cfg.seed, step, 'mlii'))
                ctx = AcquisitionContext.point_estimate(data, hp)
            else:
                draws = sample_posterior(data, cfg.priors, cfg.sampler, rng=random_stream(cfg.seed, step, 'sampler'))
                diagnostics = draws.diagnostics.to_dict()
                ctx = AcquisitionContext.from_draws(data, draws)

            unit = optimize_acquisition(
                ctx,
                cfg.acquisition.restarts,
                cfg.acquisition.candidates_per_restart,
                seed=random_stream(cfg.seed, step, 'acquisition'),
            )
        except BenchmarkError as e:
            partial = History(cfg.method, cfg.seed, tuple(entries))
            failure_diagnostics = getattr(e, 'diagnostics', None) or diagnostics
            logger.error(f"[{cfg.method} seed={cfg.seed}] paso {step} abortado: {e}")
            raise RunAbortedError(
                f"Paso {step} ({cfg.method}) falló: {e}",
                step=step,
                method=cfg.method,
                history=partial,
                diagnostics=failure_diagnostics,
            ) from e

        x = denormalize_inputs(unit, bounds)
        y = _evaluate(objective, x, step, cfg, entries)
        best = min(best, y)
        inputs.append(x)
        outputs.append(y)
        entries.append(HistoryEntry(step, tuple(x), y, best, time.perf_counter() - start))
        logger.info(
            f"[{cfg.method} seed={cfg.seed}] paso {step}/{cfg.budget}: f={y:.4f}, "
            f"mejor={best:.4f} ({entries[-1].seconds:.2f}s)"
        )

    return History(cfg.method, cfg.seed, tuple(entries))


def regret(history: History, true_min: float) -> np.ndarray:
    """Regret del mejor valor observado; índice 0 corresponde a x₀."""
    observations = history.observations
    below = observations < true_min - REGRET_SLACK
    if below.any():
        step = int(np.argmax(below))
        raise DomainError(
            f"Observación {observations[step]} en el paso {step} es menor que el mínimo verdadero {true_min}"
        )
    return np.maximum(history.best_so_far - true_min, 0.0)
