#!/usr/bin/env python3
"""
Núcleo del proceso gaussiano usado como sustituto en la optimización bayesiana.

Incluye el kernel Matérn 5/2 con ARD, la normalización de entradas al cubo
unitario, la estandarización de salidas, la predicción posterior y la
log-verosimilitud marginal con su gradiente analítico respecto de los
log-hiperparámetros. Todo el álgebra se hace en float64.
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
from scipy import linalg

from fbo.errors import DomainError, NumericalError

logger = logging.getLogger(__name__)

NOISE_VARIANCE = 1e-6
JITTER_LEVELS = (1e-8, 1e-6, 1e-4)
SQRT5 = np.sqrt(5.0)
LOG_2PI = np.log(2.0 * np.pi)


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Hyperparameters:
    """Escala de salida, escalas de longitud por dimensión y ruido fijo."""

    output_scale: float
    length_scales: Tuple[float, ...]
    noise_variance: float = NOISE_VARIANCE

    def __post_init__(self):
        object.__setattr__(self, 'output_scale', float(self.output_scale))
        object.__setattr__(self, 'length_scales', tuple(float(v) for v in np.ravel(self.length_scales)))
        object.__setattr__(self, 'noise_variance', float(self.noise_variance))

        if not np.isfinite(self.output_scale) or self.output_scale <= 0:
            raise DomainError(f"output_scale debe ser positivo: {self.output_scale}")
        if len(self.length_scales) == 0:
            raise DomainError("Se requiere al menos una escala de longitud")
        for i, ls in enumerate(self.length_scales):
            if not np.isfinite(ls) or ls <= 0:
                raise DomainError(f"length_scales[{i}] debe ser positivo: {ls}")
        if not np.isfinite(self.noise_variance) or self.noise_variance <= 0:
            raise DomainError(f"noise_variance debe ser positivo: {self.noise_variance}")

    @property
    def dim(self) -> int:
        return len(self.length_scales)

    def to_log_vector(self) -> np.ndarray:
        """[log σ_f², log ℓ_1, ..., log ℓ_d]"""
        return np.log(np.concatenate([[self.output_scale], self.length_scales]))

    @classmethod
    def from_log_vector(cls, log_hp, noise_variance: float = NOISE_VARIANCE) -> 'Hyperparameters':
        values = np.exp(np.asarray(log_hp, dtype=np.float64))
        if values.size < 2:
            raise DomainError(f"Vector de log-hiperparámetros muy corto: {values.size}")
        return cls(values[0], tuple(values[1:]), noise_variance)


def _check_bounds(bounds) -> np.ndarray:
    bounds = np.asarray(bounds, dtype=np.float64)
    if bounds.ndim != 2 or bounds.shape[1] != 2:
        raise DomainError(f"bounds debe tener forma (d, 2), recibido {bounds.shape}")
    bad = np.nonzero(~(bounds[:, 0] < bounds[:, 1]))[0]
    if bad.size:
        raise DomainError(f"Límite inferior >= superior en la dimensión {int(bad[0])}")
    return bounds


def normalize_inputs(raw, bounds) -> np.ndarray:
    """Mapea valores del dominio original a [0, 1]^d."""
    bounds = _check_bounds(bounds)
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape[-1] != bounds.shape[0]:
        raise DomainError(f"Dimensión de entrada {raw.shape[-1]} no coincide con bounds {bounds.shape[0]}")

    lower, upper = bounds[:, 0], bounds[:, 1]
    outside = (raw < lower) | (raw > upper)
    if outside.any():
        index = tuple(int(i) for i in np.argwhere(outside)[0])
        coord = index[-1]
        raise DomainError(
            f"Entrada fuera de los límites en {index}: {raw[index]} no está en "
            f"[{lower[coord]}, {upper[coord]}]"
        )
    return np.clip((raw - lower) / (upper - lower), 0.0, 1.0)


def denormalize_inputs(unit, bounds) -> np.ndarray:
    """Inversa afín de normalize_inputs, exacta en los bordes."""
    bounds = _check_bounds(bounds)
    unit = np.asarray(unit, dtype=np.float64)
    lower, upper = bounds[:, 0], bounds[:, 1]
    raw = lower + unit * (upper - lower)
    raw = np.where(unit <= 0.0, lower, raw)
    raw = np.where(unit >= 1.0, upper, raw)
    return np.clip(raw, lower, upper)


def standardize_outputs(y) -> Tuple[np.ndarray, float, float]:
    """Estandariza salidas: media muestral y desviación con divisor n-1.

    Con un solo punto o sin dispersión se usa std = 1 y z queda centrado.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size < 1:
        raise DomainError("Se requiere al menos una observación")

    mean = float(np.mean(y))
    std = float(np.std(y, ddof=1)) if y.size >= 2 else 1.0
    if not np.isfinite(std) or std <= 0.0:
        std = 1.0
    return (y - mean) / std, mean, std


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observaciones crudas y sus vistas normalizada/estandarizada."""

    inputs_raw: np.ndarray
    outputs_raw: np.ndarray
    bounds: np.ndarray
    inputs_unit: np.ndarray
    outputs_std: np.ndarray
    out_mean: float
    out_std: float

    @classmethod
    def from_observations(cls, inputs_raw, outputs_raw, bounds) -> 'Dataset':
        bounds = _check_bounds(bounds)
        inputs_raw = np.atleast_2d(np.asarray(inputs_raw, dtype=np.float64))
        outputs_raw = np.asarray(outputs_raw, dtype=np.float64).ravel()
        if inputs_raw.shape[0] != outputs_raw.size:
            raise DomainError(
                f"Número de entradas ({inputs_raw.shape[0]}) distinto del de salidas ({outputs_raw.size})"
            )
        if not np.all(np.isfinite(outputs_raw)):
            raise DomainError("Las salidas observadas deben ser finitas")

        inputs_unit = normalize_inputs(inputs_raw, bounds)
        outputs_std, out_mean, out_std = standardize_outputs(outputs_raw)
        return cls(
            inputs_raw=_frozen(inputs_raw),
            outputs_raw=_frozen(outputs_raw),
            bounds=_frozen(bounds),
            inputs_unit=_frozen(inputs_unit),
            outputs_std=_frozen(outputs_std),
            out_mean=out_mean,
            out_std=out_std,
        )

    @property
    def n(self) -> int:
        return self.outputs_raw.size

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]


@dataclass(frozen=True, eq=False)
class PosteriorPrediction:
    """Medias y varianzas predictivas en la escala estandarizada."""

    means: np.ndarray
    variances: np.ndarray


def _scaled_sq_diffs(X1: np.ndarray, X2: np.ndarray, length_scales: Sequence[float]) -> np.ndarray:
    """((x_i - x'_i) / ℓ_i)^2 con forma (n1, n2, d)."""
    ls = np.asarray(length_scales, dtype=np.float64)
    diff = (X1[:, None, :] - X2[None, :, :]) / ls
    return diff * diff


def _matern52_from_r(r: np.ndarray, output_scale: float) -> np.ndarray:
    sr = SQRT5 * r
    return output_scale * (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)


def matern52_gram(X1, X2, hp: Hyperparameters) -> np.ndarray:
    """Matriz de covarianza Matérn 5/2 ARD entre filas de X1 y X2."""
    X1 = np.atleast_2d(np.asarray(X1, dtype=np.float64))
    X2 = np.atleast_2d(np.asarray(X2, dtype=np.float64))
    if X1.shape[1] != hp.dim or X2.shape[1] != hp.dim:
        raise DomainError(f"Dimensión de entradas no coincide con {hp.dim} escalas de longitud")
    r = np.sqrt(_scaled_sq_diffs(X1, X2, hp.length_scales).sum(axis=-1))
    return _matern52_from_r(r, hp.output_scale)


def matern52_ard(x, x_prime, hp: Hyperparameters) -> float:
    """k(x, x') = σ_f² (1 + √5 r + 5/3 r²) exp(-√5 r)."""
    return float(matern52_gram(np.asarray(x)[None, :], np.asarray(x_prime)[None, :], hp)[0, 0])


def _cholesky_with_jitter(K: np.ndarray) -> Tuple[np.ndarray, float]:
    attempted = [0.0]
    try:
        return linalg.cholesky(K, lower=True), 0.0
    except (linalg.LinAlgError, ValueError):
        pass

    eye = np.eye(K.shape[0])
    for jitter in JITTER_LEVELS:
        attempted.append(jitter)
        try:
            L = linalg.cholesky(K + jitter * eye, lower=True)
            logger.debug(f"Cholesky estabilizado con jitter {jitter:g}")
            return L, jitter
        except (linalg.LinAlgError, ValueError):
            continue
    raise NumericalError(
        f"Cholesky falló tras intentar jitter {attempted}", jitter_levels=attempted
    )


@dataclass(frozen=True, eq=False)
class GPPosterior:
    """GP condicionado a un Dataset con hiperparámetros fijos."""

    data: Dataset
    hp: Hyperparameters
    chol: np.ndarray
    alpha: np.ndarray
    jitter: float = field(default=0.0)

    def predict(self, queries) -> PosteriorPrediction:
        Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        K_star = matern52_gram(self.data.inputs_unit, Q, self.hp)
        means = K_star.T @ self.alpha
        v = linalg.solve_triangular(self.chol, K_star, lower=True)
        variances = self.hp.output_scale - np.sum(v * v, axis=0)
        return PosteriorPrediction(means=means, variances=np.maximum(variances, 0.0))


def _noisy_gram(data: Dataset, hp: Hyperparameters) -> np.ndarray:
    if data.dim != hp.dim:
        raise DomainError(f"Dataset con d={data.dim} y hiperparámetros con d={hp.dim}")
    K = matern52_gram(data.inputs_unit, data.inputs_unit, hp)
    K[np.diag_indices_from(K)] += hp.noise_variance
    return K


def condition(data: Dataset, hp: Hyperparameters) -> GPPosterior:
    """Factoriza K + σ_n² I y resuelve α = K̃⁻¹ z."""
    if data.n < 1:
        raise DomainError("Se requiere al menos una observación")
    L, jitter = _cholesky_with_jitter(_noisy_gram(data, hp))
    alpha = linalg.cho_solve((L, True), data.outputs_std)
    return GPPosterior(data=data, hp=hp, chol=L, alpha=alpha, jitter=jitter)


def gp_posterior(data: Dataset, hp: Hyperparameters, queries) -> PosteriorPrediction:
    """Media y varianza posterior en puntos del cubo unitario."""
    return condition(data, hp).predict(queries)


def log_marginal_likelihood(data: Dataset, hp: Hyperparameters) -> Tuple[float, np.ndarray]:
    """Log-verosimilitud marginal y su gradiente en log-hiperparámetros.

    El gradiente se ordena como [log σ_f², log ℓ_1, ..., log ℓ_d].
    """
    if data.n < 1:
        raise DomainError("Se requiere al menos una observación")

    X = data.inputs_unit
    z = data.outputs_std
    n = data.n

    q = _scaled_sq_diffs(X, X, hp.length_scales)
    r = np.sqrt(q.sum(axis=-1))
    K = _matern52_from_r(r, hp.output_scale)
    K_noisy = K.copy()
    K_noisy[np.diag_indices_from(K_noisy)] += hp.noise_variance

    L, _ = _cholesky_with_jitter(K_noisy)
    alpha = linalg.cho_solve((L, True), z)
    value = -0.5 * float(z @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * LOG_2PI

    # W = α αᵀ - K̃⁻¹ ; dL/dθ_j = ½ tr(W dK_j)
    K_inv = linalg.cho_solve((L, True), np.eye(n))
    W = np.outer(alpha, alpha) - K_inv

    grad = np.empty(1 + hp.dim)
    grad[0] = 0.5 * np.sum(W * K)
    # dk/dlog ℓ_i = (5 σ_f² / 3) (1 + √5 r) exp(-√5 r) q_i
    radial = (5.0 * hp.output_scale / 3.0) * (1.0 + SQRT5 * r) * np.exp(-SQRT5 * r)
    for i in range(hp.dim):
        grad[1 + i] = 0.5 * np.sum(W * (radial * q[:, :, i]))
    return value, grad
