#!/usr/bin/env python3
"""
Inferencia de hiperparámetros del GP.

Dos regímenes:
- ML-II: maximización de la log-verosimilitud marginal con L-BFGS-B desde
  varios puntos iniciales uniformes en una caja del espacio logarítmico.
- FBO: muestreo de la posterior p(θ|D_n) con Hamiltonian Monte Carlo y el
  criterio No-U-Turn, con adaptación del paso por dual averaging durante el
  calentamiento y matriz de masa unitaria.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from fbo.errors import BenchmarkError, DomainError, InferenceError
from fbo.gp_core import NOISE_VARIANCE, Dataset, Hyperparameters, log_marginal_likelihood
from fbo.priors import PriorSet, log_prior_density, log_prior_gradient
from fbo.random_streams import random_stream

logger = logging.getLogger(__name__)

# Trayectorias con error de energía mayor a este umbral se consideran divergentes
MAX_ENERGY_ERROR = 1000.0
MAX_STEP_SEARCH = 100

ValueAndGrad = Callable[[np.ndarray], Tuple[float, np.ndarray]]


# ---------------------------------------------------------------------------
# Configuración
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SamplerConfig:
    """Calendario del muestreador: 512 de calentamiento, 256 muestras, thin 16."""

    warmup: int = 512
    draws: int = 256
    thin: int = 16
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0
    max_divergence_fraction: float = 0.2

    def __post_init__(self):
        if self.warmup < 0:
            raise DomainError(f"warmup no puede ser negativo: {self.warmup}")
        if self.thin < 1 or self.draws < 1:
            raise DomainError(f"draws y thin deben ser >= 1: draws={self.draws}, thin={self.thin}")
        if self.draws % self.thin != 0:
            raise DomainError(f"draws ({self.draws}) debe ser divisible por thin ({self.thin})")
        if not 0.0 < self.target_accept < 1.0:
            raise DomainError(f"target_accept debe estar en (0, 1): {self.target_accept}")
        if self.max_tree_depth < 0:
            raise DomainError(f"max_tree_depth no puede ser negativo: {self.max_tree_depth}")

    @property
    def kept(self) -> int:
        return self.draws // self.thin


@dataclass(frozen=True)
class MLIIConfig:
    """Multistart de ML-II; la caja se da en unidades naturales y se usa en log."""

    restarts: int = 10
    lower: float = 1e-3
    upper: float = 1e3
    max_iter: int = 200
    gtol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise DomainError(f"restarts debe ser >= 1: {self.restarts}")
        if not 0 < self.lower < self.upper:
            raise DomainError(f"Se requiere 0 < lower < upper: ({self.lower}, {self.upper})")

    def search_box(self, n_params: int) -> List[Tuple[float, float]]:
        return [(float(np.log(self.lower)), float(np.log(self.upper)))] * n_params


# ---------------------------------------------------------------------------
# ML-II
# ---------------------------------------------------------------------------

def bounded_quasi_newton(fun: ValueAndGrad, box: Sequence[Tuple[float, float]], start,
                         max_iter: int = 200, gtol: float = 1e-6,
                         ftol: float = 1e-12) -> Tuple[np.ndarray, float]:
    """Minimiza fun (valor, gradiente) dentro de una caja con L-BFGS-B."""
    box = np.asarray(box, dtype=np.float64).reshape(-1, 2)
    start = np.asarray(start, dtype=np.float64).ravel()
    if start.size != box.shape[0]:
        raise DomainError(f"Punto inicial con {start.size} coordenadas para una caja de {box.shape[0]}")
    if np.any(start < box[:, 0]) or np.any(start > box[:, 1]):
        raise DomainError(f"Punto inicial fuera de la caja: {start}")

    f0, g0 = fun(start)
    if not np.isfinite(f0) or not np.all(np.isfinite(g0)):
        raise DomainError(f"Objetivo o gradiente no finito en el punto inicial {start}")

    result = minimize(
        fun,
        start,
        jac=True,
        method='L-BFGS-B',
        bounds=[tuple(pair) for pair in box],
        options={'maxiter': max_iter, 'gtol': gtol, 'ftol': ftol},
    )
    x = np.clip(result.x, box[:, 0], box[:, 1])
    value = float(result.fun)
    logger.debug(f"L-BFGS-B: {result.nit} iteraciones, f={value:.6g}, estado={result.message}")

    if not np.isfinite(value) or value > f0:
        return start, float(f0)
    return x, value


def fit_mlii(data: Dataset, cfg: MLIIConfig, rng: Optional[np.random.Generator] = None) -> Hyperparameters:
    """Hiperparámetros de máxima verosimilitud marginal (sin prior)."""
    if data.n < 1:
        raise DomainError("Se requiere al menos una observación")
    if rng is None:
        rng = random_stream(cfg.seed, 0, 'mlii')

    box = cfg.search_box(1 + data.dim)
    lows = np.array([lo for lo, _ in box])
    highs = np.array([hi for _, hi in box])
    starts = rng.uniform(lows, highs, size=(cfg.restarts, len(box)))

    def objective(u):
        value, grad = log_marginal_likelihood(data, Hyperparameters.from_log_vector(u))
        return -value, -grad

    best_u, best_value = None, np.inf
    failures = []
    for i, start in enumerate(starts):
        try:
            start_value, _ = objective(start)
        except BenchmarkError as e:
            failures.append((i, str(e)))
            logger.warning(f"ML-II reinicio {i}: punto inicial no evaluable ({e})")
            continue

        candidate_u, candidate_value = start, start_value
        try:
            u, value = bounded_quasi_newton(objective, box, start, cfg.max_iter, cfg.gtol)
            if value <= candidate_value:
                candidate_u, candidate_value = u, value
        except BenchmarkError as e:
            failures.append((i, str(e)))
            logger.warning(f"ML-II reinicio {i} falló: {e}")

        if candidate_value < best_value:
            best_u, best_value = candidate_u, candidate_value

    if best_u is None:
        raise InferenceError("Todos los reinicios de ML-II fallaron", failures=failures)

    hp = Hyperparameters.from_log_vector(best_u)
    logger.debug(f"ML-II: log-verosimilitud {-best_value:.4f}, σ_f²={hp.output_scale:.4g}, ℓ={hp.length_scales}")
    return hp


# ---------------------------------------------------------------------------
# Hamiltonian Monte Carlo / NUTS
# ---------------------------------------------------------------------------

def leapfrog_step(position, momentum, step_size: float,
                  grad_log_target: Callable[[np.ndarray], np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Un paso leapfrog: medio paso de momento, paso completo de posición, medio paso de momento.

    Los valores no finitos se propagan; NUTS marca esas hojas como divergentes.
    """
    position = np.asarray(position, dtype=np.float64)
    momentum = np.asarray(momentum, dtype=np.float64)
    momentum = momentum + 0.5 * step_size * grad_log_target(position)
    position = position + step_size * momentum
    momentum = momentum + 0.5 * step_size * grad_log_target(position)
    return position, momentum


@dataclass
class _State:
    position: np.ndarray
    momentum: np.ndarray
    logp: float
    grad: np.ndarray


def _leapfrog(state: _State, step_size: float, value_and_grad: ValueAndGrad) -> _State:
    momentum = state.momentum + 0.5 * step_size * state.grad
    position = state.position + step_size * momentum
    try:
        logp, grad = value_and_grad(position)
    except BenchmarkError:
        logp, grad = -np.inf, np.full_like(position, np.nan)
    momentum = momentum + 0.5 * step_size * grad
    return _State(position, momentum, float(logp), np.asarray(grad, dtype=np.float64))


def _hamiltonian(state: _State) -> float:
    H = -state.logp + 0.5 * float(state.momentum @ state.momentum)
    return H if np.isfinite(H) else np.inf


def _is_turning(minus: _State, plus: _State) -> bool:
    span = plus.position - minus.position
    return bool(span @ minus.momentum < 0 or span @ plus.momentum < 0)


@dataclass
class _Tree:
    minus: _State
    plus: _State
    proposal: _State
    log_weight: float
    turning: bool
    diverging: bool
    accept_sum: float
    n_leaves: int


def _build_tree(state: _State, direction: int, depth: int, step_size: float,
                value_and_grad: ValueAndGrad, H0: float, rng: np.random.Generator) -> _Tree:
    if depth == 0:
        new = _leapfrog(state, direction * step_size, value_and_grad)
        energy_error = _hamiltonian(new) - H0
        diverging = not np.isfinite(energy_error) or energy_error > MAX_ENERGY_ERROR
        log_weight = -np.inf if diverging else -energy_error
        accept = float(min(1.0, np.exp(-energy_error))) if np.isfinite(energy_error) else 0.0
        return _Tree(new, new, new, log_weight, False, diverging, accept, 1)

    first = _build_tree(state, direction, depth - 1, step_size, value_and_grad, H0, rng)
    if first.turning or first.diverging:
        return first

    edge = first.plus if direction > 0 else first.minus
    second = _build_tree(edge, direction, depth - 1, step_size, value_and_grad, H0, rng)
    if direction > 0:
        minus, plus = first.minus, second.plus
    else:
        minus, plus = second.minus, first.plus

    log_weight = np.logaddexp(first.log_weight, second.log_weight)
    proposal = first.proposal
    # muestreo multinomial uniforme dentro del subárbol
    if not (second.turning or second.diverging) and log_weight > -np.inf:
        if np.log(rng.random()) < second.log_weight - log_weight:
            proposal = second.proposal

    return _Tree(
        minus=minus,
        plus=plus,
        proposal=proposal,
        log_weight=log_weight,
        turning=second.turning or _is_turning(minus, plus),
        diverging=second.diverging,
        accept_sum=first.accept_sum + second.accept_sum,
        n_leaves=first.n_leaves + second.n_leaves,
    )


@dataclass(frozen=True, eq=False)
class NUTSTransition:
    position: np.ndarray
    logp: float
    grad: np.ndarray
    accept_stat: float
    n_leapfrog: int
    tree_depth: int
    divergent: bool


def nuts_transition(position, step_size: float, value_and_grad: ValueAndGrad,
                    rng: np.random.Generator, max_tree_depth: int = 10,
                    logp: Optional[float] = None, grad=None) -> NUTSTransition:
    """Una transición NUTS con duplicación de árbol y selección multinomial.

    Se construyen subárboles de profundidad 0..max_tree_depth; con
    max_tree_depth = 0 la transición es una sola propuesta leapfrog.
    """
    position = np.asarray(position, dtype=np.float64)
    if logp is None or grad is None:
        logp, grad = value_and_grad(position)
    if not np.isfinite(logp):
        raise DomainError(f"Log-objetivo no finito en la posición actual {position}")

    current = _State(position, rng.standard_normal(position.size), float(logp), np.asarray(grad, dtype=np.float64))
    H0 = _hamiltonian(current)
    minus = plus = proposal = current
    log_weight = 0.0
    accept_sum, n_leaves, depth_reached = 0.0, 0, 0
    divergent = False

    for depth in range(max_tree_depth + 1):
        direction = 1 if rng.random() < 0.5 else -1
        edge = plus if direction > 0 else minus
        tree = _build_tree(edge, direction, depth, step_size, value_and_grad, H0, rng)
        if direction > 0:
            plus = tree.plus
        else:
            minus = tree.minus
        accept_sum += tree.accept_sum
        n_leaves += tree.n_leaves
        depth_reached = depth + 1

        if tree.diverging:
            divergent = True
            break
        if tree.turning:
            break

        # muestreo progresivo sesgado hacia el subárbol nuevo
        if np.log(rng.random()) < tree.log_weight - log_weight:
            proposal = tree.proposal
        log_weight = np.logaddexp(log_weight, tree.log_weight)

        if _is_turning(minus, plus):
            break

    return NUTSTransition(
        position=proposal.position,
        logp=proposal.logp,
        grad=proposal.grad,
        accept_stat=accept_sum / n_leaves,
        n_leapfrog=n_leaves,
        tree_depth=depth_reached,
        divergent=divergent,
    )


def find_reasonable_step_size(position, value_and_grad: ValueAndGrad, rng: np.random.Generator,
                              initial: float = 1.0) -> float:
    """Duplica o reduce a la mitad el paso hasta cruzar aceptación 0.5."""
    position = np.asarray(position, dtype=np.float64)
    logp, grad = value_and_grad(position)
    state = _State(position, rng.standard_normal(position.size), float(logp), np.asarray(grad, dtype=np.float64))
    H0 = _hamiltonian(state)
    log_half = np.log(0.5)

    def log_ratio(eps):
        delta = H0 - _hamiltonian(_leapfrog(state, eps, value_and_grad))
        return delta if np.isfinite(delta) else -np.inf

    step_size = initial
    ratio = log_ratio(step_size)
    direction = 1.0 if ratio > log_half else -1.0
    for _ in range(MAX_STEP_SEARCH):
        if direction > 0 and not ratio > log_half:
            break
        if direction < 0 and not ratio < log_half:
            break
        step_size *= 2.0 ** direction
        ratio = log_ratio(step_size)
    return step_size


class DualAveraging:
    """Adaptación del tamaño de paso por dual averaging."""

    def __init__(self, initial_step_size: float, target_accept: float = 0.8,
                 gamma: float = 0.05, t0: float = 10.0, kappa: float = 0.75):
        self.mu = np.log(10.0 * initial_step_size)
        self.target_accept = target_accept
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.t = 0
        self.h_bar = 0.0
        self.log_step = np.log(initial_step_size)
        self.log_step_bar = 0.0

    def update(self, accept_stat: float):
        self.t += 1
        eta = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - eta) * self.h_bar + eta * (self.target_accept - accept_stat)
        self.log_step = self.mu - np.sqrt(self.t) / self.gamma * self.h_bar
        weight = self.t ** (-self.kappa)
        self.log_step_bar = weight * self.log_step + (1.0 - weight) * self.log_step_bar

    @property
    def step_size(self) -> float:
        return float(np.exp(self.log_step))

    @property
    def final_step_size(self) -> float:
        return float(np.exp(self.log_step_bar))


@dataclass(frozen=True)
class SamplerDiagnostics:
    mean_accept_stat: float
    step_size: float
    divergences: int
    warmup_divergences: int
    gradient_evaluations: int
    mean_tree_depth: float

    def to_dict(self) -> dict:
        return {
            'mean_accept_stat': self.mean_accept_stat,
            'step_size': self.step_size,
            'divergences': self.divergences,
            'warmup_divergences': self.warmup_divergences,
            'gradient_evaluations': self.gradient_evaluations,
            'mean_tree_depth': self.mean_tree_depth,
        }


@dataclass(frozen=True, eq=False)
class NUTSResult:
    kept: np.ndarray
    diagnostics: SamplerDiagnostics


def run_nuts(value_and_grad: ValueAndGrad, initial_position, cfg: SamplerConfig,
             rng: Optional[np.random.Generator] = None) -> NUTSResult:
    """Cadena NUTS: calentamiento adaptativo, luego muestras con paso fijo y thinning.

    Se conservan las muestras post-calentamiento de índice thin-1, 2·thin-1, ...
    """
    if rng is None:
        rng = random_stream(cfg.seed, 0, 'sampler')

    position = np.array(initial_position, dtype=np.float64)
    try:
        logp, grad = value_and_grad(position)
    except BenchmarkError as e:
        raise InferenceError(f"Log-objetivo no evaluable en el punto inicial: {e}")
    if not np.isfinite(logp) or not np.all(np.isfinite(grad)):
        raise InferenceError(f"Log-objetivo no finito en el punto inicial {position}")

    initial_step = find_reasonable_step_size(position, value_and_grad, rng)
    adapter = DualAveraging(initial_step, cfg.target_accept)
    gradient_evaluations = 0
    warmup_divergences = 0

    for _ in range(cfg.warmup):
        tr = nuts_transition(position, adapter.step_size, value_and_grad, rng, cfg.max_tree_depth, logp, grad)
        position, logp, grad = tr.position, tr.logp, tr.grad
        warmup_divergences += int(tr.divergent)
        gradient_evaluations += tr.n_leapfrog
        adapter.update(tr.accept_stat)

    step_size = adapter.final_step_size if cfg.warmup > 0 else initial_step
    logger.debug(f"Calentamiento terminado: paso={step_size:.4g}, divergencias={warmup_divergences}")

    kept = []
    accept_stats = []
    depths = []
    divergences = 0
    for i in range(cfg.draws):
        tr = nuts_transition(position, step_size, value_and_grad, rng, cfg.max_tree_depth, logp, grad)
        position, logp, grad = tr.position, tr.logp, tr.grad
        divergences += int(tr.divergent)
        gradient_evaluations += tr.n_leapfrog
        accept_stats.append(tr.accept_stat)
        depths.append(tr.tree_depth)
        if (i + 1) % cfg.thin == 0:
            kept.append(position.copy())

    diagnostics = SamplerDiagnostics(
        mean_accept_stat=float(np.mean(accept_stats)),
        step_size=step_size,
        divergences=divergences,
        warmup_divergences=warmup_divergences,
        gradient_evaluations=gradient_evaluations,
        mean_tree_depth=float(np.mean(depths)),
    )
    if divergences / cfg.draws > cfg.max_divergence_fraction:
        raise InferenceError(
            f"Demasiadas divergencias: {divergences}/{cfg.draws}", diagnostics=diagnostics
        )
    return NUTSResult(kept=np.array(kept), diagnostics=diagnostics)


@dataclass(frozen=True, eq=False)
class PosteriorDraws:
    """M muestras adelgazadas de θ en escala natural, más diagnósticos."""

    draws: np.ndarray
    diagnostics: SamplerDiagnostics

    @property
    def size(self) -> int:
        return self.draws.shape[0]

    def hyperparameters(self, noise_variance: float = NOISE_VARIANCE) -> List[Hyperparameters]:
        return [Hyperparameters(row[0], tuple(row[1:]), noise_variance) for row in self.draws]


def log_posterior(data: Dataset, priors: PriorSet) -> ValueAndGrad:
    """Log-posterior no normalizada de θ (en log) y su gradiente."""
    dim = data.dim

    def value_and_grad(u):
        u = np.asarray(u, dtype=np.float64)
        lml, grad = log_marginal_likelihood(data, Hyperparameters.from_log_vector(u))
        value = lml + log_prior_density(u, priors, dim)
        return value, grad + log_prior_gradient(u, priors, dim)

    return value_and_grad


def sample_posterior(data: Dataset, priors: PriorSet, cfg: SamplerConfig,
                     rng: Optional[np.random.Generator] = None) -> PosteriorDraws:
    """Muestras NUTS de p(θ|D_n); la cadena parte de las medias mu_N de los priors."""
    if data.n < 1:
        raise DomainError("Se requiere al menos una observación")
    start = priors.prior_means(data.dim)
    result = run_nuts(log_posterior(data, priors), start, cfg, rng)
    draws = np.exp(result.kept)
    draws.setflags(write=False)
    logger.debug(
        f"NUTS: {draws.shape[0]} muestras, aceptación media {result.diagnostics.mean_accept_stat:.3f}, "
        f"{result.diagnostics.gradient_evaluations} gradientes"
    )
    return PosteriorDraws(draws=draws, diagnostics=result.diagnostics)
