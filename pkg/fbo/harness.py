#!/usr/bin/env python3
"""
Benchmark de regret ML-II vs FBO sobre la función de Ackley.

Ejecuta la suite de semillas (una corrida por semilla y método, con x₀
compartido entre métodos), escribe los registros de regret y genera las
tablas de percentiles e histogramas listas para graficar.

Archivos de salida en el directorio configurado:
- records.csv: un registro por (seed, method, step), solo campos deterministas
- timings.csv: segundos de reloj por paso
- percentiles_<method>.csv: mediana y percentiles 10/90 por paso
- hist_<method>_<N>.csv: histograma de regret en el paso N
- manifest.json: configuración, versión y tiempos totales
"""

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from fbo import __version__
from fbo.acquisition import AcquisitionConfig
from fbo.bo_loop import METHODS, History, RunConfig, regret, run_bo
from fbo.errors import DomainError, RunAbortedError
from fbo.inference import MLIIConfig, SamplerConfig
from fbo.priors import PriorSet, default_priors
from fbo.random_streams import random_stream

logger = logging.getLogger(__name__)

BASE_DIR = Path(__file__).resolve().parent.parent
DEFAULT_OUTPUT_DIR = BASE_DIR / 'data' / 'processed' / 'benchmark'

ACKLEY_BOUNDS = ((-32.768, 32.768), (-32.768, 32.768))
ACKLEY_MINIMUM = 0.0


def ackley(x, a: float = 20.0, b: float = 0.2, c: float = 2.0 * np.pi):
    """Función de Ackley en d dimensiones; mínimo global 0 en el origen."""
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[-1]
    mean_sq = np.sum(x * x, axis=-1) / d
    mean_cos = np.sum(np.cos(c * x), axis=-1) / d
    # a + e - a·exp(...) - exp(...) reagrupado para que f(0) sea exactamente 0
    value = a * (1.0 - np.exp(-b * np.sqrt(mean_sq))) + (np.exp(1.0) - np.exp(mean_cos))
    return float(value) if np.ndim(value) == 0 else value


def initial_point(seed: int, bounds=ACKLEY_BOUNDS) -> np.ndarray:
    """x₀ uniforme sobre el dominio, determinista por semilla."""
    bounds = np.asarray(bounds, dtype=np.float64)
    rng = random_stream(seed, 0, 'init')
    return rng.uniform(bounds[:, 0], bounds[:, 1])


@dataclass(frozen=True)
class SuiteConfig:
    seeds: Tuple[int, int] = (0, 100)
    budget: int = 30
    methods: Tuple[str, ...] = METHODS
    output_dir: str = str(DEFAULT_OUTPUT_DIR)
    workers: Optional[int] = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    mlii: MLIIConfig = field(default_factory=MLIIConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    priors: PriorSet = field(default_factory=default_priors)
    histogram_bins: int = 20
    histogram_steps: Tuple[int, ...] = (20, 30)

    def __post_init__(self):
        object.__setattr__(self, 'seeds', tuple(int(s) for s in self.seeds))
        object.__setattr__(self, 'methods', tuple(self.methods))
        object.__setattr__(self, 'histogram_steps', tuple(int(s) for s in self.histogram_steps))
        first, last = self.seeds
        if first < 0 or last < first:
            raise DomainError(f"Rango de semillas vacío o inválido: {first}..{last}")
        if self.budget < 1:
            raise DomainError(f"El presupuesto debe ser >= 1: {self.budget}")
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise DomainError(f"Métodos inválidos: {self.methods}")
        if self.workers is not None and self.workers < 1:
            raise DomainError(f"workers debe ser >= 1: {self.workers}")
        if self.histogram_bins < 1:
            raise DomainError(f"histogram_bins debe ser >= 1: {self.histogram_bins}")

    @property
    def seed_list(self) -> List[int]:
        return list(range(self.seeds[0], self.seeds[1] + 1))

    def run_config(self, seed: int, method: str) -> RunConfig:
        return RunConfig(
            method=method,
            budget=self.budget,
            seed=seed,
            initial_point=tuple(initial_point(seed, ACKLEY_BOUNDS)),
            bounds=ACKLEY_BOUNDS,
            sampler=self.sampler,
            mlii=self.mlii,
            acquisition=self.acquisition,
            priors=self.priors,
        )


@dataclass(frozen=True)
class RegretRecord:
    seed: int
    method: str
    step: int
    x: Tuple[float, ...]
    f: float
    best_so_far: float
    regret: float
    seconds: float
    status: str = 'ok'
    error: str = ''

    def to_row(self) -> dict:
        row = {'seed': self.seed, 'method': self.method, 'step': self.step}
        for i, value in enumerate(self.x, 1):
            row[f'x{i}'] = value
        row.update({
            'f': self.f,
            'best_so_far': self.best_so_far,
            'regret': self.regret,
            'seconds': self.seconds,
            'status': self.status,
            'error': self.error,
        })
        return row


def history_records(history: History, true_min: float = ACKLEY_MINIMUM) -> List[RegretRecord]:
    regrets = regret(history, true_min)
    return [
        RegretRecord(
            seed=history.seed,
            method=history.method,
            step=entry.step,
            x=entry.x,
            f=entry.y,
            best_so_far=entry.best_so_far,
            regret=float(r),
            seconds=entry.seconds,
        )
        for entry, r in zip(history.entries, regrets)
    ]


def _run_task(seed: int, method: str, cfg: SuiteConfig) -> List[RegretRecord]:
    """Una corrida (seed, method); los errores se registran como fila marcadora."""
    run_cfg = cfg.run_config(seed, method)
    dim = len(run_cfg.bounds)
    try:
        history = run_bo(ackley, run_cfg)
        return history_records(history)
    except RunAbortedError as e:
        records = history_records(e.history) if e.history is not None and len(e.history) else []
        failed_step = e.step
        message = str(e)
    except Exception as e:
        logger.error(f"Error inesperado en seed={seed}, método={method}: {e}")
        records, failed_step, message = [], 0, f"{type(e).__name__}: {e}"

    records.append(RegretRecord(
        seed=seed, method=method, step=failed_step, x=(np.nan,) * dim,
        f=np.nan, best_so_far=np.nan, regret=np.nan, seconds=np.nan,
        status='error', error=message,
    ))
    return records


def records_frame(records: Union[pd.DataFrame, Iterable[RegretRecord]]) -> pd.DataFrame:
    if isinstance(records, pd.DataFrame):
        return records.copy()
    return pd.DataFrame([r.to_row() for r in records])


def _sorted_frame(frame: pd.DataFrame) -> pd.DataFrame:
    return frame.sort_values(['seed', 'method', 'step'], kind='mergesort').reset_index(drop=True)


def _append_records(path: Path, records: List[RegretRecord]):
    frame = records_frame(records).drop(columns=['seconds'], errors='ignore')
    frame.to_csv(path, mode='a', header=not path.exists(), index=False, encoding='utf-8')


def complete_runs(frame: pd.DataFrame, method: str) -> pd.DataFrame:
    frame = frame[frame['method'] == method]
    if 'status' in frame.columns:
        failed = frame.loc[frame['status'] != 'ok', 'seed'].unique()
        frame = frame[~frame['seed'].isin(failed)]
    return frame


def aggregate_percentiles(records, method: str) -> pd.DataFrame:
    """Mediana y percentiles 10/90 del regret por paso (interpolación lineal)."""
    frame = complete_runs(records_frame(records), method)
    if frame.empty:
        raise DomainError(f"No hay corridas completas para el método {method!r}")

    grouped = frame.groupby('step')['regret']
    table = pd.DataFrame({
        'median': grouped.quantile(0.5),
        'p10': grouped.quantile(0.1),
        'p90': grouped.quantile(0.9),
        'n_seeds': grouped.count(),
    })
    return table.reset_index()


def emit_histogram(records, method: str, step: int, bins: int = 20,
                   upper: Optional[float] = None) -> pd.DataFrame:
    """Conteos en bins de ancho fijo sobre [0, max regret] (o [0, upper])."""
    frame = complete_runs(records_frame(records), method)
    values = frame.loc[frame['step'] == step, 'regret'].to_numpy(dtype=np.float64)
    if values.size == 0:
        raise DomainError(f"No hay registros de {method!r} en el paso {step}")

    top = float(values.max()) if upper is None else float(upper)
    if top <= 0.0:
        top = 1.0
    counts, edges = np.histogram(values, bins=bins, range=(0.0, top))
    return pd.DataFrame({'lower': edges[:-1], 'upper': edges[1:], 'count': counts})


def write_aggregates(frame: pd.DataFrame, output_dir: Path, methods: Iterable[str],
                     bins: int = 20, steps: Iterable[int] = (20, 30)) -> List[Path]:
    """Escribe percentiles e histogramas para cada método presente."""
    output_dir = Path(output_dir)
    written = []
    for method in methods:
        try:
            table = aggregate_percentiles(frame, method)
        except DomainError as e:
            logger.warning(f"Sin percentiles para {method}: {e}")
            continue
        path = output_dir / f'percentiles_{method}.csv'
        table.to_csv(path, index=False, encoding='utf-8')
        written.append(path)

        budget = int(table['step'].max())
        for step in sorted({s for s in steps if s <= budget} | {budget}):
            hist = emit_histogram(frame, method, step, bins=bins)
            path = output_dir / f'hist_{method}_{step}.csv'
            hist.to_csv(path, index=False, encoding='utf-8')
            written.append(path)
    return written


def read_records(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path, encoding='utf-8', keep_default_na=False, na_values=[''])
    frame['error'] = frame.get('error', pd.Series('', index=frame.index)).fillna('')
    return frame


def _config_echo(cfg: SuiteConfig) -> dict:
    return json.loads(json.dumps(asdict(cfg), default=str))


def run_suite(cfg: SuiteConfig) -> List[RegretRecord]:
    """Ejecuta todas las corridas (seed, method) y escribe las salidas."""
    output_dir = Path(cfg.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    records_path = output_dir / 'records.csv'
    if records_path.exists():
        records_path.unlink()

    tasks = [(seed, method) for seed in cfg.seed_list for method in cfg.methods]
    workers = cfg.workers or os.cpu_count() or 1
    logger.info(f"Iniciando suite: {len(tasks)} corridas, presupuesto {cfg.budget}, {workers} workers")

    start = time.perf_counter()
    all_records: List[RegretRecord] = []

    def collect(seed, method, records):
        _append_records(records_path, records)
        all_records.extend(records)
        status = 'ERROR' if any(r.status != 'ok' for r in records) else 'OK'
        logger.info(f"{status} seed={seed} método={method}: {len(records)} registros")

    if workers == 1:
        for seed, method in tasks:
            collect(seed, method, _run_task(seed, method, cfg))
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(_run_task, seed, method, cfg): (seed, method) for seed, method in tasks}
            for future in as_completed(futures):
                seed, method = futures[future]
                collect(seed, method, future.result())

    wall_time = time.perf_counter() - start

    frame = _sorted_frame(records_frame(all_records))
    frame.drop(columns=['seconds']).to_csv(records_path, index=False, encoding='utf-8')
    timings = frame[['seed', 'method', 'step', 'seconds']]
    timings.to_csv(output_dir / 'timings.csv', index=False, encoding='utf-8')

    write_aggregates(frame, output_dir, cfg.methods, cfg.histogram_bins, cfg.histogram_steps)

    errored = frame.loc[frame['status'] != 'ok', ['seed', 'method']].drop_duplicates()
    manifest = {
        'fecha': datetime.now().isoformat(),
        'version': __version__,
        'config': _config_echo(cfg),
        'total_wall_seconds': wall_time,
        'wall_seconds_by_method': {
            method: float(timings.loc[timings['method'] == method, 'seconds'].sum())
            for method in cfg.methods
        },
        'total_records': int(len(frame)),
        'errored_runs': [
            {'seed': int(row.seed), 'method': row.method} for row in errored.itertuples()
        ],
    }
    with open(output_dir / 'manifest.json', 'w', encoding='utf-8') as f:
        json.dump(manifest, f, indent=2, ensure_ascii=False)

    logger.info(f"Suite completada en {wall_time:.1f}s; {len(frame)} registros en {records_path}")
    if len(errored):
        logger.warning(f"{len(errored)} corridas terminaron con error")

    return sorted(all_records, key=lambda r: (r.seed, r.method, r.step))
