#!/usr/bin/env python3
"""
Monitoreo de la suite de benchmark.

Verifica la salida de una corrida (records.csv, timings.csv) contra las
propiedades esperadas de la comparación ML-II vs FBO y genera un reporte de
salud en JSON.
"""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from fbo.errors import DomainError
from fbo.harness import DEFAULT_OUTPUT_DIR, aggregate_percentiles, complete_runs, read_records

logger = logging.getLogger(__name__)

MONOTONE_SLACK = 1e-12


class BenchmarkMonitor:
    """Monitor de la salida de una suite de benchmark."""

    def __init__(self, output_dir: Optional[Path] = None, early_step: int = 2,
                 min_improvement: float = 0.5, seed_blocks: int = 5, min_blocks: int = 4,
                 median_tolerance: float = 0.5, runtime_band=(3.0, 30.0)):
        self.output_dir = Path(output_dir) if output_dir else DEFAULT_OUTPUT_DIR
        self.early_step = early_step
        self.min_improvement = min_improvement
        self.seed_blocks = seed_blocks
        self.min_blocks = min_blocks
        self.median_tolerance = median_tolerance
        self.runtime_band = runtime_band
        self._records = None

    @property
    def records(self) -> pd.DataFrame:
        if self._records is None:
            path = self.output_dir / 'records.csv'
            if not path.exists():
                raise DomainError(f"No existe {path}")
            self._records = read_records(path)
        return self._records

    def _final_regrets(self, method: str) -> pd.Series:
        frame = complete_runs(self.records, method)
        final = frame['step'].max()
        return frame.loc[frame['step'] == final].set_index('seed')['regret'].sort_index()

    def check_median_trend(self):
        """Medianas no crecientes y mejora >= 50% entre N=2 y el último paso."""
        logger.info("Verificando tendencia de la mediana...")
        try:
            messages = []
            ok = True
            for method in ('mlii', 'fbo'):
                table = aggregate_percentiles(self.records, method)
                medians = table.set_index('step')['median']
                if np.any(np.diff(medians.to_numpy()) > MONOTONE_SLACK):
                    ok = False
                    messages.append(f"{method}: mediana creciente")
                    continue
                if self.early_step not in medians.index:
                    ok = False
                    messages.append(f"{method}: sin datos en el paso {self.early_step}")
                    continue
                early, final = medians.loc[self.early_step], medians.iloc[-1]
                improved = final <= (1.0 - self.min_improvement) * early if early > 0 else final == 0
                ok = ok and bool(improved)
                messages.append(f"{method}: mediana {early:.3f} -> {final:.3f}")
            return ok, "; ".join(messages)
        except Exception as e:
            return False, f"Error verificando tendencia: {e}"

    def check_upper_dispersion(self):
        """p90 final de FBO menor que el de ML-II (agregado o en bloques de semillas)."""
        logger.info("Verificando dispersión superior...")
        try:
            fbo = self._final_regrets('fbo')
            mlii = self._final_regrets('mlii')
            seeds = np.intersect1d(fbo.index, mlii.index)
            if seeds.size == 0:
                return False, "No hay semillas completas en ambos métodos"

            pooled_fbo = float(np.percentile(fbo.loc[seeds], 90))
            pooled_mlii = float(np.percentile(mlii.loc[seeds], 90))
            if pooled_fbo < pooled_mlii:
                return True, f"p90 agregado: FBO {pooled_fbo:.3f} < ML-II {pooled_mlii:.3f}"

            wins = 0
            blocks = [b for b in np.array_split(seeds, self.seed_blocks) if b.size]
            for block in blocks:
                if np.percentile(fbo.loc[block], 90) < np.percentile(mlii.loc[block], 90):
                    wins += 1
            ok = wins >= self.min_blocks
            return ok, (f"p90 agregado: FBO {pooled_fbo:.3f} >= ML-II {pooled_mlii:.3f}; "
                        f"bloques favorables {wins}/{len(blocks)}")
        except Exception as e:
            return False, f"Error verificando dispersión: {e}"

    def check_median_similarity(self):
        """|mediana FBO - mediana ML-II| en el último paso <= 0.5 × max."""
        logger.info("Verificando similitud de medianas...")
        try:
            fbo = float(np.median(self._final_regrets('fbo')))
            mlii = float(np.median(self._final_regrets('mlii')))
            ok = abs(fbo - mlii) <= self.median_tolerance * max(fbo, mlii)
            return ok, f"Medianas finales: FBO {fbo:.3f}, ML-II {mlii:.3f}"
        except Exception as e:
            return False, f"Error verificando medianas: {e}"

    def check_runtime_ratio(self):
        """Tiempo total FBO / ML-II dentro de la banda esperada."""
        logger.info("Verificando razón de tiempos...")
        path = self.output_dir / 'timings.csv'
        if not path.exists():
            return False, f"No existe {path}"
        try:
            timings = pd.read_csv(path, encoding='utf-8')
            totals = timings.groupby('method')['seconds'].sum()
            if totals.get('mlii', 0.0) <= 0.0:
                return False, "Tiempo total de ML-II nulo"
            ratio = float(totals.get('fbo', 0.0) / totals['mlii'])
            low, high = self.runtime_band
            return low <= ratio <= high, f"Razón de tiempos FBO/ML-II: {ratio:.1f}x"
        except Exception as e:
            return False, f"Error verificando tiempos: {e}"

    def check_initial_identity(self):
        """Regret del paso 0 idéntico entre métodos para cada semilla."""
        logger.info("Verificando identidad del paso 0...")
        try:
            frame = self.records
            initial = frame[(frame['step'] == 0) & (frame['status'] == 'ok')]
            table = initial.pivot_table(index='seed', columns='method', values='regret', aggfunc='first')
            table = table.dropna()
            if table.empty or not {'mlii', 'fbo'} <= set(table.columns):
                return False, "No hay semillas con paso 0 en ambos métodos"
            mismatched = table.index[table['mlii'].to_numpy() != table['fbo'].to_numpy()].tolist()
            if mismatched:
                return False, f"Paso 0 distinto en semillas {mismatched}"
            return True, f"Paso 0 idéntico en {len(table)} semillas"
        except Exception as e:
            return False, f"Error verificando paso 0: {e}"

    def run_all_checks(self) -> dict:
        """Ejecuta todas las verificaciones y guarda health_report.json."""
        logger.info("Generando reporte de salud...")
        checks = {
            'median_trend': self.check_median_trend,
            'upper_dispersion': self.check_upper_dispersion,
            'median_similarity': self.check_median_similarity,
            'runtime_ratio': self.check_runtime_ratio,
            'initial_identity': self.check_initial_identity,
        }
        report = {
            'timestamp': datetime.now().isoformat(),
            'output_dir': str(self.output_dir),
            'checks': {},
        }
        for name, check in checks.items():
            ok, message = check()
            report['checks'][name] = {'status': 'PASS' if ok else 'FAIL', 'message': message}

        all_passed = all(c['status'] == 'PASS' for c in report['checks'].values())
        report['overall_health'] = 'HEALTHY' if all_passed else 'UNHEALTHY'

        self.output_dir.mkdir(parents=True, exist_ok=True)
        report_file = self.output_dir / 'health_report.json'
        with open(report_file, 'w', encoding='utf-8') as f:
            json.dump(report, f, indent=2, ensure_ascii=False)
        logger.info(f"Reporte de salud guardado en {report_file}")

        logger.info("=== RESUMEN DE SALUD DEL BENCHMARK ===")
        logger.info(f"Estado General: {report['overall_health']}")
        for name, result in report['checks'].items():
            logger.info(f"{name}: {result['status']} - {result['message']}")
        return report


def main(output_dir: Optional[Path] = None) -> int:
    """Ejecuta el monitor y devuelve el código de salida."""
    report = BenchmarkMonitor(output_dir).run_all_checks()

    print("\n" + "=" * 50)
    print("🩺 REPORTE DE SALUD DEL BENCHMARK")
    print("=" * 50)
    for name, result in report['checks'].items():
        icon = "✅" if result['status'] == 'PASS' else "❌"
        print(f"{icon} {name}: {result['message']}")
    print(f"\nEstado general: {report['overall_health']}")
    return 0 if report['overall_health'] == 'HEALTHY' else 1
