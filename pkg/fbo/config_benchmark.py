#!/usr/bin/env python3
"""
Configuración del benchmark.

Documento JSON plano (clave: valor) en data/processed/benchmark_config.json.
Si el archivo no existe se crea con los valores por defecto; los flags de la
línea de comandos sobreescriben los valores del archivo.
"""

import json
import logging
from pathlib import Path
from typing import Optional

from fbo.acquisition import AcquisitionConfig
from fbo.errors import DomainError
from fbo.harness import SuiteConfig
from fbo.inference import MLIIConfig, SamplerConfig
from fbo.priors import PriorSet

logger = logging.getLogger(__name__)


class BenchmarkConfig:
    """Configuración de la suite de benchmark."""

    def __init__(self, config_file: Optional[Path] = None):
        self.base_dir = Path(__file__).resolve().parent.parent
        self.config_file = Path(config_file) if config_file else self.base_dir / 'data' / 'processed' / 'benchmark_config.json'

        # Configuración por defecto
        self.default_config = {
            'seeds_first': 0,
            'seeds_last': 100,
            'budget': 30,
            'methods': ['mlii', 'fbo'],
            'output_dir': 'data/processed/benchmark',
            'workers': None,
            # Muestreador NUTS
            'warmup': 512,
            'draws': 256,
            'thin': 16,
            'target_accept': 0.8,
            'max_tree_depth': 10,
            'max_divergence_fraction': 0.2,
            # ML-II
            'mlii_restarts': 10,
            'mlii_lower': 1e-3,
            'mlii_upper': 1e3,
            'mlii_max_iter': 200,
            'mlii_gtol': 1e-6,
            # Optimización de la adquisición
            'acq_restarts': 10,
            'acq_candidates_per_restart': 100,
            # Priors log-normales (media, desviación estándar)
            'output_scale_mean': 10.0,
            'output_scale_std': 10.0,
            'length_scale_mean': 0.5,
            'length_scale_std': 0.5,
            # Salidas
            'histogram_bins': 20,
            'histogram_steps': [20, 30],
        }

        self.load_config()

    def load_config(self):
        """Carga configuración desde archivo."""
        self.config = self.default_config.copy()
        if self.config_file.exists():
            try:
                with open(self.config_file, 'r', encoding='utf-8') as f:
                    loaded = json.load(f)
                logger.info(f"Configuración cargada desde {self.config_file}")
            except (OSError, json.JSONDecodeError) as e:
                logger.warning(f"Error cargando configuración: {e}; se usan valores por defecto")
                return
            for key, value in loaded.items():
                if key not in self.default_config:
                    logger.warning(f"Clave de configuración desconocida ignorada: {key}")
                    continue
                self.config[key] = value
        else:
            self.save_config()

    def save_config(self):
        """Guarda configuración en archivo."""
        try:
            self.config_file.parent.mkdir(parents=True, exist_ok=True)
            with open(self.config_file, 'w', encoding='utf-8') as f:
                json.dump(self.config, f, indent=2, ensure_ascii=False)
            logger.info(f"Configuración guardada en {self.config_file}")
        except OSError as e:
            logger.error(f"Error guardando configuración: {e}")

    def get_config(self, key: str, default=None):
        """Obtiene valor de configuración."""
        return self.config.get(key, default)

    def set_config(self, key: str, value):
        """Establece valor de configuración."""
        if key not in self.default_config:
            raise DomainError(f"Clave de configuración desconocida: {key}")
        self.config[key] = value
        self.save_config()

    def apply_overrides(self, **overrides):
        """Sobreescribe valores en memoria (flags de CLI); ignora los None."""
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in self.default_config:
                raise DomainError(f"Clave de configuración desconocida: {key}")
            self.config[key] = value

    def output_dir(self) -> Path:
        """Directorio de salida; las rutas relativas se resuelven contra la raíz del proyecto."""
        path = Path(self.config['output_dir'])
        return path if path.is_absolute() else self.base_dir / path

    def to_suite_config(self) -> SuiteConfig:
        c = self.config
        workers = c['workers']
        return SuiteConfig(
            seeds=(int(c['seeds_first']), int(c['seeds_last'])),
            budget=int(c['budget']),
            methods=tuple(c['methods']),
            output_dir=str(self.output_dir()),
            workers=int(workers) if workers is not None else None,
            sampler=SamplerConfig(
                warmup=int(c['warmup']),
                draws=int(c['draws']),
                thin=int(c['thin']),
                target_accept=float(c['target_accept']),
                max_tree_depth=int(c['max_tree_depth']),
                max_divergence_fraction=float(c['max_divergence_fraction']),
            ),
            mlii=MLIIConfig(
                restarts=int(c['mlii_restarts']),
                lower=float(c['mlii_lower']),
                upper=float(c['mlii_upper']),
                max_iter=int(c['mlii_max_iter']),
                gtol=float(c['mlii_gtol']),
            ),
            acquisition=AcquisitionConfig(
                restarts=int(c['acq_restarts']),
                candidates_per_restart=int(c['acq_candidates_per_restart']),
            ),
            priors=PriorSet.from_moments(
                float(c['output_scale_mean']),
                float(c['output_scale_std']),
                float(c['length_scale_mean']),
                float(c['length_scale_std']),
            ),
            histogram_bins=int(c['histogram_bins']),
            histogram_steps=tuple(c['histogram_steps']),
        )
