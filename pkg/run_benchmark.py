#!/usr/bin/env python3
"""
Script principal del benchmark ML-II vs FBO sobre Ackley 2-D.

Subcomandos:
    run        ejecuta la suite (semillas × métodos) y escribe las salidas
    aggregate  recalcula percentiles e histogramas desde un records.csv
    check      ejecuta las verificaciones de salud sobre un directorio de salida
"""

import sys
import argparse
import logging
from pathlib import Path

# Agregar directorio padre al path
sys.path.append(str(Path(__file__).resolve().parent))

from fbo.config_benchmark import BenchmarkConfig
from fbo.errors import BenchmarkError
from fbo.harness import read_records, run_suite, write_aggregates
from fbo.monitor import main as monitor_main

logger = logging.getLogger(__name__)


def setup_logging(level: str = 'INFO'):
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler('benchmark_run.log'),
            logging.StreamHandler()
        ]
    )


def parse_seeds(text: str):
    """'A..B' (inclusivo) o una sola semilla 'A'."""
    try:
        if '..' in text:
            first, last = text.split('..', 1)
            return int(first), int(last)
        return int(text), int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"Rango de semillas inválido: {text!r} (formato A..B)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Benchmark de optimización bayesiana: ML-II vs FBO')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='Nivel de logging')
    sub = parser.add_subparsers(dest='command', required=True)

    run = sub.add_parser('run', help='Ejecutar la suite')
    run.add_argument('--method', choices=['mlii', 'fbo', 'both'], default=None,
                     help='Método a ejecutar (por defecto el de la configuración)')
    run.add_argument('--seeds', type=parse_seeds, help='Rango de semillas A..B (inclusivo)')
    run.add_argument('--budget', type=int, help='Número de pasos de BO')
    run.add_argument('--config', type=Path, help='Archivo de configuración JSON')
    run.add_argument('--out', type=Path, help='Directorio de salida')
    run.add_argument('--workers', type=int, help='Número de procesos paralelos')

    aggregate = sub.add_parser('aggregate', help='Recalcular percentiles e histogramas')
    aggregate.add_argument('records', type=Path, help='Ruta a records.csv')
    aggregate.add_argument('--out', type=Path, help='Directorio de salida (por defecto el de records.csv)')
    aggregate.add_argument('--bins', type=int, default=20, help='Número de bins del histograma')
    aggregate.add_argument('--steps', type=int, nargs='+', default=[20, 30],
                           help='Pasos para los histogramas')

    check = sub.add_parser('check', help='Verificar la salida de una suite')
    check.add_argument('--out', type=Path, help='Directorio de salida de la suite')
    return parser


def command_run(args) -> int:
    config = BenchmarkConfig(args.config)
    methods = None
    if args.method is not None:
        methods = ['mlii', 'fbo'] if args.method == 'both' else [args.method]
    config.apply_overrides(
        seeds_first=args.seeds[0] if args.seeds else None,
        seeds_last=args.seeds[1] if args.seeds else None,
        budget=args.budget,
        methods=methods,
        output_dir=str(args.out.resolve()) if args.out else None,
        workers=args.workers,
    )
    suite = config.to_suite_config()
    records = run_suite(suite)

    failed = sorted({(r.seed, r.method) for r in records if r.status != 'ok'})
    ok_runs = len(suite.seed_list) * len(suite.methods) - len(failed)

    print("\n" + "=" * 50)
    print("📊 RESUMEN DEL BENCHMARK")
    print("=" * 50)
    print(f"✅ Corridas completas: {ok_runs}")
    print(f"❌ Corridas con error: {len(failed)}")
    print(f"📁 Salidas en: {suite.output_dir}")
    for seed, method in failed:
        print(f"   - seed={seed} método={method}")
    return 1 if failed else 0


def command_aggregate(args) -> int:
    if not args.records.exists():
        logger.error(f"No existe {args.records}")
        return 1
    frame = read_records(args.records)
    output_dir = args.out or args.records.parent
    output_dir.mkdir(parents=True, exist_ok=True)
    methods = [m for m in ('mlii', 'fbo') if m in set(frame['method'])]
    written = write_aggregates(frame, output_dir, methods, args.bins, args.steps)
    logger.info(f"Archivos generados: {len(written)} en {output_dir}")
    return 0 if written else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)

    try:
        if args.command == 'run':
            return command_run(args)
        if args.command == 'aggregate':
            return command_aggregate(args)
        return monitor_main(args.out)
    except BenchmarkError as e:
        logger.error(f"Error en el benchmark: {e}")
        return 2


if __name__ == '__main__':
    sys.exit(main())
