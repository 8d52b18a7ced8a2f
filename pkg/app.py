#!/usr/bin/env python3
"""
LISA DRAM Simulator - command-line entry point

    python app.py costs [--config F] [--all-hops] [--bandwidth]
    python app.py simulate [--config F] (--trace T... | --gen-seeds N...) [--features risc,villa] [--sweep] [--out D]
    python app.py gen [--seed S] [--cores N] [--copy-fraction X] [--footprint-mb M] [--length L] --out D
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

# Add the current directory to Python path for imports
sys.path.append(str(Path(__file__).parent))

from app.runner import RunPlan, costs_report, run
from config import FEATURE_SWEEP, LOGGING_CONFIG, REPORTS_DIR, WORKLOAD_CONFIG
from src.cpu.workload import generate_copy_workload, write_workload
from src.dram.errors import SimulationError
from src.settings import load_config

logger = logging.getLogger(__name__)


def setup_logging(verbose: bool = False):
    log_file = Path(LOGGING_CONFIG['file'])
    log_file.parent.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=logging.DEBUG if verbose else LOGGING_CONFIG['level'],
        format=LOGGING_CONFIG['format'],
        handlers=[logging.FileHandler(log_file), logging.StreamHandler()],
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='lisa-sim', description='Simulate inter-linked DRAM subarrays')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    sub = parser.add_subparsers(dest='command', required=True)

    costs = sub.add_parser('costs', help='print copy latency and energy per mechanism')
    costs.add_argument('--config', type=Path)
    costs.add_argument('--all-hops', action='store_true', help='every LISA-RISC hop count')
    costs.add_argument('--bandwidth', action='store_true', help='also print the RBM bandwidth ratio')

    sim = sub.add_parser('simulate', help='run traces through the memory system')
    sim.add_argument('--config', type=Path)
    sim.add_argument('--trace', type=Path, nargs='+', default=[], help='one trace file per core')
    sim.add_argument('--gen-seeds', type=int, nargs='+', default=[], help='generate one workload per seed')
    sim.add_argument('--features', action='append', default=[], help="e.g. 'risc,villa,lip'; repeatable")
    sim.add_argument('--sweep', action='store_true', help='run the standard feature matrix')
    sim.add_argument('--format', choices=['csv', 'text', 'both'], default='both')
    sim.add_argument('--out', type=Path, default=REPORTS_DIR)
    sim.add_argument('--cores', type=int, default=WORKLOAD_CONFIG['cores'])
    sim.add_argument('--copy-fraction', type=float, default=WORKLOAD_CONFIG['copy_fraction'])
    sim.add_argument('--footprint-mb', type=float, default=WORKLOAD_CONFIG['footprint_mb'])
    sim.add_argument('--length', type=int, default=WORKLOAD_CONFIG['length'])
    sim.add_argument('--max-cycles', type=int)

    gen = sub.add_parser('gen', help='write synthetic copy-heavy traces')
    gen.add_argument('--config', type=Path)
    gen.add_argument('--seed', type=int, default=WORKLOAD_CONFIG['seed'])
    gen.add_argument('--cores', type=int, default=WORKLOAD_CONFIG['cores'])
    gen.add_argument('--copy-fraction', type=float, default=WORKLOAD_CONFIG['copy_fraction'])
    gen.add_argument('--footprint-mb', type=float, default=WORKLOAD_CONFIG['footprint_mb'])
    gen.add_argument('--length', type=int, default=WORKLOAD_CONFIG['length'])
    gen.add_argument('--out', type=Path, required=True)
    return parser


def feature_sets(args) -> List[str]:
    sets = list(args.features)
    if args.sweep:
        sets += [','.join(names) or 'baseline' for _, names in FEATURE_SWEEP]
    return sets or ['baseline']


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        if args.command == 'costs':
            sys.stdout.write(costs_report(load_config(args.config), args.all_hops, args.bandwidth))
        elif args.command == 'gen':
            cfg = load_config(args.config)
            traces = generate_copy_workload(
                seed=args.seed,
                cores=args.cores,
                copy_fraction=args.copy_fraction,
                footprint_mb=args.footprint_mb,
                length=args.length,
                cfg=cfg.dram,
                reserved_subarrays=cfg.villa.fast_subarrays,
            )
            write_workload(traces, args.out)
        else:
            plan = RunPlan(
                config_path=args.config,
                trace_paths=args.trace,
                gen_seeds=args.gen_seeds,
                feature_sets=feature_sets(args),
                out_dir=args.out,
                report_format=args.format,
                generator={
                    'cores': args.cores,
                    'copy_fraction': args.copy_fraction,
                    'footprint_mb': args.footprint_mb,
                    'length': args.length,
                },
                max_cycles=args.max_cycles,
            )
            run(plan)
    except (SimulationError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
