"""
Run orchestration: build workloads, run every (workload x feature set)
combination, attach solo IPCs and write the reports.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd

from app.simulator import System
from config import REPORTS_DIR, WORKLOAD_CONFIG
from src.analysis.metrics import RunStats
from src.analysis.reports import write_csv_report, write_summary, write_text_report
from src.controller.mem_controller import FeatureFlags
from src.cpu.cpu_model import TraceEvent, load_trace
from src.cpu.workload import generate_copy_workload
from src.dram.copy_engine import cost_table, rbm_bandwidth_ratio
from src.dram.errors import ConfigError
from src.settings import SimConfig, load_config

logger = logging.getLogger(__name__)

REPORT_FORMATS = ('csv', 'text', 'both')


@dataclass
class Workload:
    name: str
    traces: List[List[TraceEvent]]


@dataclass
class RunPlan:
    config_path: Optional[Path] = None
    trace_paths: List[Path] = field(default_factory=list)
    gen_seeds: List[int] = field(default_factory=list)
    feature_sets: List[str] = field(default_factory=lambda: ['baseline'])
    out_dir: Path = REPORTS_DIR
    report_format: str = 'both'
    generator: Dict[str, float] = field(default_factory=dict)
    max_cycles: Optional[int] = None

    def validate(self):
        if not self.trace_paths and not self.gen_seeds:
            raise ConfigError("a run needs --trace files or --gen-seeds")
        if not self.feature_sets:
            raise ConfigError("a run needs at least one feature combination")
        if self.report_format not in REPORT_FORMATS:
            raise ConfigError(f"report format must be one of {REPORT_FORMATS}, got {self.report_format!r}")


def file_label(features: FeatureFlags) -> str:
    return features.label.replace(',', '+')


def load_workloads(plan: RunPlan, cfg: SimConfig) -> List[Workload]:
    workloads = []
    line = cfg.dram.geometry.cacheline_bytes
    if plan.trace_paths:
        traces = [load_trace(path, line, cfg.dram) for path in plan.trace_paths]
        workloads.append(Workload('traces', traces))
    options = {key: plan.generator.get(key, WORKLOAD_CONFIG[key]) for key in ('cores', 'copy_fraction', 'footprint_mb', 'length')}
    for seed in plan.gen_seeds:
        traces = generate_copy_workload(
            seed=seed,
            cores=int(options['cores']),
            copy_fraction=float(options['copy_fraction']),
            footprint_mb=float(options['footprint_mb']),
            length=int(options['length']),
            cfg=cfg.dram,
            reserved_subarrays=cfg.villa.fast_subarrays,
        )
        workloads.append(Workload(f"seed{seed}", traces))
    return workloads


def solo_ipcs(cfg: SimConfig, traces: Sequence[List[TraceEvent]], max_cycles: Optional[int] = None) -> List[float]:
    """IPC of every trace run alone on the baseline system"""
    ipcs = []
    for trace in traces:
        stats = System(cfg, FeatureFlags(), [trace]).run(max_cycles)
        ipcs.append(stats.cores[0].ipc)
    return ipcs


def run_workload(
    cfg: SimConfig,
    features: FeatureFlags,
    workload: Workload,
    ipc_alone: Optional[List[float]] = None,
    max_cycles: Optional[int] = None,
    command_trace: Optional[Path] = None,
) -> RunStats:
    system = System(cfg, features, workload.traces, record_commands=command_trace is not None)
    stats = system.run(max_cycles)
    stats.workload = workload.name
    stats.ipc_alone = ipc_alone
    if command_trace is not None:
        command_trace.parent.mkdir(parents=True, exist_ok=True)
        with open(command_trace, 'w', encoding='utf-8') as f:
            f.write(''.join(line + '\n' for line in system.command_trace()))
        logger.info(f"Wrote command trace to {command_trace}")
    return stats


def run(plan: RunPlan) -> List[Path]:
    """Run every combination in plan and return the report files written"""
    plan.validate()
    start_time = time.time()
    cfg = load_config(plan.config_path)
    feature_sets = [FeatureFlags.parse(text) for text in plan.feature_sets]
    workloads = load_workloads(plan, cfg)
    out_dir = Path(plan.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written, results = [], []
    for workload in workloads:
        ipc_alone = solo_ipcs(cfg, workload.traces, plan.max_cycles)
        logger.info(f"{workload.name}: IPC alone {[round(ipc, 4) for ipc in ipc_alone]}")
        for features in feature_sets:
            stem = f"{workload.name}__{file_label(features)}"
            trace_path = None
            if cfg.controller.command_trace:
                trace_path = out_dir / f"{stem}__{Path(cfg.controller.command_trace).name}"
            stats = run_workload(cfg, features, workload, ipc_alone, plan.max_cycles, trace_path)
            logger.info(
                f"{workload.name} [{features.label}]: {stats.cycles} cycles, "
                f"WS {stats.weighted_speedup:.4f}, energy {stats.total_energy_uj:.2f} uJ"
            )
            if plan.report_format in ('csv', 'both'):
                written.append(write_csv_report(stats, out_dir / f"{stem}.csv"))
            if plan.report_format in ('text', 'both'):
                written.append(write_text_report(stats, out_dir / f"{stem}.txt"))
            if trace_path is not None:
                written.append(trace_path)
            results.append(stats)

    baseline = 'baseline' if any(f.label == 'baseline' for f in feature_sets) else feature_sets[0].label
    written.append(write_summary(results, out_dir / 'summary.csv', baseline))
    logger.info(f"Completed {len(results)} runs in {int(time.time() - start_time)} seconds")
    return written


def costs_report(cfg: SimConfig, all_hops: bool = False, bandwidth: bool = False) -> str:
    """CSV text of the copy cost table, optionally followed by the RBM bandwidth ratio"""
    table: pd.DataFrame = cost_table(cfg.dram, all_hops=all_hops)
    text = table.to_csv(index=False)
    if bandwidth:
        text += f"# rbm_bandwidth_ratio,{rbm_bandwidth_ratio(cfg.dram):.2f}\n"
    return text
