"""
Report writers: flat CSV (section, key, value) and an indented key/value text
format for RunStats, plus the sweep summary table.
"""

import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd

from src.analysis.metrics import RunStats, energy_report, read_latency_histogram

logger = logging.getLogger(__name__)

FLOAT_DIGITS = 6


def _clean(value: Any) -> Any:
    if isinstance(value, float):
        return round(value, FLOAT_DIGITS)
    return value


def stats_to_dict(stats: RunStats) -> Dict[str, Any]:
    """Nested, JSON-like view of a run used by every writer"""
    histogram = read_latency_histogram(stats.read_latencies)
    report = {
        'run': {
            'workload': stats.workload,
            'features': stats.features,
            'cycles': stats.cycles,
            'weighted_speedup': stats.weighted_speedup if stats.ipc_alone is not None else '',
        },
        'cores': {
            f"core{core.core_id}": {
                'retired': core.retired,
                'cycles': core.cycles,
                'ipc': core.ipc,
                'stall_cycles': core.stall_cycles,
                'ipc_alone': stats.ipc_alone[i] if stats.ipc_alone else '',
            }
            for i, core in enumerate(stats.cores)
        },
        'copies': {mechanism: dict(entry) for mechanism, entry in sorted(stats.copies.items())},
        'energy': energy_report(stats),
        'villa': dict(stats.villa),
        'lip': dict(stats.lip),
        'controller': {
            'command_counts': dict(stats.command_counts),
            'reads_completed': len(stats.read_latencies),
            'mean_read_latency': stats.mean_read_latency,
            'channel_utilization': stats.channel_utilization,
            'bank_busy_fraction': {f"bank{k}": v for k, v in sorted(stats.bank_busy_fraction.items())},
        },
        'read_latency_histogram': {
            str(int(row.bin_start)): int(row.count) for row in histogram.itertuples(index=False)
        },
    }
    return report


def flatten(report: Dict[str, Any], prefix: str = '') -> List[Dict[str, Any]]:
    rows = []
    for key, value in report.items():
        name = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            rows.extend(flatten(value, name))
        else:
            section, _, field_name = name.partition('.')
            rows.append({'section': section, 'key': field_name, 'value': _clean(value)})
    return rows


def format_nested(report: Dict[str, Any], indent: int = 0) -> str:
    """Indented 'key: value' text; nested sections end with a colon"""
    lines = []
    pad = '  ' * indent
    for key, value in report.items():
        if isinstance(value, dict):
            lines.append(f"{pad}{key}:")
            if value:
                lines.append(format_nested(value, indent + 1))
        else:
            lines.append(f"{pad}{key}: {_clean(value)}")
    return '\n'.join(lines)


def write_csv_report(stats: RunStats, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(flatten(stats_to_dict(stats)), columns=['section', 'key', 'value']).to_csv(path, index=False)
    logger.info(f"Wrote {path}")
    return path


def write_text_report(stats: RunStats, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(format_nested(stats_to_dict(stats)) + '\n')
    logger.info(f"Wrote {path}")
    return path


def summary_table(results: List[RunStats], baseline: Optional[str] = 'baseline') -> pd.DataFrame:
    """One row per run; WS and energy normalized to the baseline combination of the same workload"""
    rows = []
    for stats in results:
        rows.append({
            'workload': stats.workload,
            'features': stats.features,
            'weighted_speedup': stats.weighted_speedup,
            'energy_uJ': stats.total_energy_uj,
            'mean_read_latency': stats.mean_read_latency,
            'villa_hit_rate': stats.villa.get('hit_rate', 0.0),
            'cycles': stats.cycles,
        })
    df = pd.DataFrame(rows, columns=[
        'workload', 'features', 'weighted_speedup', 'energy_uJ', 'mean_read_latency', 'villa_hit_rate', 'cycles',
    ])
    if df.empty:
        df['ws_vs_baseline'] = []
        df['energy_vs_baseline'] = []
        return df

    df['weighted_speedup'] = pd.to_numeric(df['weighted_speedup'])
    reference = baseline if baseline in set(df['features']) else df['features'].iloc[0]
    base = df[df['features'] == reference].set_index('workload')
    df['ws_vs_baseline'] = df['weighted_speedup'] / df['workload'].map(base['weighted_speedup'])
    df['energy_vs_baseline'] = df['energy_uJ'] / df['workload'].map(base['energy_uJ'])
    return df.round(FLOAT_DIGITS)


def write_summary(results: List[RunStats], path: Union[str, Path], baseline: Optional[str] = 'baseline') -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary_table(results, baseline).to_csv(path, index=False)
    logger.info(f"Wrote sweep summary to {path}")
    return path
