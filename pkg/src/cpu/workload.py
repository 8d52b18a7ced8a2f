"""
Synthetic copy-heavy workload generator.

Every core gets its own footprint of whole rows. Most accesses go to a small
hot subset of that footprint; a fixed share of the events are row-sized bulk
copies between two rows of the same bank.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from config import WORKLOAD_CONFIG
from src.controller.mem_controller import RequestKind
from src.cpu.cpu_model import TraceEvent, write_trace
from src.dram.dram_model import Coordinates, DramConfig, encode_address
from src.dram.errors import ConfigError

logger = logging.getLogger(__name__)

RowRef = Tuple[int, int, int, int]  # channel, rank, bank, row


def usable_rows(cfg: DramConfig, reserved_subarrays: Sequence[int] = (0,)) -> List[RowRef]:
    """Rows workloads may place data in: not in a reserved subarray, not the scratch row"""
    g = cfg.geometry
    scratch = g.scratch_row()
    reserved = set(reserved_subarrays)
    rows = []
    for channel in range(g.channels):
        for rank in range(g.ranks_per_channel):
            for bank in range(g.banks_per_rank):
                for row in range(g.rows_per_bank):
                    if row != scratch and g.subarray_of(row) not in reserved:
                        rows.append((channel, rank, bank, row))
    return rows


def _address(cfg: DramConfig, ref: RowRef, column: int = 0) -> int:
    channel, rank, bank, row = ref
    return encode_address(Coordinates(channel, rank, bank, cfg.geometry.subarray_of(row), row, column), cfg)


def generate_copy_workload(
    seed: int = WORKLOAD_CONFIG['seed'],
    cores: int = WORKLOAD_CONFIG['cores'],
    copy_fraction: float = WORKLOAD_CONFIG['copy_fraction'],
    footprint_mb: float = WORKLOAD_CONFIG['footprint_mb'],
    length: int = WORKLOAD_CONFIG['length'],
    cfg: Optional[DramConfig] = None,
    reserved_subarrays: Sequence[int] = (0,),
    write_fraction: float = WORKLOAD_CONFIG['write_fraction'],
    hot_fraction: float = WORKLOAD_CONFIG['hot_fraction'],
    hot_rows: int = WORKLOAD_CONFIG['hot_rows'],
    mean_bubbles: float = WORKLOAD_CONFIG['mean_bubbles'],
) -> List[List[TraceEvent]]:
    """Deterministic per-core traces; the same arguments always give the same traces"""
    if not 0.0 <= copy_fraction <= 1.0:
        raise ConfigError(f"copy_fraction must be in [0, 1], got {copy_fraction}")
    if cores < 1 or length < 0:
        raise ConfigError(f"need at least one core and a non-negative length, got {cores}, {length}")
    cfg = cfg or DramConfig()
    g = cfg.geometry
    rng = np.random.default_rng(seed)

    pool = usable_rows(cfg, reserved_subarrays)
    per_core = max(2, int(footprint_mb * 2 ** 20) // g.row_bytes)
    per_core = min(per_core, len(pool) // cores)
    if per_core < 2:
        raise ConfigError("footprint does not fit the usable rows of the configured memory")
    picks = rng.permutation(len(pool))[:per_core * cores].reshape(cores, per_core)

    rows_by_bank = {}
    for ref in pool:
        rows_by_bank.setdefault(ref[:3], []).append(ref[3])

    traces = []
    for core in range(cores):
        footprint = [pool[i] for i in picks[core]]
        hot = footprint[:max(1, min(hot_rows, len(footprint)))]

        n_copies = int(round(copy_fraction * length))
        is_copy = np.zeros(length, dtype=bool)
        is_copy[rng.choice(length, size=n_copies, replace=False)] = True
        bubbles = rng.geometric(1.0 / (mean_bubbles + 1.0), size=length) - 1
        draws = rng.random((length, 2))
        columns = rng.integers(0, g.columns_per_row, size=length)

        events = []
        for i in range(length):
            use_hot = draws[i, 0] < hot_fraction
            rows = hot if use_hot else footprint
            ref = rows[rng.integers(len(rows))]
            if is_copy[i]:
                candidates = rows_by_bank[ref[:3]]
                dst_row = candidates[rng.integers(len(candidates))]
                while dst_row == ref[3]:
                    dst_row = candidates[rng.integers(len(candidates))]
                events.append(TraceEvent(
                    int(bubbles[i]),
                    RequestKind.COPY,
                    _address(cfg, ref),
                    _address(cfg, ref[:3] + (dst_row,)),
                    g.row_bytes,
                ))
            else:
                kind = RequestKind.WRITE if draws[i, 1] < write_fraction else RequestKind.READ
                events.append(TraceEvent(int(bubbles[i]), kind, _address(cfg, ref, int(columns[i]))))
        traces.append(events)

    logger.info(f"Generated {cores} traces of {length} events (seed {seed}, copy fraction {copy_fraction})")
    return traces


def write_workload(traces: List[List[TraceEvent]], out_dir: Union[str, Path]) -> List[Path]:
    """Write one core<N>.trace file per core"""
    out_dir = Path(out_dir)
    paths = []
    for core, events in enumerate(traces):
        path = out_dir / f"core{core}.trace"
        write_trace(events, path)
        paths.append(path)
    logger.info(f"Wrote {len(paths)} trace files to {out_dir}")
    return paths
