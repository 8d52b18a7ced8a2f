"""
Run statistics and system-level metrics: weighted speedup, energy totals and
read-latency distributions.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import pandas as pd

from src.dram.copy_engine import ENERGY_COUNT_KEYS
from src.dram.dram_model import EnergyParams
from src.dram.errors import DegenerateInputError

logger = logging.getLogger(__name__)

COMMAND_ENERGY_FIELDS = {
    'ACT': 'e_act',
    'PRE': 'e_pre',
    'RD': 'e_rd',
    'WR': 'e_wr',
    'IO': 'e_io_per_line',
    'RBM': 'e_rbm_per_hop',
}


@dataclass
class CoreStats:
    core_id: int
    retired: int
    cycles: int
    stall_cycles: int = 0

    @property
    def ipc(self) -> float:
        return self.retired / self.cycles if self.cycles else 0.0


@dataclass
class RunStats:
    """Everything a finished run reports"""
    workload: str = ''
    features: str = 'baseline'
    cycles: int = 0
    cores: List[CoreStats] = field(default_factory=list)
    copies: Dict[str, Dict[str, float]] = field(default_factory=dict)
    command_counts: Dict[str, int] = field(default_factory=lambda: dict.fromkeys(ENERGY_COUNT_KEYS, 0))
    energy: EnergyParams = field(default_factory=EnergyParams)
    villa: Dict[str, float] = field(default_factory=dict)
    lip: Dict[str, int] = field(default_factory=dict)
    read_latencies: List[int] = field(default_factory=list)
    channel_utilization: float = 0.0
    bank_busy_fraction: Dict[int, float] = field(default_factory=dict)
    fill_copies: int = 0
    fill_energy_uj: float = 0.0
    ipc_alone: Optional[List[float]] = None

    @property
    def ipc_shared(self) -> List[float]:
        return [core.ipc for core in self.cores]

    @property
    def demand_energy_uj(self) -> float:
        return sum(
            self.command_counts.get(kind, 0) * getattr(self.energy, name)
            for kind, name in COMMAND_ENERGY_FIELDS.items()
        )

    @property
    def copy_energy_uj(self) -> float:
        return sum(entry['total_energy_uj'] for entry in self.copies.values())

    @property
    def total_energy_uj(self) -> float:
        return self.demand_energy_uj + self.copy_energy_uj

    @property
    def mean_read_latency(self) -> float:
        if not self.read_latencies:
            return 0.0
        return sum(self.read_latencies) / len(self.read_latencies)

    @property
    def weighted_speedup(self) -> Optional[float]:
        if self.ipc_alone is None:
            return None
        return weighted_speedup(self.ipc_shared, self.ipc_alone)


def weighted_speedup(ipc_shared: Sequence[float], ipc_alone: Sequence[float]) -> float:
    """Sum over cores of IPC_shared / IPC_alone"""
    if len(ipc_shared) != len(ipc_alone):
        raise DegenerateInputError(
            f"ipc_shared has {len(ipc_shared)} cores but ipc_alone has {len(ipc_alone)}"
        )
    if not ipc_alone:
        raise DegenerateInputError("weighted speedup of zero cores")
    for i, alone in enumerate(ipc_alone):
        if alone <= 0:
            raise DegenerateInputError(f"core {i} has IPC_alone {alone}; weighted speedup is undefined")
    return sum(shared / alone for shared, alone in zip(ipc_shared, ipc_alone))


def energy_report(stats: RunStats) -> Dict[str, Dict[str, float]]:
    """Energy in uJ by copy mechanism and by demand command kind"""
    by_mechanism = {
        mechanism: entry['total_energy_uj'] for mechanism, entry in sorted(stats.copies.items())
    }
    by_command = {
        kind: stats.command_counts.get(kind, 0) * getattr(stats.energy, name)
        for kind, name in COMMAND_ENERGY_FIELDS.items()
    }
    return {
        'by_mechanism': by_mechanism,
        'by_command': by_command,
        'totals': {
            'copy_uj': sum(by_mechanism.values()),
            'demand_uj': sum(by_command.values()),
            'total_uj': sum(by_mechanism.values()) + sum(by_command.values()),
            'fill_uj': stats.fill_energy_uj,
        },
    }


def read_latency_histogram(latencies: Sequence[int], bin_width: int = 10) -> pd.DataFrame:
    """Counts of read latencies (cycles) in bins of bin_width"""
    if bin_width < 1:
        raise ValueError(f"bin_width must be positive, got {bin_width}")
    if not latencies:
        return pd.DataFrame({'bin_start': pd.Series(dtype='int64'), 'count': pd.Series(dtype='int64')})
    bins = pd.Series(latencies, dtype='int64') // bin_width * bin_width
    counts = bins.value_counts().sort_index()
    return pd.DataFrame({'bin_start': counts.index.astype('int64'), 'count': counts.values.astype('int64')})
