"""
DRAM geometry, timing and energy parameter tables, and physical address
decomposition.

All types here are frozen after construction, so a single DramConfig can be
shared by any number of simulation runs.
"""

import logging
import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, NamedTuple, Optional, Sequence, Tuple

from config import (
    DDR3_1600_TIMING,
    DEFAULT_ENERGY,
    DEFAULT_GEOMETRY,
    DEFAULT_MAPPING_ORDER,
    LIP_REFERENCE_LINKED_NS,
    LIP_REFERENCE_PRECHARGE_NS,
    LIP_SPEEDUP,
)
from src.dram.errors import AddressRangeError, ConfigError

logger = logging.getLogger(__name__)

MAPPING_FIELDS = ('row', 'rank', 'bank', 'channel', 'column', 'offset')


def ns_to_cycles(t: float, tCK: float) -> int:
    """Convert a duration in ns to whole clock cycles, rounding up"""
    if t <= 0:
        return 0
    # round() absorbs float noise such as 13.75 / 1.25 = 10.999999999
    return int(math.ceil(round(t / tCK, 9)))


def hops_between(src_sub: int, dst_sub: int) -> int:
    """Number of adjacent-subarray steps between two subarrays of one bank"""
    return abs(src_sub - dst_sub)


def _is_power_of_2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Geometry:
    """DRAM organisation. row_bytes is the rank-level row size."""
    channels: int = DEFAULT_GEOMETRY['channels']
    ranks_per_channel: int = DEFAULT_GEOMETRY['ranks_per_channel']
    banks_per_rank: int = DEFAULT_GEOMETRY['banks_per_rank']
    subarrays_per_bank: int = DEFAULT_GEOMETRY['subarrays_per_bank']
    rows_per_subarray: int = DEFAULT_GEOMETRY['rows_per_subarray']
    columns_per_row: int = DEFAULT_GEOMETRY['columns_per_row']
    cacheline_bytes: int = DEFAULT_GEOMETRY['cacheline_bytes']
    row_bytes: int = DEFAULT_GEOMETRY['row_bytes']

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"geometry.{f.name} must be a positive integer, got {value}")
        if self.row_bytes != self.columns_per_row * self.cacheline_bytes:
            raise ConfigError(
                f"geometry.row_bytes ({self.row_bytes}) must equal columns_per_row x cacheline_bytes "
                f"({self.columns_per_row} x {self.cacheline_bytes})"
            )

    @property
    def rows_per_bank(self) -> int:
        return self.subarrays_per_bank * self.rows_per_subarray

    @property
    def lines_per_row(self) -> int:
        return self.columns_per_row

    @property
    def banks_per_channel(self) -> int:
        return self.ranks_per_channel * self.banks_per_rank

    @property
    def total_bytes(self) -> int:
        return self.channels * self.banks_per_channel * self.rows_per_bank * self.row_bytes

    def subarray_of(self, row: int) -> int:
        return row // self.rows_per_subarray

    def scratch_row(self) -> int:
        """Row reserved in every bank as the RowClone temporary row"""
        return self.rows_per_bank - 1


@dataclass(frozen=True)
class TimingParams:
    """Timing table in ns. tRP_linked=None derives it from tRP."""
    tCK: float = DDR3_1600_TIMING['tCK']
    tRCD: float = DDR3_1600_TIMING['tRCD']
    tRAS: float = DDR3_1600_TIMING['tRAS']
    tRP: float = DDR3_1600_TIMING['tRP']
    tCL: float = DDR3_1600_TIMING['tCL']
    tWR: float = DDR3_1600_TIMING['tWR']
    tRTP: float = DDR3_1600_TIMING['tRTP']
    tCCD: float = DDR3_1600_TIMING['tCCD']
    tBL: float = DDR3_1600_TIMING['tBL']
    tRRD: float = DDR3_1600_TIMING['tRRD']
    tFAW: float = DDR3_1600_TIMING['tFAW']
    tRBM: float = DDR3_1600_TIMING['tRBM']
    tRP_linked: Optional[float] = DDR3_1600_TIMING['tRP_linked']
    t_commit: float = DDR3_1600_TIMING['t_commit']
    rbm_row_transfer_ns: float = DDR3_1600_TIMING['rbm_row_transfer_ns']

    def __post_init__(self):
        if self.tRP_linked is None:
            object.__setattr__(self, 'tRP_linked', derive_linked_precharge(self.tRP))
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)):
                raise ConfigError(f"timing.{f.name} must be a number, got {value!r}")
            if f.name == 't_commit':
                if value < 0:
                    raise ConfigError(f"timing.t_commit must be non-negative, got {value}")
            elif value <= 0:
                raise ConfigError(f"timing.{f.name} must be positive, got {value}")
        if self.tRAS < self.tRCD:
            raise ConfigError(f"timing.tRAS ({self.tRAS}) must be >= tRCD ({self.tRCD})")
        if self.tRP_linked > self.tRP:
            raise ConfigError(f"timing.tRP_linked ({self.tRP_linked}) must be <= tRP ({self.tRP})")

    def cycles(self) -> Dict[str, int]:
        """Every ns parameter converted to cycles (tCK itself excluded)"""
        return {
            f.name: ns_to_cycles(getattr(self, f.name), self.tCK)
            for f in fields(self)
            if f.name != 'tCK'
        }

    def scaled(self, scale: float) -> 'TimingParams':
        """Timing of a short-bitline subarray: tRCD/tRAS/tRP scaled down"""
        tRP = self.tRP * scale
        return replace(
            self,
            tRCD=self.tRCD * scale,
            tRAS=self.tRAS * scale,
            tRP=tRP,
            tRP_linked=min(self.tRP_linked, tRP),
        )

    @property
    def risc_base_ns(self) -> float:
        """Hop-independent part of a LISA-RISC copy"""
        return 2 * self.tRAS + self.tRP + self.t_commit


def derive_linked_precharge(tRP: float) -> float:
    """Linked precharge latency keeping the 13 ns : 5 ns ratio"""
    if math.isclose(tRP, LIP_REFERENCE_PRECHARGE_NS):
        return LIP_REFERENCE_LINKED_NS
    return tRP / LIP_SPEEDUP


@dataclass(frozen=True)
class EnergyParams:
    """Per-command energies in microjoules, plus the standby power of a bank held by a copy"""
    e_act: float = DEFAULT_ENERGY['e_act']
    e_pre: float = DEFAULT_ENERGY['e_pre']
    e_rd: float = DEFAULT_ENERGY['e_rd']
    e_wr: float = DEFAULT_ENERGY['e_wr']
    e_io_per_line: float = DEFAULT_ENERGY['e_io_per_line']
    e_rbm_per_hop: float = DEFAULT_ENERGY['e_rbm_per_hop']
    p_bank_hold_mw: float = DEFAULT_ENERGY['p_bank_hold_mw']

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or value < 0:
                raise ConfigError(f"energy.{f.name} must be a non-negative number, got {value!r}")


class Coordinates(NamedTuple):
    """Decoded address. row is the row index within the bank."""
    channel: int
    rank: int
    bank: int
    subarray: int
    row: int
    column: int
    offset: int = 0

    @property
    def bank_key(self) -> Tuple[int, int, int]:
        return (self.channel, self.rank, self.bank)


@dataclass(frozen=True)
class AddressMapping:
    """(field, bit-width) pairs from most- to least-significant bit"""
    fields: Tuple[Tuple[str, int], ...]

    @classmethod
    def from_order(cls, order: Sequence[str], geometry: Geometry) -> 'AddressMapping':
        order = [name.strip() for name in order]
        if sorted(order) != sorted(MAPPING_FIELDS):
            raise ConfigError(
                f"mapping.order must list each of {', '.join(MAPPING_FIELDS)} exactly once, got {order}"
            )
        counts = {
            'row': geometry.rows_per_bank,
            'rank': geometry.ranks_per_channel,
            'bank': geometry.banks_per_rank,
            'channel': geometry.channels,
            'column': geometry.columns_per_row,
            'offset': geometry.cacheline_bytes,
        }
        for name, count in counts.items():
            if not _is_power_of_2(count):
                raise ConfigError(f"{name} count must be a power of 2 for bit-sliced mapping, got {count}")
        return cls(tuple((name, int(math.log2(counts[name]))) for name in order))

    @property
    def address_bits(self) -> int:
        return sum(width for _, width in self.fields)


@dataclass(frozen=True)
class DramConfig:
    """Single source of truth for cost computation"""
    geometry: Geometry = field(default_factory=Geometry)
    timing: TimingParams = field(default_factory=TimingParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    mapping: Optional[AddressMapping] = None

    def __post_init__(self):
        if self.mapping is None:
            object.__setattr__(self, 'mapping', AddressMapping.from_order(DEFAULT_MAPPING_ORDER, self.geometry))
        expected = AddressMapping.from_order([name for name, _ in self.mapping.fields], self.geometry)
        if expected != self.mapping:
            raise ConfigError(f"mapping widths {self.mapping.fields} do not match geometry {expected.fields}")
        if (1 << self.mapping.address_bits) != self.geometry.total_bytes:
            raise ConfigError("mapping bit-widths do not cover the configured capacity")

    def cycles(self) -> Dict[str, int]:
        return self.timing.cycles()


def decode_address(addr: int, cfg: DramConfig) -> Coordinates:
    """Split a physical address into DRAM coordinates"""
    if addr < 0 or addr >= cfg.geometry.total_bytes:
        raise AddressRangeError(
            f"address {addr:#x} outside 0..{cfg.geometry.total_bytes - 1:#x}"
        )
    values = {}
    remaining = addr
    for name, width in reversed(cfg.mapping.fields):
        values[name] = remaining & ((1 << width) - 1)
        remaining >>= width
    return Coordinates(
        channel=values['channel'],
        rank=values['rank'],
        bank=values['bank'],
        subarray=cfg.geometry.subarray_of(values['row']),
        row=values['row'],
        column=values['column'],
        offset=values['offset'],
    )


def encode_address(coords: Coordinates, cfg: DramConfig) -> int:
    """Inverse of decode_address"""
    g = cfg.geometry
    limits = {
        'channel': g.channels,
        'rank': g.ranks_per_channel,
        'bank': g.banks_per_rank,
        'row': g.rows_per_bank,
        'column': g.columns_per_row,
        'offset': g.cacheline_bytes,
    }
    addr = 0
    for name, width in cfg.mapping.fields:
        value = getattr(coords, name)
        if not 0 <= value < limits[name]:
            raise AddressRangeError(f"{name}={value} outside 0..{limits[name] - 1}")
        addr = (addr << width) | value
    return addr


def row_address(cfg: DramConfig, bank: int, row: int, rank: int = 0, channel: int = 0) -> int:
    """Address of column 0 of a row"""
    coords = Coordinates(channel, rank, bank, cfg.geometry.subarray_of(row), row, 0)
    return encode_address(coords, cfg)
