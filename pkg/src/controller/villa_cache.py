"""
In-DRAM caching in fast subarrays.

Each bank tracks accesses in an array of small saturating counters indexed by
row modulo the counter count. At the end of every epoch the most accessed
counters form the hot set and all counters are halved. A hot row is copied
into a fast subarray the next time it is accessed; cached rows carry a
benefit counter and the least beneficial one is replaced.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Set

import numpy as np

from src.dram.dram_model import Geometry
from src.dram.errors import VillaStateError
from src.settings import VillaSettings

logger = logging.getLogger(__name__)

HIT = 'hit'
FILL = 'fill-scheduled'
MISS = 'miss'
DIRECT = 'direct'


class HotRowTracker:
    """Per-bank saturating access counters and the current hot set"""

    def __init__(self, settings: Optional[VillaSettings] = None):
        settings = settings or VillaSettings()
        self.counters = np.zeros(settings.counters_per_bank, dtype=np.uint8)
        self.max_value = (1 << settings.counter_bits) - 1
        self.hot_set_size = settings.hot_set_size
        self.epoch_length = settings.epoch_length
        self.hot_set: Set[int] = set()
        self.epochs = 0

    def hash(self, row: int) -> int:
        return row % len(self.counters)

    def record_access(self, row: int):
        index = self.hash(row)
        if self.counters[index] < self.max_value:
            self.counters[index] += 1

    def end_epoch(self) -> Set[int]:
        """Select the hot set from the counters, then halve every counter"""
        indices = np.arange(len(self.counters))
        # sort by count descending, lower counter index first on ties
        order = np.lexsort((indices, -self.counters.astype(np.int64)))
        top = [int(i) for i in order[:self.hot_set_size] if self.counters[i] > 0]
        self.hot_set = set(top)
        self.counters >>= 1
        self.epochs += 1
        logger.debug(f"Epoch {self.epochs}: {len(self.hot_set)} hot counters")
        return self.hot_set

    def is_hot(self, row: int) -> bool:
        return self.hash(row) in self.hot_set


class AccessOutcome(NamedTuple):
    kind: str
    slot: Optional[int] = None
    evicted_row: Optional[int] = None
    evicted_dirty: bool = False


@dataclass(frozen=True)
class FastSubarrayConfig:
    fast_subarray_indices: tuple
    rows_per_subarray: int

    def slot_rows(self, geometry: Geometry) -> List[int]:
        scratch = geometry.scratch_row()
        rows = []
        for sub in sorted(self.fast_subarray_indices):
            start = sub * self.rows_per_subarray
            rows.extend(r for r in range(start, start + self.rows_per_subarray) if r != scratch)
        return rows


class VillaCache:
    """Tag store and benefit counters for the fast rows of one bank.

    Slots are reserved while their fill is in flight; tags only change when
    the fill completes.
    """

    def __init__(self, geometry: Geometry, settings: Optional[VillaSettings] = None):
        settings = settings or VillaSettings()
        self.geometry = geometry
        self.fast = FastSubarrayConfig(tuple(settings.fast_subarrays), geometry.rows_per_subarray)
        self.slot_rows = self.fast.slot_rows(geometry)
        self.max_benefit = (1 << settings.benefit_bits) - 1
        self.tags: Dict[int, int] = {}
        self.slot_owner: Dict[int, int] = {}
        self.benefit: Dict[int, int] = {}
        self.dirty: Set[int] = set()
        self.pending: Dict[int, Optional[int]] = {}
        self.last_eviction: Optional[AccessOutcome] = None
        self.hits = 0
        self.misses = 0
        self.fills = 0
        self.evictions = 0
        self.writebacks = 0

    @property
    def capacity(self) -> int:
        return len(self.slot_rows)

    @property
    def fast_rows(self) -> int:
        return self.capacity

    def is_full(self) -> bool:
        return len(self.tags) + len(self.pending) >= self.capacity

    def is_fast_row(self, row: int) -> bool:
        return self.geometry.subarray_of(row) in self.fast.fast_subarray_indices

    def slot_row(self, slot: int) -> int:
        """Bank row backing a cache slot"""
        return self.slot_rows[slot]

    def _free_slot(self) -> Optional[int]:
        for slot in range(self.capacity):
            if slot not in self.slot_owner and slot not in self.pending:
                return slot
        return None

    def on_access(self, row: int, tracker: HotRowTracker, is_write: bool = False) -> AccessOutcome:
        """Classify a demand access and update cache state"""
        if self.is_fast_row(row):
            return AccessOutcome(DIRECT)
        tracker.record_access(row)

        slot = self.tags.get(row)
        if slot is not None:
            self.hits += 1
            self.benefit[slot] = min(self.benefit[slot] + 1, self.max_benefit)
            if is_write:
                self.dirty.add(slot)
            return AccessOutcome(HIT, slot)

        self.misses += 1
        in_flight = [s for s, owner in self.pending.items() if owner == row]
        if in_flight:
            if is_write:
                # the row changes under the copy: drop the fill
                for s in in_flight:
                    self.pending[s] = None
            return AccessOutcome(MISS)
        if not tracker.is_hot(row):
            return AccessOutcome(MISS)

        slot = self._free_slot()
        evicted_row, evicted_dirty = None, False
        if slot is None:
            if not self.tags:
                return AccessOutcome(MISS)
            slot = self.evict_victim()
            evicted_row, evicted_dirty = self.last_eviction.evicted_row, self.last_eviction.evicted_dirty
        self.pending[slot] = row
        self.benefit[slot] = 0
        self.fills += 1
        return AccessOutcome(FILL, slot, evicted_row, evicted_dirty)

    def evict_victim(self) -> int:
        """Remove the least beneficial cached row (lowest slot on ties)"""
        if not self.is_full():
            raise VillaStateError("eviction requested while the cache has free slots")
        if not self.tags:
            raise VillaStateError("every slot is waiting for a fill; nothing to evict")
        slot = min(self.slot_owner, key=lambda s: (self.benefit[s], s))
        row = self.slot_owner.pop(slot)
        del self.tags[row]
        dirty = slot in self.dirty
        self.dirty.discard(slot)
        self.benefit[slot] = 0
        self.evictions += 1
        if dirty:
            self.writebacks += 1
        self.last_eviction = AccessOutcome(MISS, slot, row, dirty)
        return slot

    def complete_fill(self, row: int, slot: int):
        """Install row in slot once its copy has finished"""
        owner = self.pending.pop(slot, None)
        if owner != row:
            self.benefit.pop(slot, None)
            return
        self.tags[row] = slot
        self.slot_owner[slot] = row
        self.benefit.setdefault(slot, 0)

    def invalidate(self, row: int) -> Optional[AccessOutcome]:
        """Drop row from the cache; returns its slot and dirtiness if it was cached"""
        for s, owner in self.pending.items():
            if owner == row:
                self.pending[s] = None
        slot = self.tags.pop(row, None)
        if slot is None:
            return None
        del self.slot_owner[slot]
        del self.benefit[slot]
        dirty = slot in self.dirty
        self.dirty.discard(slot)
        return AccessOutcome(MISS, slot, row, dirty)

    def hit_rate(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0
