"""
Per-channel memory controller.

Requests wait in per-bank queues and are scheduled FR-FCFS: among the
commands that are legal this cycle, column commands that hit an open row go
first, then the oldest request wins. One command is issued per cycle.

A bulk copy reserves every bank it blocks once it reaches the head of its
queue. The controller closes whatever is open in those banks and then runs
the copy macro in one step; the banks stay busy until the macro completes.
VILLA lookups happen at enqueue time, and fills are queued behind the
access that triggered them.
"""

import heapq
import itertools
import logging
from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

from src.controller.villa_cache import FILL, HIT, AccessOutcome, HotRowTracker, VillaCache
from src.dram.bank_engine import (
    ActivationWindow,
    BankKey,
    BankState,
    ChannelBus,
    Command,
    CommandKind,
    CommandRecord,
)
from src.dram.copy_engine import (
    ENERGY_COUNT_KEYS,
    CopyJob,
    CopyMechanism,
    blocked_banks,
    copy_energy_uj,
    copy_latency_ns,
    emit_macro,
    execute_macro,
    validate_job,
)
from src.dram.dram_model import Coordinates, Geometry, decode_address
from src.dram.errors import AddressRangeError, ConfigError, CopyJobError, QueueFullError
from src.settings import SimConfig

logger = logging.getLogger(__name__)

FEATURE_NAMES = {
    'risc': 'lisa_risc',
    'lisa_risc': 'lisa_risc',
    'lisa-risc': 'lisa_risc',
    'villa': 'villa',
    'lip': 'lip',
    'rowclone': 'rowclone',
}

DISPATCH = 'dispatch'


class RequestKind(str, Enum):
    READ = 'R'
    WRITE = 'W'
    COPY = 'C'


@dataclass
class MemRequest:
    kind: RequestKind
    address: int
    core_id: int = 0
    arrival_cycle: int = 0
    dst_address: Optional[int] = None
    size: int = 0
    completion_cycle: Optional[int] = None

    def is_done(self, now: int) -> bool:
        return self.completion_cycle is not None and now >= self.completion_cycle


@dataclass(frozen=True)
class FeatureFlags:
    lisa_risc: bool = False
    villa: bool = False
    lip: bool = False
    rowclone: bool = False

    @classmethod
    def parse(cls, text: str) -> 'FeatureFlags':
        """Parse 'baseline' or a comma/plus separated list such as 'risc,villa,lip'"""
        names = [part.strip().lower() for part in text.replace('+', ',').split(',') if part.strip()]
        flags = {}
        for name in names:
            if name in ('baseline', 'none'):
                continue
            if name not in FEATURE_NAMES:
                raise ConfigError(f"unknown feature {name!r}; expected one of baseline, {', '.join(FEATURE_NAMES)}")
            flags[FEATURE_NAMES[name]] = True
        return cls(**flags)

    @property
    def label(self) -> str:
        parts = [
            name for name, on in (
                ('risc', self.lisa_risc),
                ('rowclone', self.rowclone),
                ('villa', self.villa),
                ('lip', self.lip),
            ) if on
        ]
        return ','.join(parts) if parts else 'baseline'


def select_mechanism(src: Coordinates, dst: Coordinates, features: FeatureFlags) -> CopyMechanism:
    """Cheapest enabled mechanism for a whole-row copy between src and dst"""
    in_chip = features.lisa_risc or features.rowclone
    if src.bank_key == dst.bank_key:
        if src.subarray == dst.subarray and in_chip:
            return CopyMechanism.ROWCLONE_INTRA_SA
        if features.lisa_risc:
            return CopyMechanism.LISA_RISC
        if features.rowclone:
            return CopyMechanism.ROWCLONE_INTER_SA
    elif features.rowclone and (src.channel, src.rank) == (dst.channel, dst.rank):
        return CopyMechanism.ROWCLONE_PSM_BANK
    return CopyMechanism.MEMCPY_CHANNEL


@dataclass
class _Entry:
    seq: int
    kind: RequestKind
    bank_key: BankKey
    request: Optional[MemRequest] = None
    subarray: int = 0
    row: int = 0
    column: int = 0
    jobs: List[CopyJob] = field(default_factory=list)
    # (row, slot) installed in the VILLA cache when the last job finishes
    fill: Optional[Tuple[int, int]] = None


@dataclass
class ControllerStats:
    command_counts: Dict[str, int] = field(default_factory=lambda: dict.fromkeys(ENERGY_COUNT_KEYS, 0))
    copies: Dict[str, Dict[str, float]] = field(default_factory=dict)
    read_latencies: List[int] = field(default_factory=list)
    reads: int = 0
    writes: int = 0
    copy_requests: int = 0
    fill_copies: int = 0
    fill_energy_uj: float = 0.0
    bank_busy_cycles: Dict[BankKey, int] = field(default_factory=lambda: defaultdict(int))
    epochs: int = 0

    def record_copy(self, mechanism: str, latency_ns: float, energy_uj: float, cycles: int, fill: bool):
        entry = self.copies.setdefault(
            mechanism, {'copy_count': 0, 'total_latency_ns': 0.0, 'total_energy_uj': 0.0, 'total_cycles': 0}
        )
        entry['copy_count'] += 1
        entry['total_latency_ns'] += latency_ns
        entry['total_energy_uj'] += energy_uj
        entry['total_cycles'] += cycles
        if fill:
            self.fill_copies += 1
            self.fill_energy_uj += energy_uj


class MemoryController:
    """Queues, scheduler and bank state of one channel"""

    def __init__(
        self,
        cfg: Optional[SimConfig] = None,
        features: FeatureFlags = FeatureFlags(),
        channel: int = 0,
        record_commands: bool = False,
    ):
        self.cfg = cfg or SimConfig()
        self.dram = self.cfg.dram
        self.geometry: Geometry = self.dram.geometry
        self.features = features
        self.channel = channel
        self.capacity = self.cfg.controller.queue_capacity
        self.closed_page = self.cfg.controller.page_policy == 'closed'
        self.cyc = self.dram.cycles()

        g = self.geometry
        wants_log = record_commands or bool(self.cfg.controller.command_trace)
        self.command_log: Optional[List[CommandRecord]] = [] if wants_log else None
        fast = self.cfg.villa.fast_subarrays if features.villa else ()
        self.banks: Dict[BankKey, BankState] = {}
        self._windows: List[ActivationWindow] = []
        for rank in range(g.ranks_per_channel):
            window = ActivationWindow(self.cyc['tRRD'], self.cyc['tFAW'])
            self._windows.append(window)
            for bank in range(g.banks_per_rank):
                key = (channel, rank, bank)
                self.banks[key] = BankState(
                    self.dram.timing,
                    g,
                    bank_key=key,
                    bank_id=channel * g.banks_per_channel + rank * g.banks_per_rank + bank,
                    fast_subarrays=fast,
                    fast_timing=self.cfg.fast_timing,
                    window=window,
                    command_log=self.command_log,
                )
        self.queues: Dict[BankKey, List[_Entry]] = {key: [] for key in self.banks}
        self.bus = ChannelBus()

        self.trackers: Dict[BankKey, HotRowTracker] = {}
        self.caches: Dict[BankKey, VillaCache] = {}
        if features.villa:
            for key in self.banks:
                self.trackers[key] = HotRowTracker(self.cfg.villa)
                self.caches[key] = VillaCache(g, self.cfg.villa)

        self.clock = 0
        self.stats = ControllerStats()
        self._seq = itertools.count()
        self._fills_in_flight: List[Tuple[int, int, BankKey, int, int]] = []
        self._warned_fast_rows = False

    # -- request intake ----------------------------------------------------

    def enqueue(self, req: MemRequest, now: int):
        """Accept a request; raises QueueFullError when its bank queue is full"""
        coords = decode_address(req.address, self.dram)
        if coords.channel != self.channel:
            raise AddressRangeError(f"address {req.address:#x} belongs to channel {coords.channel}, not {self.channel}")
        queue = self.queues[coords.bank_key]
        if len(queue) >= self.capacity:
            raise QueueFullError(f"request queue of bank {coords.bank_key} is full ({self.capacity})")

        req.arrival_cycle = now
        if req.kind == RequestKind.COPY:
            self._enqueue_copy(req, coords, now)
        else:
            self._enqueue_access(req, coords, now)

    def _enqueue_access(self, req: MemRequest, coords: Coordinates, now: int):
        key = coords.bank_key
        is_write = req.kind == RequestKind.WRITE
        sub, row = coords.subarray, coords.row
        fill_entry = None
        if self.features.villa:
            cache = self.caches[key]
            if cache.is_fast_row(row) and not self._warned_fast_rows:
                logger.warning(f"Demand access to row {row} inside a fast subarray reserved for caching")
                self._warned_fast_rows = True
            outcome = cache.on_access(row, self.trackers[key], is_write)
            if outcome.kind == HIT:
                row = cache.slot_row(outcome.slot)
                sub = self.geometry.subarray_of(row)
            elif outcome.kind == FILL:
                fill_entry = self._fill_entry(key, coords.row, outcome)

        queue = self.queues[key]
        queue.append(_Entry(next(self._seq), req.kind, key, req, sub, row, coords.column))
        if fill_entry is not None:
            queue.append(fill_entry)
        if is_write:
            self.stats.writes += 1
            req.completion_cycle = now
        else:
            self.stats.reads += 1

    def _row_job(self, mechanism: CopyMechanism, key: BankKey, src_row: int, dst_row: int) -> CopyJob:
        g = self.geometry
        channel, rank, bank = key
        src = Coordinates(channel, rank, bank, g.subarray_of(src_row), src_row, 0)
        dst = Coordinates(channel, rank, bank, g.subarray_of(dst_row), dst_row, 0)
        return CopyJob(mechanism, src, dst, g.row_bytes)

    def _fill_entry(self, key: BankKey, row: int, outcome: AccessOutcome) -> _Entry:
        mechanism = CopyMechanism(self.cfg.villa.fill_mechanism)
        slot_row = self.caches[key].slot_row(outcome.slot)
        jobs = []
        if outcome.evicted_dirty:
            jobs.append(self._row_job(mechanism, key, slot_row, outcome.evicted_row))
        jobs.append(self._row_job(mechanism, key, row, slot_row))
        return _Entry(next(self._seq), RequestKind.COPY, key, jobs=jobs, fill=(row, outcome.slot))

    def _enqueue_copy(self, req: MemRequest, src: Coordinates, now: int):
        if req.dst_address is None:
            raise CopyJobError("copy request without a destination address")
        g = self.geometry
        if req.size <= 0 or req.size % g.cacheline_bytes:
            raise CopyJobError(f"copy size {req.size} is not a positive multiple of {g.cacheline_bytes}")
        dst = decode_address(req.dst_address, self.dram)
        if src.offset or dst.offset:
            raise CopyJobError("copy addresses must be cache-line aligned")

        jobs: List[CopyJob] = []
        src_addr, dst_addr, remaining = req.address, req.dst_address, req.size
        while remaining > 0:
            s = decode_address(src_addr, self.dram)
            d = decode_address(dst_addr, self.dram)
            chunk = min(
                remaining,
                (g.columns_per_row - s.column) * g.cacheline_bytes,
                (g.columns_per_row - d.column) * g.cacheline_bytes,
            )
            self._drop_cached(d)
            jobs.append(self._copy_job(self._cached_source(s), d, chunk, now))
            src_addr += chunk
            dst_addr += chunk
            remaining -= chunk

        self.queues[src.bank_key].append(_Entry(next(self._seq), RequestKind.COPY, src.bank_key, req, jobs=jobs))
        self.stats.copy_requests += 1

    def _copy_job(self, src: Coordinates, dst: Coordinates, size: int, now: int) -> CopyJob:
        memcpy = CopyJob(CopyMechanism.MEMCPY_CHANNEL, src, dst, size, now)
        if size != self.geometry.row_bytes:
            validate_job(memcpy, self.geometry)
            return memcpy
        job = replace(memcpy, mechanism=select_mechanism(src, dst, self.features))
        try:
            validate_job(job, self.geometry)
        except CopyJobError as e:
            logger.debug(f"Falling back to {CopyMechanism.MEMCPY_CHANNEL.value}: {e}")
            validate_job(memcpy, self.geometry)
            return memcpy
        return job

    def _cached_source(self, src: Coordinates) -> Coordinates:
        """Where a copy reads its source: the cache slot holds the current data of a cached row"""
        cache = self.caches.get(src.bank_key) if self.features.villa else None
        slot = cache.tags.get(src.row) if cache is not None else None
        if slot is None:
            return src
        row = cache.slot_row(slot)
        return src._replace(subarray=self.geometry.subarray_of(row), row=row)

    def _drop_cached(self, dst: Coordinates):
        # the copy overwrites dst, so a cached version is stale, dirty or not
        cache = self.caches.get(dst.bank_key) if self.features.villa else None
        if cache is not None:
            cache.invalidate(dst.row)

    # -- scheduling --------------------------------------------------------

    def _pre_kind(self) -> CommandKind:
        return CommandKind.PRE_LINKED if self.features.lip else CommandKind.PRE

    def _reservations(self) -> Dict[BankKey, int]:
        """Banks held by the oldest copy at the head of any queue"""
        held: Dict[BankKey, int] = {}
        for queue in self.queues.values():
            if not queue or queue[0].kind != RequestKind.COPY:
                continue
            head = queue[0]
            for key in blocked_banks(head.jobs[0], self.geometry):
                if key not in held or head.seq < held[key]:
                    held[key] = head.seq
        return held

    def _access_command(self, entry: _Entry, bank: BankState, now: int) -> Optional[Tuple[Command, bool]]:
        key = entry.bank_key
        open_sub = bank.open_subarray()
        hit = False
        if open_sub is None:
            leftover = next((s.index for s in bank.subarrays if not s.is_idle), None)
            if leftover is not None:
                cmd = Command(self._pre_kind(), leftover, bank_key=key)
            else:
                cmd = Command(CommandKind.ACT, entry.subarray, entry.row, bank_key=key)
        elif open_sub == entry.subarray and bank.subarrays[open_sub].open_row == entry.row:
            kind = CommandKind.WR if entry.kind == RequestKind.WRITE else CommandKind.RD
            cmd = Command(kind, entry.subarray, entry.row, entry.column, bank_key=key)
            if not self.bus.is_free(now + self.cyc['tCL'], self.cyc['tBL']):
                return None
            hit = True
        else:
            cmd = Command(self._pre_kind(), open_sub, bank_key=key)
        if bank.earliest_issue(cmd, now) != now:
            return None
        return cmd, hit

    def _copy_command(self, entry: _Entry, held: Dict[BankKey, int], now: int):
        blocked = sorted(blocked_banks(entry.jobs[0], self.geometry))
        if any(held.get(key) != entry.seq for key in blocked):
            return None
        if any(self.banks[key].busy_until > now for key in blocked):
            return None
        for key in blocked:
            bank = self.banks[key]
            for s in bank.subarrays:
                if not s.is_idle:
                    cmd = Command(self._pre_kind(), s.index, bank_key=key)
                    return (cmd, False) if bank.earliest_issue(cmd, now) == now else None
        return DISPATCH, False

    def _closing_command(self, held: Dict[BankKey, int], now: int) -> Optional[Command]:
        """Closed-page policy: precharge a row no queued request still hits"""
        for key, bank in self.banks.items():
            if bank.busy_until > now or key in held:
                continue
            sub = bank.open_subarray()
            if sub is None:
                continue
            row = bank.subarrays[sub].open_row
            if any(e.kind != RequestKind.COPY and e.row == row and e.subarray == sub for e in self.queues[key]):
                continue
            cmd = Command(self._pre_kind(), sub, bank_key=key)
            if bank.earliest_issue(cmd, now) == now:
                return cmd
        return None

    def schedule(self, now: int) -> Optional[Command]:
        """Pick and issue at most one command for cycle now (FR-FCFS)"""
        held = self._reservations()
        best = None
        for key, queue in self.queues.items():
            bank = self.banks[key]
            if bank.busy_until > now:
                continue
            for entry in queue:
                owner = held.get(key)
                if entry.kind == RequestKind.COPY:
                    if entry is not queue[0]:
                        continue
                    found = self._copy_command(entry, held, now)
                elif owner is not None and owner != entry.seq:
                    continue
                else:
                    found = self._access_command(entry, bank, now)
                if found is None:
                    continue
                cmd, hit = found
                rank = (0 if hit else 1, entry.seq)
                if best is None or rank < best[0]:
                    best = (rank, entry, cmd)

        if best is None:
            if self.closed_page:
                cmd = self._closing_command(held, now)
                if cmd is not None:
                    self._issue_simple(cmd, now)
                    return cmd
            return None

        _, entry, cmd = best
        if cmd is DISPATCH:
            return self._dispatch(entry, now)
        if cmd.kind in (CommandKind.RD, CommandKind.WR):
            self._issue_column(entry, cmd, now)
        else:
            self._issue_simple(cmd, now)
        return cmd

    # -- issue ---------------------------------------------------------------

    def _issue_simple(self, cmd: Command, now: int):
        self.banks[cmd.bank_key].issue(cmd, now)
        self.stats.command_counts['ACT' if cmd.kind == CommandKind.ACT else 'PRE'] += 1

    def _issue_column(self, entry: _Entry, cmd: Command, now: int):
        bank = self.banks[entry.bank_key]
        req = entry.request
        if cmd.kind == CommandKind.WR:
            done = bank.issue(cmd, now, token=('wr', req.core_id, entry.seq))
        else:
            done = bank.issue(cmd, now)
            req.completion_cycle = done
            self.stats.read_latencies.append(done - req.arrival_cycle)
        self.bus.reserve(now + self.cyc['tCL'], self.cyc['tBL'])
        self.stats.command_counts[cmd.kind.value] += 1
        self.stats.command_counts['IO'] += 1
        self.queues[entry.bank_key].remove(entry)

    def _dispatch(self, entry: _Entry, now: int) -> Command:
        job = replace(entry.jobs.pop(0), issue_cycle=now)
        macro = emit_macro(job, self.dram)
        done = execute_macro(macro, self.banks, now, self.dram, self.bus)
        for key in blocked_banks(job, self.geometry):
            bank = self.banks[key]
            bank.busy_until = max(bank.busy_until, done)
            self.stats.bank_busy_cycles[key] += done - now

        self.stats.record_copy(
            job.effective_mechanism.value,
            copy_latency_ns(job, self.dram.timing, self.geometry),
            copy_energy_uj(job, self.dram.energy, self.dram),
            done - now,
            fill=entry.fill is not None,
        )
        logger.debug(f"Cycle {now}: {job.effective_mechanism.value} copy {job.src.row} -> {job.dst.row} done at {done}")

        if not entry.jobs:
            self.queues[entry.bank_key].remove(entry)
            if entry.request is not None:
                entry.request.completion_cycle = done
            if entry.fill is not None:
                row, slot = entry.fill
                heapq.heappush(self._fills_in_flight, (done, entry.seq, entry.bank_key, row, slot))
        return macro[0]

    # -- clock ---------------------------------------------------------------

    def _retire(self, now: int):
        while self._fills_in_flight and self._fills_in_flight[0][0] <= now:
            _, _, key, row, slot = heapq.heappop(self._fills_in_flight)
            self.caches[key].complete_fill(row, slot)
        self.bus.prune(now)
        for window in self._windows:
            window.prune(now)

    def _end_epoch(self):
        for tracker in self.trackers.values():
            tracker.end_epoch()
        self.stats.epochs += 1

    def tick(self):
        """Advance one controller cycle"""
        now = self.clock
        self._retire(now)
        if self.features.villa and now > 0 and now % self.cfg.villa.epoch_length == 0:
            self._end_epoch()
        self.schedule(now)
        self.clock += 1

    def is_idle(self) -> bool:
        """No queued work and nothing the page policy still has to close"""
        if any(self.queues.values()):
            return False
        if self.closed_page:
            return all(bank.open_subarray() is None for bank in self.banks.values())
        return True

    def advance_to(self, cycle: int):
        """Jump an idle controller forward, firing any epoch boundaries skipped"""
        if cycle <= self.clock:
            return
        if self.features.villa:
            epoch = self.cfg.villa.epoch_length
            first = max(epoch, -(-self.clock // epoch) * epoch)
            for _ in range(first, cycle, epoch):
                self._end_epoch()
        self.clock = cycle

    def pending(self) -> int:
        return sum(len(queue) for queue in self.queues.values())

    # -- reporting -------------------------------------------------------------

    def villa_stats(self) -> Dict[str, float]:
        hits = sum(c.hits for c in self.caches.values())
        misses = sum(c.misses for c in self.caches.values())
        return {
            'hits': hits,
            'misses': misses,
            'fills': sum(c.fills for c in self.caches.values()),
            'evictions': sum(c.evictions for c in self.caches.values()),
            'writebacks': sum(c.writebacks for c in self.caches.values()),
            'hit_rate': hits / (hits + misses) if hits + misses else 0.0,
        }

    def lip_stats(self) -> Dict[str, int]:
        return {
            'linked_precharges': sum(b.linked_precharges for b in self.banks.values()),
            'plain_precharges': sum(b.plain_precharges for b in self.banks.values()),
        }

    def command_trace(self) -> List[str]:
        """Issued commands in cycle order, one formatted line each"""
        if self.command_log is None:
            return []
        return [record.format() for record in sorted(self.command_log, key=lambda r: (r.cycle, r.bank_id))]
