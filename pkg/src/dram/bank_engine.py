"""
Per-bank DRAM state machine.

A BankState owns one row buffer per subarray and enforces the JEDEC windows
(tRCD, tRAS, tRP, tCCD, tRTP, tWR and, through a shared ActivationWindow,
tRRD/tFAW) for ACT, PRE, RD, WR and the LISA row buffer movement (RBM).
Row contents are tracked as opaque data tokens so copies can be checked
functionally.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Hashable, List, NamedTuple, Optional, Sequence, Tuple

from src.dram.dram_model import Geometry, TimingParams, ns_to_cycles
from src.dram.errors import IllegalCommandError, TimingViolationError

logger = logging.getLogger(__name__)

Token = Hashable
BankKey = Tuple[int, int, int]


class CommandKind(str, Enum):
    ACT = 'ACT'
    PRE = 'PRE'
    PRE_LINKED = 'PRE_LINKED'
    RD = 'RD'
    WR = 'WR'
    RBM = 'RBM'


@dataclass(frozen=True)
class Command:
    """One primitive DRAM command.

    direction is +1 (toward higher subarray index) or -1 for RBM.
    internal RD/WR move data inside the chip and never use the channel.
    commit marks an ACT that latches a moved row buffer into its row.
    carries_data marks a WR that writes the token of the last RD of a macro.
    offset_ns is the planned issue time relative to the start of a macro.
    """
    kind: CommandKind
    subarray: int
    row: Optional[int] = None
    column: int = 0
    direction: int = 0
    bank_key: BankKey = (0, 0, 0)
    internal: bool = False
    commit: bool = False
    carries_data: bool = False
    offset_ns: float = 0.0


class CommandRecord(NamedTuple):
    cycle: int
    bank_id: int
    kind: str
    subarray: int
    arg: Optional[int]
    internal: bool = False

    def format(self) -> str:
        """Line of the command-trace dump"""
        parts = [str(self.cycle), str(self.bank_id), self.kind, str(self.subarray)]
        if self.arg is not None:
            parts.append(str(self.arg))
        return ' '.join(parts)


def initial_token(bank_key: BankKey, row: int) -> Token:
    return ('init', bank_key, row)


@dataclass
class SubarrayState:
    index: int
    open_row: Optional[int] = None
    latched_token: Optional[Token] = None
    contents: Dict[int, Token] = field(default_factory=dict)
    act_cycle: int = 0
    earliest_act: int = 0
    earliest_col: int = 0
    earliest_pre: int = 0
    latch_ready: int = 0

    @property
    def is_activated(self) -> bool:
        return self.open_row is not None

    @property
    def is_idle(self) -> bool:
        return self.open_row is None and self.latched_token is None

    @property
    def row_buffer(self):
        """'Precharged' or ('Activated', row)"""
        if self.open_row is None:
            return 'Precharged'
        return ('Activated', self.open_row)


class ActivationWindow:
    """Rank-level tRRD and tFAW bookkeeping shared by the banks of a rank"""

    def __init__(self, tRRD: int, tFAW: int):
        self.tRRD = tRRD
        self.tFAW = tFAW
        self._acts: List[int] = []

    def is_legal(self, t: int) -> bool:
        if any(abs(t - a) < self.tRRD for a in self._acts):
            return False
        merged = sorted(self._acts + [t])
        for i in range(len(merged) - 4):
            if merged[i] <= t <= merged[i + 4] and merged[i + 4] - merged[i] < self.tFAW:
                return False
        return True

    def earliest(self, t: int) -> int:
        while not self.is_legal(t):
            t += 1
        return t

    def record(self, t: int):
        self._acts.append(t)
        self._acts.sort()

    def prune(self, now: int):
        """Forget activations that can no longer constrain commands at or after now"""
        horizon = now - max(self.tFAW, self.tRRD)
        self._acts = [a for a in self._acts if a >= horizon]


class ChannelBus:
    """Data-bus occupancy of one channel as a list of [start, end) bursts"""

    def __init__(self):
        self._bursts: List[Tuple[int, int]] = []
        self.busy_cycles = 0

    def is_free(self, start: int, length: int) -> bool:
        end = start + length
        return all(end <= s or start >= e for s, e in self._bursts)

    def earliest(self, t: int, latency: int, length: int) -> int:
        """Earliest issue cycle >= t whose burst at issue+latency fits"""
        while not self.is_free(t + latency, length):
            t += 1
        return t

    def reserve(self, start: int, length: int):
        self._bursts.append((start, start + length))
        self.busy_cycles += length

    def prune(self, now: int):
        self._bursts = [(s, e) for s, e in self._bursts if e > now]


class BankState:
    """Row buffers and timing state of one bank. At most one subarray is
    opened by a demand ACT; a commit activation may open the destination of a
    copy while its source is still open."""

    def __init__(
        self,
        timing: TimingParams,
        geometry: Geometry,
        bank_key: BankKey = (0, 0, 0),
        bank_id: int = 0,
        fast_subarrays: Sequence[int] = (),
        fast_timing: Optional[TimingParams] = None,
        window: Optional[ActivationWindow] = None,
        command_log: Optional[List[CommandRecord]] = None,
    ):
        self.timing = timing
        self.geometry = geometry
        self.bank_key = bank_key
        self.bank_id = bank_id
        self.subarrays = [SubarrayState(i) for i in range(geometry.subarrays_per_bank)]
        self.fast_subarrays = frozenset(fast_subarrays)
        self._normal = timing.cycles()
        self._fast = (fast_timing or timing).cycles()
        if window is None:
            window = ActivationWindow(self._normal['tRRD'], self._normal['tFAW'])
        self.window = window
        self.command_log = command_log
        self.next_col = 0
        self.busy_until = 0
        self.linked_precharges = 0
        self.plain_precharges = 0
        self.last_linked_neighbor: Optional[int] = None
        # (head subarray, start cycle, hops) of the RBM chain in flight
        self._chain: Optional[Tuple[int, int, int]] = None

    # -- helpers ---------------------------------------------------------

    def t(self, sub: int, name: str) -> int:
        if sub in self.fast_subarrays:
            return self._fast[name]
        return self._normal[name]

    def subarray(self, sub: int) -> SubarrayState:
        if not 0 <= sub < len(self.subarrays):
            raise IllegalCommandError(f"subarray {sub} does not exist in bank {self.bank_key}")
        return self.subarrays[sub]

    def token_of(self, row: int) -> Token:
        sub = self.subarrays[self.geometry.subarray_of(row)]
        return sub.contents.get(row, initial_token(self.bank_key, row))

    def activated_subarrays(self) -> List[int]:
        return [s.index for s in self.subarrays if s.is_activated]

    def open_subarray(self) -> Optional[int]:
        active = self.activated_subarrays()
        return active[0] if active else None

    def open_row(self) -> Optional[int]:
        sub = self.open_subarray()
        return None if sub is None else self.subarrays[sub].open_row

    def is_precharged(self) -> bool:
        return all(s.is_idle for s in self.subarrays)

    def ready_for_activate(self) -> int:
        """Cycle after which every subarray can be activated again"""
        return max(s.earliest_act for s in self.subarrays)

    def _check_row(self, sub: int, row: int):
        if self.geometry.subarray_of(row) != sub or not 0 <= row < self.geometry.rows_per_bank:
            raise IllegalCommandError(f"row {row} is not in subarray {sub}")

    def _log(self, now: int, kind: str, sub: int, arg: Optional[int], internal: bool = False):
        if self.command_log is not None:
            self.command_log.append(CommandRecord(now, self.bank_id, kind, sub, arg, internal))

    @staticmethod
    def _require(now: int, constraints: List[Tuple[str, int]]):
        name, earliest = max(constraints, key=lambda c: c[1])
        if now < earliest:
            raise TimingViolationError(name, earliest, now)

    # -- earliest issue ----------------------------------------------------

    def earliest_issue(self, cmd: Command, after: int = 0) -> int:
        """Earliest cycle >= after at which cmd is legal in the current state"""
        s = self.subarray(cmd.subarray)
        kind = cmd.kind
        if kind == CommandKind.ACT:
            if cmd.commit:
                if s.open_row == cmd.row:
                    return after
                t = max(after, s.latch_ready)
            else:
                t = max(after, self.ready_for_activate())
            return self.window.earliest(t)
        if kind in (CommandKind.RD, CommandKind.WR):
            return max(after, s.earliest_col, self.next_col)
        if kind in (CommandKind.PRE, CommandKind.PRE_LINKED):
            return max(after, s.earliest_pre if s.is_activated else s.latch_ready)
        if kind == CommandKind.RBM:
            dst = self.subarray(cmd.subarray + cmd.direction)
            return max(after, s.latch_ready, dst.earliest_act)
        raise IllegalCommandError(f"unknown command kind {kind}")

    # -- command issue ------------------------------------------------------

    def issue(self, cmd: Command, now: int, token: Optional[Token] = None) -> int:
        """Apply cmd at cycle now and return the cycle its effect completes"""
        kind = cmd.kind
        if kind == CommandKind.ACT:
            if cmd.commit:
                s = self.subarray(cmd.subarray)
                self.commit_activation(cmd.row, cmd.subarray, now, back_to_back=s.is_activated)
                return now + self.t(cmd.subarray, 'tRCD')
            return self._activate(cmd.subarray, cmd.row, now)
        if kind == CommandKind.RD:
            return self._column(cmd, now, write=False)
        if kind == CommandKind.WR:
            return self._column(cmd, now, write=True, token=token)
        if kind == CommandKind.PRE:
            return self.precharge(cmd.subarray, now, lip_enabled=False)
        if kind == CommandKind.PRE_LINKED:
            return self.precharge(cmd.subarray, now, lip_enabled=True)
        if kind == CommandKind.RBM:
            if cmd.direction not in (1, -1):
                raise IllegalCommandError(f"RBM direction must be +1 or -1, got {cmd.direction}")
            return self.rbm(cmd.subarray, cmd.subarray + cmd.direction, now)
        raise IllegalCommandError(f"unknown command kind {kind}")

    def _activate(self, sub: int, row: int, now: int) -> int:
        s = self.subarray(sub)
        self._check_row(sub, row)
        if not s.is_idle:
            raise IllegalCommandError(f"ACT requires subarray {sub} precharged, found {s.row_buffer}")
        others = [i for i in self.activated_subarrays() if i != sub]
        if others:
            raise IllegalCommandError(f"ACT on subarray {sub} while subarray {others[0]} is open")
        self._require(now, [('tRP', self.ready_for_activate()), ('tRRD/tFAW', self.window.earliest(now))])
        self._open(s, row, now)
        s.latched_token = self.token_of(row)
        self._log(now, 'ACT', sub, row)
        return now + self.t(sub, 'tRCD')

    def _open(self, s: SubarrayState, row: int, now: int):
        s.open_row = row
        s.act_cycle = now
        s.earliest_col = now + self.t(s.index, 'tRCD')
        s.earliest_pre = now + self.t(s.index, 'tRAS')
        s.latch_ready = now + self.t(s.index, 'tRAS')
        self.window.record(now)

    def _column(self, cmd: Command, now: int, write: bool, token: Optional[Token] = None) -> int:
        sub = cmd.subarray
        s = self.subarray(sub)
        name = 'WR' if write else 'RD'
        if not s.is_activated or (cmd.row is not None and s.open_row != cmd.row):
            raise IllegalCommandError(f"{name} requires row {cmd.row} open in subarray {sub}, found {s.row_buffer}")
        self._require(now, [('tRCD', s.earliest_col), ('tCCD', self.next_col)])
        self.next_col = now + self.t(sub, 'tCCD')
        done = now + self.t(sub, 'tCL') + self.t(sub, 'tBL')
        if write:
            s.earliest_pre = max(s.earliest_pre, done + self.t(sub, 'tWR'))
            if token is not None:
                s.latched_token = token
                s.contents[s.open_row] = token
        else:
            s.earliest_pre = max(s.earliest_pre, now + self.t(sub, 'tRTP'))
        self._log(now, name, sub, s.open_row, cmd.internal)
        return done

    def precharge(self, sub: int, now: int, lip_enabled: bool = False) -> int:
        """Close subarray sub. With LIP, an idle neighbour's precharge units
        are linked in and the latency drops to tRP_linked."""
        s = self.subarray(sub)
        if s.is_idle:
            raise IllegalCommandError(f"PRE on subarray {sub} which is already precharged")
        ready = s.earliest_pre if s.is_activated else s.latch_ready
        self._require(now, [('tRAS/tRTP/tWR', ready)])
        neighbor = self._idle_neighbor(sub) if lip_enabled else None
        if neighbor is not None:
            latency = self.t(sub, 'tRP_linked')
            self.linked_precharges += 1
            self.last_linked_neighbor = neighbor
            kind = 'PRE_LINKED'
        else:
            latency = self.t(sub, 'tRP')
            self.plain_precharges += 1
            kind = 'PRE'
        s.open_row = None
        s.latched_token = None
        s.earliest_act = now + latency
        if self._chain is not None and self._chain[0] == sub:
            self._chain = None
        self._log(now, kind, sub, None)
        return now + latency

    def _idle_neighbor(self, sub: int) -> Optional[int]:
        # lower-indexed neighbour first
        for n in (sub - 1, sub + 1):
            if 0 <= n < len(self.subarrays) and self.subarrays[n].is_idle:
                return n
        return None

    def rbm(self, src: int, dst: int, now: int) -> int:
        """Latch the row buffer of src into the adjacent row buffer dst"""
        if abs(src - dst) != 1:
            raise IllegalCommandError(f"RBM between non-adjacent subarrays {src} and {dst}")
        s = self.subarray(src)
        d = self.subarray(dst)
        if s.latched_token is None:
            raise IllegalCommandError(f"RBM source subarray {src} holds no latched row")
        if not d.is_idle:
            raise IllegalCommandError(f"RBM destination subarray {dst} is not precharged")
        self._require(now, [('tRAS' if s.is_activated else 'tRBM', s.latch_ready), ('tRP', d.earliest_act)])
        chain = self._chain
        if chain is not None and chain[0] == src and now == s.latch_ready:
            start, hops = chain[1], chain[2] + 1
        else:
            start, hops = now, 1
        done = start + ns_to_cycles(hops * self.timing.tRBM, self.timing.tCK)
        d.latched_token = s.latched_token
        d.latch_ready = done
        if not s.is_activated:
            # a forwarded intermediate latch is released by the isolation step
            s.latched_token = None
            s.earliest_act = max(s.earliest_act, done)
        self._chain = (dst, start, hops)
        self._log(now, 'RBM', src, dst - src)
        return done

    def commit_activation(self, dst_row: int, sub: int, now: Optional[int] = None, back_to_back: bool = False):
        """Activate dst_row so the latched row buffer is restored into it.

        back_to_back allows the subarray to be open on another row, which is
        how an intra-subarray copy latches its source into its destination.
        """
        s = self.subarray(sub)
        self._check_row(sub, dst_row)
        if s.latched_token is None:
            raise IllegalCommandError(f"commit on subarray {sub} with no latched row")
        if s.open_row == dst_row:
            s.contents[dst_row] = s.latched_token
            return
        if s.open_row is not None and not back_to_back:
            raise IllegalCommandError(f"commit on subarray {sub} while row {s.open_row} is open")
        if now is not None:
            self._require(now, [('tRBM', s.latch_ready), ('tRRD/tFAW', self.window.earliest(now))])
        s.contents[dst_row] = s.latched_token
        if now is None:
            s.open_row = dst_row
        else:
            self._open(s, dst_row, now)
            self._log(now, 'ACT', sub, dst_row)
        if self._chain is not None and self._chain[0] == sub:
            self._chain = None
