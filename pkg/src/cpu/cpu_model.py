"""
Trace-driven in-order cores.

Trace grammar, one event per line:

    <bubbles> R <hexaddr>
    <bubbles> W <hexaddr>
    <bubbles> C <hexsrc> <hexdst> <bytes>

A core retires one instruction per cycle. The bubbles of an event retire
first, then its memory operation is sent to the controller. Reads and copies
block the core until they complete; writes retire as soon as the controller
accepts them.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Union

from src.controller.mem_controller import MemRequest, RequestKind
from src.dram.dram_model import DramConfig, decode_address
from src.dram.errors import AddressRangeError, TraceParseError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TraceEvent:
    bubbles: int
    kind: RequestKind
    address: int
    dst_address: Optional[int] = None
    size: int = 0

    def format(self) -> str:
        if self.kind == RequestKind.COPY:
            return f"{self.bubbles} C {self.address:#x} {self.dst_address:#x} {self.size}"
        return f"{self.bubbles} {self.kind.value} {self.address:#x}"

    @property
    def instructions(self) -> int:
        return self.bubbles + 1


def _parse_hex(token: str) -> int:
    return int(token, 16)


def parse_line(line: str, line_no: int, source: Optional[str] = None, cacheline_bytes: int = 64) -> TraceEvent:
    parts = line.split()
    if len(parts) < 3:
        raise TraceParseError(line_no, line, "expected '<bubbles> <op> <address> ...'", source)
    try:
        bubbles = int(parts[0])
    except ValueError:
        raise TraceParseError(line_no, line, "bubble count is not an integer", source)
    if bubbles < 0:
        raise TraceParseError(line_no, line, "bubble count is negative", source)

    op = parts[1]
    try:
        if op in ('R', 'W'):
            if len(parts) != 3:
                raise TraceParseError(line_no, line, f"{op} takes exactly one address", source)
            return TraceEvent(bubbles, RequestKind(op), _parse_hex(parts[2]))
        if op == 'C':
            if len(parts) != 5:
                raise TraceParseError(line_no, line, "C takes a source, a destination and a byte count", source)
            size = int(parts[4])
            if size <= 0 or size % cacheline_bytes:
                raise TraceParseError(line_no, line, f"copy size must be a positive multiple of {cacheline_bytes}", source)
            return TraceEvent(bubbles, RequestKind.COPY, _parse_hex(parts[2]), _parse_hex(parts[3]), size)
    except ValueError as e:
        if isinstance(e, TraceParseError):
            raise
        raise TraceParseError(line_no, line, "malformed number", source)
    raise TraceParseError(line_no, line, f"unknown operation {op!r}", source)


def check_event(event: TraceEvent, dram: DramConfig, line_no: int, line: str, source: Optional[str] = None):
    """Reject addresses outside the memory and copies between two channels"""
    try:
        src = decode_address(event.address, dram)
        dst = decode_address(event.dst_address, dram) if event.kind == RequestKind.COPY else src
    except AddressRangeError as e:
        raise TraceParseError(line_no, line, str(e), source)
    if src.channel != dst.channel:
        raise TraceParseError(line_no, line, f"copy crosses from channel {src.channel} to channel {dst.channel}", source)


def parse_trace(
    lines: Union[str, Iterable[str]],
    source: Optional[str] = None,
    cacheline_bytes: int = 64,
    dram: Optional[DramConfig] = None,
) -> List[TraceEvent]:
    """Parse trace text into events. Blank lines and '#' comments are skipped.
    With dram, every address is also checked against that memory."""
    if isinstance(lines, str):
        lines = lines.splitlines()
    events = []
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        event = parse_line(line, line_no, source, cacheline_bytes)
        if dram is not None:
            check_event(event, dram, line_no, line, source)
        events.append(event)
    return events


def load_trace(path: Union[str, Path], cacheline_bytes: int = 64, dram: Optional[DramConfig] = None) -> List[TraceEvent]:
    path = Path(path)
    with open(path, 'r', encoding='utf-8') as f:
        events = parse_trace(f, source=str(path), cacheline_bytes=cacheline_bytes, dram=dram)
    logger.info(f"Loaded {len(events)} trace events from {path}")
    return events


def serialize_trace(events: Iterable[TraceEvent]) -> str:
    return ''.join(event.format() + '\n' for event in events)


def write_trace(events: Iterable[TraceEvent], path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        f.write(serialize_trace(events))


@dataclass
class Core:
    core_id: int
    trace: List[TraceEvent]
    cursor: int = 0
    bubbles_left: Optional[int] = None
    retired: int = 0
    cycles: int = 0
    outstanding: Optional[MemRequest] = None
    stall_cycles: int = 0
    finish_cycle: Optional[int] = None
    requests: List[MemRequest] = field(default_factory=list)

    @property
    def finished(self) -> bool:
        return self.finish_cycle is not None

    @property
    def ipc(self) -> float:
        return self.retired / self.cycles if self.cycles else 0.0

    def current(self) -> Optional[TraceEvent]:
        return self.trace[self.cursor] if self.cursor < len(self.trace) else None


def _request_for(event: TraceEvent, core_id: int, now: int) -> MemRequest:
    return MemRequest(
        kind=event.kind,
        address=event.address,
        core_id=core_id,
        arrival_cycle=now,
        dst_address=event.dst_address,
        size=event.size,
    )


def _advance(core: Core, now: int):
    core.cursor += 1
    core.bubbles_left = None
    if core.cursor >= len(core.trace):
        core.finish_cycle = now + 1
        core.cycles = core.finish_cycle


def step_core(core: Core, now: int) -> Optional[MemRequest]:
    """Run core for cycle now; returns a request the caller must enqueue.

    The caller reports the outcome through accept_request/reject_request.
    """
    if core.finished:
        return None

    if core.outstanding is not None:
        if core.outstanding.is_done(now):
            core.outstanding = None
            core.retired += 1
            _advance(core, now)
        else:
            core.stall_cycles += 1
        return None

    event = core.current()
    if event is None:
        core.finish_cycle = core.cycles = now
        return None
    if core.bubbles_left is None:
        core.bubbles_left = event.bubbles
    if core.bubbles_left > 0:
        core.bubbles_left -= 1
        core.retired += 1
        return None
    return _request_for(event, core.core_id, now)


def accept_request(core: Core, req: MemRequest, now: int):
    """The controller took req at cycle now"""
    core.requests.append(req)
    if req.kind == RequestKind.WRITE:
        core.retired += 1
        _advance(core, now)
    elif req.is_done(now):
        core.retired += 1
        _advance(core, now)
    else:
        core.outstanding = req


def reject_request(core: Core):
    """Back-pressure: the memory op is retried next cycle"""
    core.stall_cycles += 1
