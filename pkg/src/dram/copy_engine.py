"""
Bulk copy mechanisms: closed-form latency/energy and the command macros that
execute the same copies on the bank state machine.

Mechanisms:
    MemcpyChannel    - read every line over the channel, then write it back
    RowCloneIntraSA  - back-to-back activations inside one subarray
    RowClonePSMBank  - pipelined line transfers between two banks
    RowCloneInterSA  - two PSM passes through a scratch row in another bank
    LisaRisc         - activate, move the row buffer hop by hop, commit
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set

import pandas as pd

from config import DDR4_2400_CHANNEL_GBPS
from src.dram.bank_engine import BankKey, BankState, ChannelBus, Command, CommandKind
from src.dram.dram_model import (
    Coordinates,
    DramConfig,
    EnergyParams,
    Geometry,
    TimingParams,
    hops_between,
    ns_to_cycles,
)
from src.dram.errors import CopyJobError

logger = logging.getLogger(__name__)


class CopyMechanism(str, Enum):
    MEMCPY_CHANNEL = 'MemcpyChannel'
    ROWCLONE_INTRA_SA = 'RowCloneIntraSA'
    ROWCLONE_PSM_BANK = 'RowClonePSMBank'
    ROWCLONE_INTER_SA = 'RowCloneInterSA'
    LISA_RISC = 'LisaRisc'


ROW_GRANULARITY = {
    CopyMechanism.ROWCLONE_INTRA_SA,
    CopyMechanism.ROWCLONE_PSM_BANK,
    CopyMechanism.ROWCLONE_INTER_SA,
    CopyMechanism.LISA_RISC,
}

ENERGY_COUNT_KEYS = ['ACT', 'PRE', 'RD', 'WR', 'IO', 'RBM']


@dataclass(frozen=True)
class CopyJob:
    mechanism: CopyMechanism
    src: Coordinates
    dst: Coordinates
    bytes: int = 8192
    issue_cycle: int = 0

    @property
    def hops(self) -> int:
        return hops_between(self.src.subarray, self.dst.subarray)

    def lines(self, g: Geometry) -> int:
        return self.bytes // g.cacheline_bytes

    @property
    def effective_mechanism(self) -> CopyMechanism:
        """A zero-hop LISA-RISC copy is an intra-subarray RowClone"""
        if self.mechanism == CopyMechanism.LISA_RISC and self.hops == 0:
            return CopyMechanism.ROWCLONE_INTRA_SA
        return self.mechanism


def validate_job(job: CopyJob, g: Geometry):
    """Raise CopyJobError unless the job fits its mechanism"""
    src, dst, mech = job.src, job.dst, job.mechanism
    if job.bytes <= 0 or job.bytes % g.cacheline_bytes:
        raise CopyJobError(f"copy size {job.bytes} is not a positive multiple of {g.cacheline_bytes}")
    if src.channel != dst.channel:
        raise CopyJobError("copies across channels are not supported")
    lines = job.lines(g)
    if mech in ROW_GRANULARITY:
        if job.bytes != g.row_bytes:
            raise CopyJobError(f"{mech.value} copies whole rows ({g.row_bytes} bytes), got {job.bytes}")
        if src.bank_key == dst.bank_key and src.row == dst.row:
            raise CopyJobError(f"{mech.value} source and destination are the same row")
        if src.rank != dst.rank:
            raise CopyJobError(f"{mech.value} cannot copy across ranks")
    elif src.column + lines > g.columns_per_row or dst.column + lines > g.columns_per_row:
        raise CopyJobError(f"{job.bytes} bytes from column {src.column} run past the end of the row")
    if mech == CopyMechanism.LISA_RISC and src.bank_key != dst.bank_key:
        raise CopyJobError("LisaRisc requires source and destination in the same bank")
    if mech == CopyMechanism.ROWCLONE_INTRA_SA and (
        src.bank_key != dst.bank_key or src.subarray != dst.subarray
    ):
        raise CopyJobError("RowCloneIntraSA requires source and destination in the same subarray")
    if mech == CopyMechanism.ROWCLONE_PSM_BANK and src.bank_key == dst.bank_key:
        raise CopyJobError("RowClonePSMBank requires source and destination in different banks")
    if mech == CopyMechanism.ROWCLONE_INTER_SA:
        scratch = g.scratch_row()
        if src.row == scratch or dst.row == scratch:
            raise CopyJobError(f"row {scratch} is reserved as the RowClone scratch row")
        _scratch_bank(job, g)


def _scratch_bank(job: CopyJob, g: Geometry) -> int:
    used = {job.src.bank, job.dst.bank}
    for bank in range(g.banks_per_rank):
        if bank not in used:
            return bank
    raise CopyJobError("RowCloneInterSA needs a bank other than the source and destination banks")


# -- closed-form latency ----------------------------------------------------

def _memcpy_ns(n: int, t: TimingParams) -> float:
    rd_last = t.tRCD + (n - 1) * t.tCCD
    pre_src = max(t.tRAS, rd_last + t.tRTP)
    act_dst = pre_src + t.tRP
    wr_last = act_dst + t.tRCD + (n - 1) * t.tCCD
    pre_dst = max(act_dst + t.tRAS, wr_last + t.tCL + t.tBL + t.tWR)
    return pre_dst + t.tRP


def _psm_schedule(n: int, t: TimingParams) -> Dict[str, float]:
    first = t.tRRD + t.tRCD
    last = first + (n - 1) * t.tCCD
    pre_src = max(t.tRAS, last + t.tRTP)
    pre_dst = max(t.tRRD + t.tRAS, last + t.tCL + t.tBL + t.tWR)
    return {
        'first': first,
        'pre_src': pre_src,
        'pre_dst': pre_dst,
        'total': max(pre_src, pre_dst) + t.tRP,
    }


def copy_latency_ns(job: CopyJob, t: TimingParams, g: Geometry) -> float:
    """Closed-form copy latency in ns"""
    validate_job(job, g)
    mech = job.effective_mechanism
    n = job.lines(g)
    if mech == CopyMechanism.LISA_RISC:
        return t.risc_base_ns + job.hops * t.tRBM
    if mech == CopyMechanism.ROWCLONE_INTRA_SA:
        return 2 * t.tRAS + t.tRP
    if mech == CopyMechanism.MEMCPY_CHANNEL:
        return _memcpy_ns(n, t)
    if mech == CopyMechanism.ROWCLONE_PSM_BANK:
        return _psm_schedule(n, t)['total']
    return 2 * _psm_schedule(n, t)['total']


# -- command macros -----------------------------------------------------------

def _cmd(kind: CommandKind, at: Coordinates, offset: float, **kwargs) -> Command:
    return Command(kind=kind, subarray=at.subarray, row=at.row, bank_key=at.bank_key, offset_ns=offset, **kwargs)


def _psm_pass(src: Coordinates, dst: Coordinates, n: int, t: TimingParams, start: float) -> List[Command]:
    plan = _psm_schedule(n, t)
    cmds = [
        _cmd(CommandKind.ACT, src, start),
        _cmd(CommandKind.ACT, dst, start + t.tRRD),
    ]
    for i in range(n):
        at = start + plan['first'] + i * t.tCCD
        cmds.append(_cmd(CommandKind.RD, src, at, column=src.column + i, internal=True))
        cmds.append(_cmd(CommandKind.WR, dst, at, column=dst.column + i, internal=True, carries_data=True))
    cmds.append(_cmd(CommandKind.PRE, src, start + plan['pre_src']))
    cmds.append(_cmd(CommandKind.PRE, dst, start + plan['pre_dst']))
    return cmds


def emit_macro(job: CopyJob, cfg: DramConfig) -> List[Command]:
    """Ordered primitive commands that perform job"""
    g, t = cfg.geometry, cfg.timing
    validate_job(job, g)
    src, dst = job.src, job.dst
    mech = job.effective_mechanism
    n = job.lines(g)

    if mech == CopyMechanism.LISA_RISC:
        hops = job.hops
        direction = 1 if dst.subarray > src.subarray else -1
        cmds = [_cmd(CommandKind.ACT, src, 0.0)]
        for k in range(hops):
            cmds.append(Command(
                kind=CommandKind.RBM,
                subarray=src.subarray + k * direction,
                direction=direction,
                bank_key=src.bank_key,
                offset_ns=t.tRAS + k * t.tRBM,
            ))
        commit_at = t.tRAS + hops * t.tRBM
        cmds.append(_cmd(CommandKind.ACT, dst, commit_at, commit=True))
        close_at = commit_at + t.tRAS + t.t_commit
        cmds.append(_cmd(CommandKind.PRE, src, close_at))
        cmds.append(_cmd(CommandKind.PRE, dst, close_at))
        return cmds

    if mech == CopyMechanism.ROWCLONE_INTRA_SA:
        return [
            _cmd(CommandKind.ACT, src, 0.0),
            _cmd(CommandKind.ACT, dst, t.tRAS, commit=True),
            _cmd(CommandKind.PRE, dst, 2 * t.tRAS),
        ]

    if mech == CopyMechanism.MEMCPY_CHANNEL:
        rd_last = t.tRCD + (n - 1) * t.tCCD
        pre_src = max(t.tRAS, rd_last + t.tRTP)
        act_dst = pre_src + t.tRP
        wr_last = act_dst + t.tRCD + (n - 1) * t.tCCD
        pre_dst = max(act_dst + t.tRAS, wr_last + t.tCL + t.tBL + t.tWR)
        cmds = [_cmd(CommandKind.ACT, src, 0.0)]
        cmds += [_cmd(CommandKind.RD, src, t.tRCD + i * t.tCCD, column=src.column + i) for i in range(n)]
        cmds.append(_cmd(CommandKind.PRE, src, pre_src))
        cmds.append(_cmd(CommandKind.ACT, dst, act_dst))
        cmds += [
            _cmd(CommandKind.WR, dst, act_dst + t.tRCD + i * t.tCCD, column=dst.column + i, carries_data=True)
            for i in range(n)
        ]
        cmds.append(_cmd(CommandKind.PRE, dst, pre_dst))
        return cmds

    if mech == CopyMechanism.ROWCLONE_PSM_BANK:
        return _psm_pass(src, dst, n, t, 0.0)

    scratch_row = g.scratch_row()
    scratch = Coordinates(src.channel, src.rank, _scratch_bank(job, g), g.subarray_of(scratch_row), scratch_row, 0)
    first = _psm_pass(src, scratch, n, t, 0.0)
    second = _psm_pass(scratch, dst, n, t, _psm_schedule(n, t)['total'])
    return first + second


def command_counts(job: CopyJob, cfg: DramConfig) -> Dict[str, int]:
    """Per-kind command counts of the job's macro, plus channel I/O lines"""
    counts = dict.fromkeys(ENERGY_COUNT_KEYS, 0)
    for cmd in emit_macro(job, cfg):
        if cmd.kind == CommandKind.ACT:
            counts['ACT'] += 1
        elif cmd.kind in (CommandKind.PRE, CommandKind.PRE_LINKED):
            counts['PRE'] += 1
        elif cmd.kind == CommandKind.RBM:
            counts['RBM'] += 1
        else:
            counts[cmd.kind.value] += 1
            if not cmd.internal:
                counts['IO'] += 1
    return counts


def energy_from_counts(counts: Dict[str, int], e: EnergyParams) -> float:
    return (
        counts.get('ACT', 0) * e.e_act
        + counts.get('PRE', 0) * e.e_pre
        + counts.get('RD', 0) * e.e_rd
        + counts.get('WR', 0) * e.e_wr
        + counts.get('IO', 0) * e.e_io_per_line
        + counts.get('RBM', 0) * e.e_rbm_per_hop
    )


def copy_energy_uj(job: CopyJob, e: EnergyParams, cfg: Optional[DramConfig] = None) -> float:
    """DRAM energy of a copy in microjoules: its macro's commands plus the
    standby energy of every bank it holds"""
    cfg = cfg or DramConfig(energy=e)
    hold_uj = e.p_bank_hold_mw * bank_hold_ns(job, cfg) * 1e-6
    return energy_from_counts(command_counts(job, cfg), e) + hold_uj


def blocked_banks(job: CopyJob, g: Geometry) -> Set[BankKey]:
    """Banks held busy for the whole copy"""
    if job.mechanism == CopyMechanism.ROWCLONE_INTER_SA:
        return {(job.src.channel, job.src.rank, b) for b in range(g.banks_per_rank)}
    return {job.src.bank_key, job.dst.bank_key}


def bank_hold_ns(job: CopyJob, cfg: DramConfig) -> float:
    """Bank-nanoseconds the copy keeps banks unavailable"""
    g = cfg.geometry
    return len(blocked_banks(job, g)) * copy_latency_ns(job, cfg.timing, g)


def execute_macro(
    commands: Iterable[Command],
    banks: Dict[BankKey, BankState],
    start: int,
    cfg: DramConfig,
    bus: Optional[ChannelBus] = None,
) -> int:
    """Issue a macro on the banks starting at cycle start.

    Each command goes out at its planned offset, or later if a bank or the
    channel is not ready. Returns the completion cycle of the whole macro.
    """
    cyc = cfg.cycles()
    tCK = cfg.timing.tCK
    data = None
    done = start
    for cmd in commands:
        bank = banks[cmd.bank_key]
        at = start + ns_to_cycles(cmd.offset_ns, tCK)
        uses_bus = bus is not None and cmd.kind in (CommandKind.RD, CommandKind.WR) and not cmd.internal
        while True:
            at = bank.earliest_issue(cmd, at)
            if not uses_bus:
                break
            moved = bus.earliest(at, cyc['tCL'], cyc['tBL'])
            if moved == at:
                break
            at = moved
        completion = bank.issue(cmd, at, token=data if cmd.carries_data else None)
        if uses_bus:
            bus.reserve(at + cyc['tCL'], cyc['tBL'])
        if cmd.kind == CommandKind.RD:
            data = bank.subarrays[cmd.subarray].latched_token
        done = max(done, completion)
    return done


def effective_bandwidth(row_bytes: int, transfer_ns: float) -> float:
    """Bandwidth in GB/s of moving row_bytes in transfer_ns"""
    if row_bytes <= 0 or transfer_ns <= 0:
        raise ValueError(f"row_bytes and transfer_ns must be positive, got {row_bytes}, {transfer_ns}")
    return row_bytes / transfer_ns


def rbm_bandwidth_ratio(cfg: DramConfig, channel_gbps: float = DDR4_2400_CHANNEL_GBPS) -> float:
    return effective_bandwidth(cfg.geometry.row_bytes, cfg.timing.rbm_row_transfer_ns) / channel_gbps


def reference_job(mechanism: CopyMechanism, cfg: DramConfig, hops: int = 1) -> CopyJob:
    """A one-row copy placed so that it exercises mechanism"""
    g = cfg.geometry
    rps = g.rows_per_subarray

    def at(bank: int, row: int) -> Coordinates:
        return Coordinates(0, 0, bank, g.subarray_of(row), row, 0)

    if mechanism == CopyMechanism.LISA_RISC:
        return CopyJob(mechanism, at(0, 0), at(0, hops * rps if hops else 1), g.row_bytes)
    if mechanism == CopyMechanism.ROWCLONE_INTRA_SA:
        return CopyJob(mechanism, at(0, 0), at(0, 1), g.row_bytes)
    if mechanism == CopyMechanism.ROWCLONE_INTER_SA:
        return CopyJob(mechanism, at(0, 0), at(0, rps), g.row_bytes)
    other_bank = 1 if g.banks_per_rank > 1 else 0
    return CopyJob(mechanism, at(0, 0), at(other_bank, 0 if other_bank else 1), g.row_bytes)


def cost_table(cfg: DramConfig, all_hops: bool = False) -> pd.DataFrame:
    """Latency and energy of one-row copies for every mechanism"""
    max_hops = cfg.geometry.subarrays_per_bank - 1
    plan = [
        (CopyMechanism.MEMCPY_CHANNEL, 0),
        (CopyMechanism.ROWCLONE_INTER_SA, 0),
        (CopyMechanism.ROWCLONE_PSM_BANK, 0),
        (CopyMechanism.ROWCLONE_INTRA_SA, 0),
    ]
    if all_hops:
        plan += [(CopyMechanism.LISA_RISC, h) for h in range(max_hops + 1)]
    else:
        plan += [(CopyMechanism.LISA_RISC, h) for h in sorted({min(h, max_hops) for h in (1, 7, 15)})]

    rows = []
    for mechanism, hops in plan:
        job = reference_job(mechanism, cfg, hops)
        rows.append({
            'mechanism': mechanism.value,
            'hops': hops,
            'latency_ns': round(copy_latency_ns(job, cfg.timing, cfg.geometry), 2),
            'energy_uJ': round(copy_energy_uj(job, cfg.energy, cfg), 2),
        })
    return pd.DataFrame(rows, columns=['mechanism', 'hops', 'latency_ns', 'energy_uJ'])
