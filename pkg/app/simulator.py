"""
Multi-core system loop: cores feed one memory controller per channel, and
both advance together one cycle at a time.
"""

import logging
from collections import defaultdict
from typing import Dict, List, Optional

from src.analysis.metrics import CoreStats, RunStats
from src.controller.mem_controller import FeatureFlags, MemoryController, MemRequest
from src.cpu.cpu_model import Core, TraceEvent, accept_request, check_event, reject_request, step_core
from src.dram.dram_model import decode_address
from src.dram.errors import QueueFullError, SimulationError
from src.settings import SimConfig

logger = logging.getLogger(__name__)


class System:
    """Cores plus the memory system they share"""

    def __init__(
        self,
        cfg: SimConfig,
        features: FeatureFlags,
        traces: List[List[TraceEvent]],
        record_commands: bool = False,
    ):
        self.cfg = cfg
        self.features = features
        self.controllers = [
            MemoryController(cfg, features, channel, record_commands)
            for channel in range(cfg.dram.geometry.channels)
        ]
        for core_id, trace in enumerate(traces):
            for index, event in enumerate(trace, start=1):
                check_event(event, cfg.dram, index, event.format(), f"core {core_id}")
        self.cores = [Core(core_id, list(trace)) for core_id, trace in enumerate(traces)]
        self.clock = 0

    def controller_for(self, req: MemRequest) -> MemoryController:
        return self.controllers[decode_address(req.address, self.cfg.dram).channel]

    @property
    def finished(self) -> bool:
        return all(core.finished for core in self.cores)

    def step(self):
        now = self.clock
        for core in self.cores:
            req = step_core(core, now)
            if req is None:
                continue
            try:
                self.controller_for(req).enqueue(req, now)
            except QueueFullError:
                reject_request(core)
            else:
                accept_request(core, req, now)
        for controller in self.controllers:
            controller.tick()
        self.clock += 1

    def _fast_forward(self):
        """Skip cycles in which no core or controller can do anything but wait"""
        if not all(controller.is_idle() for controller in self.controllers):
            return
        now = self.clock
        horizon = []
        for core in self.cores:
            if core.finished:
                continue
            if core.outstanding is not None:
                if core.outstanding.completion_cycle is None:
                    return
                horizon.append(core.outstanding.completion_cycle)
                continue
            event = core.current()
            if event is None:
                return
            left = core.bubbles_left if core.bubbles_left is not None else event.bubbles
            horizon.append(now + left)
        if not horizon:
            return
        target = min(horizon)
        delta = target - now
        if delta <= 0:
            return

        for core in self.cores:
            if core.finished:
                continue
            if core.outstanding is not None:
                core.stall_cycles += delta
            else:
                if core.bubbles_left is None:
                    core.bubbles_left = core.current().bubbles
                core.bubbles_left -= delta
                core.retired += delta
        for controller in self.controllers:
            controller.advance_to(target)
        self.clock = target

    def run(self, max_cycles: Optional[int] = None) -> RunStats:
        while not self.finished:
            if max_cycles is not None and self.clock >= max_cycles:
                raise SimulationError(f"run did not finish within {max_cycles} cycles")
            self._fast_forward()
            self.step()
        return self.collect_stats()

    def collect_stats(self, workload: str = '') -> RunStats:
        copies: Dict[str, Dict[str, float]] = {}
        counts: Dict[str, int] = defaultdict(int)
        latencies: List[int] = []
        busy: Dict[int, float] = {}
        villa = defaultdict(float)
        lip = defaultdict(int)
        fill_copies, fill_energy, bus_cycles = 0, 0.0, 0
        cycles = max(self.clock, 1)

        for controller in self.controllers:
            stats = controller.stats
            for mechanism, entry in stats.copies.items():
                total = copies.setdefault(mechanism, dict.fromkeys(entry, 0))
                for key, value in entry.items():
                    total[key] += value
            for kind, count in stats.command_counts.items():
                counts[kind] += count
            latencies.extend(stats.read_latencies)
            for key, bank in controller.banks.items():
                busy[bank.bank_id] = stats.bank_busy_cycles.get(key, 0) / cycles
            if self.features.villa:
                for key, value in controller.villa_stats().items():
                    villa[key] += value
            for key, value in controller.lip_stats().items():
                lip[key] += value
            fill_copies += stats.fill_copies
            fill_energy += stats.fill_energy_uj
            bus_cycles += controller.bus.busy_cycles

        if villa:
            looked_up = villa['hits'] + villa['misses']
            villa['hit_rate'] = villa['hits'] / looked_up if looked_up else 0.0

        return RunStats(
            workload=workload,
            features=self.features.label,
            cycles=self.clock,
            cores=[CoreStats(c.core_id, c.retired, c.cycles, c.stall_cycles) for c in self.cores],
            copies=copies,
            command_counts=dict(counts),
            energy=self.cfg.dram.energy,
            villa=dict(villa),
            lip=dict(lip),
            read_latencies=latencies,
            channel_utilization=bus_cycles / (cycles * len(self.controllers)),
            bank_busy_fraction=busy,
            fill_copies=fill_copies,
            fill_energy_uj=fill_energy,
        )

    def command_trace(self) -> List[str]:
        lines = []
        for controller in self.controllers:
            lines.extend(controller.command_trace())
        return lines
