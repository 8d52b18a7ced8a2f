"""
Exception hierarchy shared by the simulator modules
"""

from typing import Optional


class SimulationError(Exception):
    """Base class for every error raised by the simulator"""


class ConfigError(SimulationError, ValueError):
    """Invalid configuration value or unknown configuration key"""


class AddressRangeError(SimulationError, ValueError):
    """Physical address outside the configured memory"""


class IllegalCommandError(SimulationError):
    """DRAM command issued in a state that does not allow it"""


class TimingViolationError(SimulationError):
    """DRAM command issued before its earliest legal cycle"""

    def __init__(self, constraint: str, earliest: int, now: int):
        self.constraint = constraint
        self.earliest = earliest
        self.now = now
        super().__init__(
            f"{constraint} violated: issued at cycle {now}, earliest legal cycle is {earliest}"
        )


class CopyJobError(SimulationError, ValueError):
    """Copy job whose coordinates do not fit its mechanism"""


class QueueFullError(SimulationError):
    """Controller request queue is at capacity"""


class VillaStateError(SimulationError):
    """In-DRAM cache operation requested in an invalid state"""


class TraceParseError(SimulationError, ValueError):
    """Malformed line in a workload trace"""

    def __init__(self, line_no: int, line: str, reason: str, source: Optional[str] = None):
        self.line_no = line_no
        self.line = line
        self.source = source
        where = f"{source}:{line_no}" if source else f"line {line_no}"
        super().__init__(f"{where}: {reason}: {line!r}")


class DegenerateInputError(SimulationError, ValueError):
    """Metric inputs that make the metric undefined"""
