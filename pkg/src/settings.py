"""
Simulator configuration: dataclasses for every config-file section and the
INI loader that fills them.
"""

import configparser
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from config import CONTROLLER_CONFIG, DDR3_1600_TIMING, DEFAULT_MAPPING_ORDER, VILLA_CONFIG
from src.dram.dram_model import AddressMapping, DramConfig, EnergyParams, Geometry, TimingParams
from src.dram.errors import ConfigError

logger = logging.getLogger(__name__)

FILL_MECHANISMS = ('LisaRisc', 'RowCloneInterSA')
PAGE_POLICIES = ('open', 'closed')


@dataclass(frozen=True)
class VillaSettings:
    epoch_length: int = VILLA_CONFIG['epoch_length']
    counters_per_bank: int = VILLA_CONFIG['counters_per_bank']
    counter_bits: int = VILLA_CONFIG['counter_bits']
    hot_set_size: int = VILLA_CONFIG['hot_set_size']
    benefit_bits: int = VILLA_CONFIG['benefit_bits']
    fast_subarrays: Tuple[int, ...] = tuple(VILLA_CONFIG['fast_subarrays'])
    fast_timing_scale: float = VILLA_CONFIG['fast_timing_scale']
    fill_mechanism: str = VILLA_CONFIG['fill_mechanism']

    def __post_init__(self):
        for name in ('epoch_length', 'counters_per_bank', 'counter_bits', 'hot_set_size', 'benefit_bits'):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"villa.{name} must be a positive integer, got {value!r}")
        if self.counter_bits > 8 or self.benefit_bits > 8:
            raise ConfigError("villa counter widths above 8 bits are not supported")
        if not 0 < self.fast_timing_scale <= 1:
            raise ConfigError(f"villa.fast_timing_scale must be in (0, 1], got {self.fast_timing_scale}")
        if self.fill_mechanism not in FILL_MECHANISMS:
            raise ConfigError(f"villa.fill_mechanism must be one of {FILL_MECHANISMS}, got {self.fill_mechanism!r}")
        if not self.fast_subarrays:
            raise ConfigError("villa.fast_subarrays must name at least one subarray")


@dataclass(frozen=True)
class ControllerSettings:
    queue_capacity: int = CONTROLLER_CONFIG['queue_capacity']
    page_policy: str = CONTROLLER_CONFIG['page_policy']
    command_trace: str = CONTROLLER_CONFIG['command_trace']

    def __post_init__(self):
        if not isinstance(self.queue_capacity, int) or self.queue_capacity < 1:
            raise ConfigError(f"controller.queue_capacity must be a positive integer, got {self.queue_capacity!r}")
        if self.page_policy not in PAGE_POLICIES:
            raise ConfigError(f"controller.page_policy must be one of {PAGE_POLICIES}, got {self.page_policy!r}")


@dataclass(frozen=True)
class SimConfig:
    dram: DramConfig = field(default_factory=DramConfig)
    villa: VillaSettings = field(default_factory=VillaSettings)
    controller: ControllerSettings = field(default_factory=ControllerSettings)

    def __post_init__(self):
        n = self.dram.geometry.subarrays_per_bank
        for index in self.villa.fast_subarrays:
            if not 0 <= index < n:
                raise ConfigError(f"villa.fast_subarrays index {index} outside 0..{n - 1}")

    @property
    def fast_timing(self) -> TimingParams:
        return self.dram.timing.scaled(self.villa.fast_timing_scale)


SECTIONS = {
    'geometry': Geometry,
    'timing': TimingParams,
    'energy': EnergyParams,
    'villa': VillaSettings,
    'controller': ControllerSettings,
}


def _convert(section: str, key: str, raw: str, target: Any) -> Any:
    try:
        if target == 'int':
            return int(raw)
        if target == 'float':
            return float(raw)
        if target == 'indices':
            return tuple(int(part) for part in raw.split(',') if part.strip())
        return raw.strip()
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {target}")


def _field_kinds(cls) -> Dict[str, str]:
    kinds = {}
    for f in fields(cls):
        default = f.default
        if isinstance(default, bool) or isinstance(default, str):
            kinds[f.name] = 'str'
        elif isinstance(default, tuple):
            kinds[f.name] = 'indices'
        elif isinstance(default, int):
            kinds[f.name] = 'int'
        else:
            kinds[f.name] = 'float'
    return kinds


def _read_section(parser: configparser.ConfigParser, section: str) -> Dict[str, Any]:
    if not parser.has_section(section):
        return {}
    kinds = _field_kinds(SECTIONS[section])
    values = {}
    for key, raw in parser.items(section):
        if key not in kinds:
            raise ConfigError(f"unknown key {section}.{key}")
        values[key] = _convert(section, key, raw, kinds[key])
    return values


def load_config(path: Optional[Union[str, Path]] = None) -> SimConfig:
    """Load a config file on top of the built-in DDR3-1600 defaults"""
    if path is None:
        return SimConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")

    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as e:
        raise ConfigError(f"{path}: {e}")

    allowed = set(SECTIONS) | {'mapping'}
    for section in parser.sections():
        if section not in allowed:
            raise ConfigError(f"unknown section [{section}] in {path}")

    geometry = Geometry(**_read_section(parser, 'geometry'))

    timing_values = _read_section(parser, 'timing')
    if 'tRP' in timing_values and 'tRP_linked' not in timing_values:
        timing_values['tRP_linked'] = None
    timing = TimingParams(**{**DDR3_1600_TIMING, **timing_values})

    energy = EnergyParams(**_read_section(parser, 'energy'))

    order = DEFAULT_MAPPING_ORDER
    if parser.has_section('mapping'):
        for key, raw in parser.items('mapping'):
            if key != 'order':
                raise ConfigError(f"unknown key mapping.{key}")
            order = [part.strip() for part in raw.split(',')]
    mapping = AddressMapping.from_order(order, geometry)

    cfg = SimConfig(
        dram=DramConfig(geometry=geometry, timing=timing, energy=energy, mapping=mapping),
        villa=VillaSettings(**_read_section(parser, 'villa')),
        controller=ControllerSettings(**_read_section(parser, 'controller')),
    )
    logger.info(f"Loaded configuration from {path}")
    return cfg
