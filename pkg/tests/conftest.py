import pytest

from src.controller.mem_controller import FeatureFlags, MemoryController
from src.dram.dram_model import DramConfig, Geometry
from src.settings import SimConfig, VillaSettings

SMALL_GEOMETRY = dict(
    channels=1,
    ranks_per_channel=1,
    banks_per_rank=4,
    subarrays_per_bank=4,
    rows_per_subarray=16,
    columns_per_row=128,
    cacheline_bytes=64,
    row_bytes=8192,
)


@pytest.fixture
def dram_cfg():
    return DramConfig()


@pytest.fixture
def small_dram_cfg():
    return DramConfig(geometry=Geometry(**SMALL_GEOMETRY))


@pytest.fixture
def sim_cfg():
    return SimConfig()


@pytest.fixture
def small_sim_cfg(small_dram_cfg):
    return SimConfig(dram=small_dram_cfg)


@pytest.fixture
def make_controller(small_sim_cfg):
    """Controller factory on the small geometry"""
    def factory(features='baseline', cfg=None, **villa):
        cfg = cfg or small_sim_cfg
        if villa:
            cfg = SimConfig(dram=cfg.dram, villa=VillaSettings(**villa), controller=cfg.controller)
        return MemoryController(cfg, FeatureFlags.parse(features), record_commands=True)
    return factory
