import pytest

from config import DEFAULT_CONFIG_FILE
from src.dram.errors import ConfigError
from src.settings import ControllerSettings, SimConfig, VillaSettings, load_config


def write_ini(tmp_path, text):
    path = tmp_path / 'sim.ini'
    path.write_text(text)
    return path


def test_no_file_gives_defaults():
    cfg = load_config(None)
    assert cfg == SimConfig()
    assert cfg.dram.timing.tRP_linked == 5.0


def test_shipped_config_matches_defaults():
    assert load_config(DEFAULT_CONFIG_FILE) == SimConfig()


def test_overrides_are_applied(tmp_path):
    cfg = load_config(write_ini(tmp_path, "[timing]\ntRBM = 10\n[villa]\nfast_subarrays = 0, 15\n"))
    assert cfg.dram.timing.tRBM == 10.0
    assert cfg.villa.fast_subarrays == (0, 15)


def test_overriding_trp_derives_linked_precharge(tmp_path):
    cfg = load_config(write_ini(tmp_path, "[timing]\ntRP = 26\n"))
    assert cfg.dram.timing.tRP_linked == pytest.approx(10.0)


def test_explicit_linked_precharge_wins(tmp_path):
    cfg = load_config(write_ini(tmp_path, "[timing]\ntRP = 26\ntRP_linked = 6\n"))
    assert cfg.dram.timing.tRP_linked == 6.0


def test_unknown_key_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match='timing.tXYZ'):
        load_config(write_ini(tmp_path, "[timing]\ntXYZ = 1\n"))


def test_unknown_section_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match='refresh'):
        load_config(write_ini(tmp_path, "[refresh]\ntREFI = 7800\n"))


def test_malformed_number_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match='geometry.banks_per_rank'):
        load_config(write_ini(tmp_path, "[geometry]\nbanks_per_rank = eight\n"))


def test_missing_file_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match='not found'):
        load_config(tmp_path / 'missing.ini')


def test_mapping_order_from_file(tmp_path):
    cfg = load_config(write_ini(tmp_path, "[mapping]\norder = row, bank, rank, channel, column, offset\n"))
    assert [name for name, _ in cfg.dram.mapping.fields][:3] == ['row', 'bank', 'rank']


def test_villa_settings_validation():
    with pytest.raises(ConfigError, match='fill_mechanism'):
        VillaSettings(fill_mechanism='Memcpy')
    with pytest.raises(ConfigError, match='fast_timing_scale'):
        VillaSettings(fast_timing_scale=1.5)


def test_fast_subarray_index_must_exist():
    with pytest.raises(ConfigError, match='fast_subarrays'):
        SimConfig(villa=VillaSettings(fast_subarrays=(16,)))


def test_controller_settings_validation():
    with pytest.raises(ConfigError, match='page_policy'):
        ControllerSettings(page_policy='adaptive')
    with pytest.raises(ConfigError, match='queue_capacity'):
        ControllerSettings(queue_capacity=0)


def test_fast_timing_is_scaled():
    cfg = SimConfig()
    assert cfg.fast_timing.tRCD < cfg.dram.timing.tRCD
    assert cfg.fast_timing.tCL == cfg.dram.timing.tCL
