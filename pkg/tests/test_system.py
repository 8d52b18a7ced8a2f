import importlib.util

import pandas as pd
import pytest

from app.runner import RunPlan, Workload, costs_report, run, run_workload, solo_ipcs
from app.simulator import System
from config import DEFAULT_ENERGY, PROJECT_ROOT
from src.controller.mem_controller import FeatureFlags
from src.cpu.cpu_model import parse_trace
from src.cpu.workload import generate_copy_workload
from src.dram.dram_model import DramConfig, Geometry, row_address
from src.dram.errors import ConfigError, SimulationError, TraceParseError
from src.settings import SimConfig, VillaSettings
from src.utils.fit_energy import fit_energy
from tests.conftest import SMALL_GEOMETRY

SMALL_INI = """\
[geometry]
banks_per_rank = 4
subarrays_per_bank = 4
rows_per_subarray = 16
"""


def load_cli():
    spec = importlib.util.spec_from_file_location('lisa_cli', PROJECT_ROOT / 'app.py')
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


@pytest.fixture
def small_ini(tmp_path):
    path = tmp_path / 'small.ini'
    path.write_text(SMALL_INI)
    return path


def simulate(cfg, features, workload):
    ipc_alone = solo_ipcs(cfg, workload.traces)
    return run_workload(cfg, FeatureFlags.parse(features), workload, ipc_alone)


@pytest.fixture(scope='module')
def copy_heavy():
    cfg = SimConfig(dram=DramConfig(geometry=Geometry(**SMALL_GEOMETRY)))
    traces = generate_copy_workload(seed=21, cores=2, length=400, copy_fraction=0.2, cfg=cfg.dram)
    return cfg, Workload('copy-heavy', traces)


def test_risc_beats_baseline_on_copy_heavy_work(copy_heavy):
    cfg, workload = copy_heavy
    baseline = simulate(cfg, 'baseline', workload)
    risc = simulate(cfg, 'risc', workload)
    assert risc.weighted_speedup > baseline.weighted_speedup
    assert risc.total_energy_uj < baseline.total_energy_uj
    assert 'LisaRisc' in risc.copies
    assert set(baseline.copies) == {'MemcpyChannel'}


def test_solo_ipcs_come_from_the_baseline_system(copy_heavy):
    cfg, workload = copy_heavy
    ipcs = solo_ipcs(cfg, workload.traces)
    for ipc, trace in zip(ipcs, workload.traces):
        alone = System(cfg, FeatureFlags(), [trace]).run()
        assert ipc == alone.cores[0].ipc


def test_slow_cache_fills_cost_more_than_they_save():
    g = Geometry(**SMALL_GEOMETRY)
    slow_fills = SimConfig(
        dram=DramConfig(geometry=g),
        villa=VillaSettings(fill_mechanism='RowCloneInterSA', epoch_length=200),
    )
    traces = generate_copy_workload(seed=8, cores=2, length=400, copy_fraction=0.05, cfg=slow_fills.dram)
    workload = Workload('hot', traces)
    risc = simulate(slow_fills, 'risc', workload)
    villa = simulate(slow_fills, 'risc,villa', workload)
    assert villa.fill_copies > 0
    assert villa.weighted_speedup < risc.weighted_speedup


def test_channels_are_simulated_independently():
    cfg = SimConfig(dram=DramConfig(geometry=Geometry(**{**SMALL_GEOMETRY, 'channels': 2})))
    a = row_address(cfg.dram, 0, 20, channel=0)
    b = row_address(cfg.dram, 0, 20, channel=1)
    system = System(cfg, FeatureFlags(), [parse_trace(f"0 R {a:#x}"), parse_trace(f"0 R {b:#x}")])
    stats = system.run()
    assert len(system.controllers) == 2
    assert [core.finish_cycle for core in system.cores] == [27, 27]
    assert stats.read_latencies == [26, 26]


def test_system_rejects_cross_channel_copies_up_front():
    cfg = SimConfig(dram=DramConfig(geometry=Geometry(**{**SMALL_GEOMETRY, 'channels': 2})))
    a = row_address(cfg.dram, 0, 20, channel=0)
    b = row_address(cfg.dram, 0, 40, channel=1)
    traces = [parse_trace(f"0 R {b:#x}"), parse_trace(f"0 R {a:#x}\n4 C {a:#x} {b:#x} {cfg.dram.geometry.row_bytes}")]
    with pytest.raises(TraceParseError, match='core 1:2: copy crosses'):
        System(cfg, FeatureFlags.parse('risc'), traces)


def test_unfinished_run_raises(copy_heavy):
    cfg, workload = copy_heavy
    with pytest.raises(SimulationError, match='did not finish'):
        System(cfg, FeatureFlags(), workload.traces).run(max_cycles=50)


def test_sweep_writes_reports_per_combination(tmp_path, small_ini):
    plan = RunPlan(
        config_path=small_ini,
        gen_seeds=[1],
        feature_sets=['baseline', 'risc', 'risc,villa', 'risc,villa,lip'],
        out_dir=tmp_path / 'reports',
        generator={'cores': 2, 'length': 150},
    )
    written = run(plan)
    names = sorted(p.name for p in written)
    assert len(names) == 9
    assert 'seed1__risc+villa+lip.txt' in names
    summary = pd.read_csv(tmp_path / 'reports' / 'summary.csv')
    assert summary['features'].tolist() == ['baseline', 'risc', 'risc,villa', 'risc,villa,lip']
    assert summary.loc[0, 'ws_vs_baseline'] == 1.0


def test_reports_are_reproducible(tmp_path, small_ini):
    outputs = []
    for name in ('first', 'second'):
        plan = RunPlan(
            config_path=small_ini,
            gen_seeds=[4],
            feature_sets=['risc,villa,lip'],
            out_dir=tmp_path / name,
            report_format='csv',
            generator={'cores': 2, 'length': 150},
        )
        run(plan)
        outputs.append((tmp_path / name / 'seed4__risc+villa+lip.csv').read_bytes())
    assert outputs[0] == outputs[1]


def test_run_plan_validation():
    with pytest.raises(ConfigError, match='--trace'):
        RunPlan().validate()
    with pytest.raises(ConfigError, match='format'):
        RunPlan(gen_seeds=[1], report_format='json').validate()


def test_costs_report():
    text = costs_report(SimConfig(), bandwidth=True)
    lines = text.splitlines()
    assert lines[0] == 'mechanism,hops,latency_ns,energy_uJ'
    assert 'LisaRisc,1,148.5,0.09' in lines
    assert 'RowCloneIntraSA,0,83.75,0.06' in lines
    assert lines[-1].startswith('# rbm_bandwidth_ratio,')


def test_cli_costs_and_errors(capsys, tmp_path):
    cli = load_cli()
    assert cli.main(['costs', '--all-hops']) == 0
    out = capsys.readouterr().out
    assert out.count('LisaRisc') == 16
    assert cli.main(['costs', '--config', str(tmp_path / 'missing.ini')]) == 1
    assert cli.main(['simulate', '--out', str(tmp_path)]) == 1


def test_cli_gen_writes_one_trace_per_core(tmp_path, small_ini):
    cli = load_cli()
    out = tmp_path / 'traces'
    assert cli.main(['gen', '--config', str(small_ini), '--cores', '3', '--length', '20', '--out', str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ['core0.trace', 'core1.trace', 'core2.trace']


def test_cli_simulates_trace_files(tmp_path, small_ini):
    cli = load_cli()
    trace = tmp_path / 'core0.trace'
    trace.write_text("2 R 0x0\n0 W 0x40\n")
    out = tmp_path / 'reports'
    args = ['simulate', '--config', str(small_ini), '--trace', str(trace), '--features', 'risc', '--out', str(out)]
    assert cli.main(args) == 0
    assert (out / 'traces__risc.csv').exists()
    assert (out / 'summary.csv').exists()


def test_fitted_energies_match_the_shipped_profile():
    params, residuals = fit_energy()
    for name, value in DEFAULT_ENERGY.items():
        assert getattr(params, name) == pytest.approx(value, abs=1e-6)
    assert residuals['residual_uJ'].abs().max() <= 0.01
    assert len(residuals) == 7



SWEEP = ('baseline', 'risc', 'risc,villa', 'risc,villa,lip')
SWEEP_SEEDS = range(10)


@pytest.fixture(scope='module')
def four_core_sweep():
    """Weighted speedup and energy per seed and feature set on four cores"""
    cfg = SimConfig(
        dram=DramConfig(geometry=Geometry(**SMALL_GEOMETRY)),
        villa=VillaSettings(epoch_length=1000),
    )
    rows = []
    for seed in SWEEP_SEEDS:
        traces = generate_copy_workload(seed=seed, cores=4, length=400, copy_fraction=0.1, cfg=cfg.dram)
        workload = Workload(f"seed{seed}", traces)
        ipc_alone = solo_ipcs(cfg, traces)
        for features in SWEEP:
            stats = run_workload(cfg, FeatureFlags.parse(features), workload, ipc_alone)
            rows.append({
                'seed': seed,
                'features': features,
                'ws': stats.weighted_speedup,
                'energy': stats.total_energy_uj,
                'fills': stats.fill_copies,
                'cycles': stats.cycles,
            })
    return pd.DataFrame(rows)


def test_risc_wins_on_every_seed(four_core_sweep):
    ws = four_core_sweep.pivot(index='seed', columns='features', values='ws')
    energy = four_core_sweep.pivot(index='seed', columns='features', values='energy')
    assert len(ws) == len(SWEEP_SEEDS)
    assert (ws['risc'] > ws['baseline']).all()
    assert (energy['risc'] < energy['baseline']).all()


def test_villa_and_lip_add_speedup_on_average(four_core_sweep):
    # runs span many epochs, so the cache is actually filled
    assert (four_core_sweep['cycles'] > 4 * 1000).all()
    assert (four_core_sweep.loc[four_core_sweep['features'] == 'risc,villa', 'fills'] > 0).all()
    mean_ws = four_core_sweep.groupby('features')['ws'].mean()
    assert mean_ws['risc,villa'] >= mean_ws['risc']
    assert mean_ws['risc,villa,lip'] >= mean_ws['risc,villa']


@pytest.mark.parametrize('features', SWEEP)
def test_no_core_runs_faster_shared_than_alone(features):
    cfg = SimConfig(
        dram=DramConfig(geometry=Geometry(**SMALL_GEOMETRY)),
        villa=VillaSettings(epoch_length=1000),
    )
    flags = FeatureFlags.parse(features)
    for seed in (3, 11):
        traces = generate_copy_workload(seed=seed, cores=4, length=300, copy_fraction=0.1, cfg=cfg.dram)
        shared = System(cfg, flags, traces).run()
        for trace, core in zip(traces, shared.cores):
            alone = System(cfg, flags, [trace]).run()
            assert alone.cores[0].ipc >= core.ipc
