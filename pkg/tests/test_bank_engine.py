import random

import pytest

from src.dram.bank_engine import (
    ActivationWindow,
    BankState,
    ChannelBus,
    Command,
    CommandKind,
    initial_token,
)
from src.dram.dram_model import Geometry, TimingParams
from src.dram.errors import IllegalCommandError, TimingViolationError


@pytest.fixture
def bank():
    return BankState(TimingParams(), Geometry(), command_log=[])


def act(sub, row):
    return Command(CommandKind.ACT, sub, row)


def test_activate_opens_row_and_returns_trcd(bank):
    assert bank.issue(act(0, 3), 0) == 11
    assert bank.subarrays[0].row_buffer == ('Activated', 3)
    assert bank.open_row() == 3


def test_read_before_trcd_is_a_timing_violation(bank):
    bank.issue(act(0, 3), 0)
    with pytest.raises(TimingViolationError) as err:
        bank.issue(Command(CommandKind.RD, 0, 3), 10)
    assert err.value.constraint == 'tRCD'
    assert err.value.earliest == 11


def test_read_completes_after_cas_and_burst(bank):
    bank.issue(act(0, 3), 0)
    assert bank.issue(Command(CommandKind.RD, 0, 3), 11) == 11 + 11 + 4


def test_back_to_back_reads_respect_tccd(bank):
    bank.issue(act(0, 3), 0)
    bank.issue(Command(CommandKind.RD, 0, 3, column=0), 11)
    assert bank.earliest_issue(Command(CommandKind.RD, 0, 3, column=1), 12) == 15
    with pytest.raises(TimingViolationError):
        bank.issue(Command(CommandKind.RD, 0, 3, column=1), 13)


def test_read_on_wrong_row_is_illegal(bank):
    bank.issue(act(0, 3), 0)
    with pytest.raises(IllegalCommandError):
        bank.issue(Command(CommandKind.RD, 0, 4), 20)


def test_precharge_before_tras_is_a_timing_violation(bank):
    bank.issue(act(0, 3), 0)
    with pytest.raises(TimingViolationError):
        bank.issue(Command(CommandKind.PRE, 0), 27)
    assert bank.issue(Command(CommandKind.PRE, 0), 28) == 28 + 11
    assert bank.subarrays[0].row_buffer == 'Precharged'


def test_activate_after_precharge_waits_trp(bank):
    bank.issue(act(0, 3), 0)
    bank.issue(Command(CommandKind.PRE, 0), 28)
    assert bank.earliest_issue(act(0, 5), 30) == 39
    with pytest.raises(TimingViolationError):
        bank.issue(act(0, 5), 38)


def test_write_delays_precharge_by_write_recovery(bank):
    bank.issue(act(0, 3), 0)
    bank.issue(Command(CommandKind.WR, 0, 3), 11, token='data')
    assert bank.earliest_issue(Command(CommandKind.PRE, 0), 0) == 11 + 11 + 4 + 12
    assert bank.token_of(3) == 'data'


def test_only_one_subarray_open_for_demand_activates(bank):
    bank.issue(act(0, 3), 0)
    with pytest.raises(IllegalCommandError, match='open'):
        bank.issue(act(1, 600), 10)


def test_activate_requires_precharged_subarray(bank):
    bank.issue(act(0, 3), 0)
    with pytest.raises(IllegalCommandError):
        bank.issue(act(0, 4), 40)


def test_row_must_belong_to_subarray(bank):
    with pytest.raises(IllegalCommandError, match='not in subarray'):
        bank.issue(act(1, 3), 0)


def test_precharge_of_idle_subarray_is_illegal(bank):
    with pytest.raises(IllegalCommandError):
        bank.precharge(0, 0)


def test_linked_precharge_uses_idle_neighbour(bank):
    bank.issue(act(3, 3 * 512), 0)
    done = bank.precharge(3, 28, lip_enabled=True)
    assert done == 28 + 4
    assert bank.last_linked_neighbor == 2
    assert bank.linked_precharges == 1
    assert bank.command_log[-1].kind == 'PRE_LINKED'


def test_linked_precharge_without_idle_neighbour_falls_back(bank):
    # subarray 0's only neighbour holds a latched row
    bank.issue(act(0, 0), 0)
    bank.rbm(0, 1, 28)
    assert bank.precharge(0, 40, lip_enabled=True) == 40 + 11
    assert bank.plain_precharges == 1


def test_lower_neighbour_is_preferred(bank):
    bank.issue(act(5, 5 * 512), 0)
    bank.precharge(5, 28, lip_enabled=True)
    assert bank.last_linked_neighbor == 4


def test_rbm_moves_latched_token(bank):
    bank.issue(act(0, 7), 0)
    done = bank.rbm(0, 1, 28)
    assert done == 28 + 7
    assert bank.subarrays[1].latched_token == initial_token(bank.bank_key, 7)
    assert bank.subarrays[1].open_row is None


def test_rbm_before_tras_is_a_timing_violation(bank):
    bank.issue(act(0, 7), 0)
    with pytest.raises(TimingViolationError):
        bank.rbm(0, 1, 20)


def test_rbm_requires_adjacent_precharged_destination(bank):
    bank.issue(act(0, 7), 0)
    with pytest.raises(IllegalCommandError, match='non-adjacent'):
        bank.rbm(0, 2, 28)


def test_rbm_chain_is_timed_from_its_start(bank):
    bank.issue(act(0, 7), 0)
    assert bank.rbm(0, 1, 28) == 35
    assert bank.rbm(1, 2, 35) == 41
    assert bank.rbm(2, 3, 41) == 28 + 20
    # forwarded latches are released
    assert bank.subarrays[1].latched_token is None
    assert bank.subarrays[3].latched_token == initial_token(bank.bank_key, 7)


def test_commit_activation_restores_latched_row(bank):
    bank.issue(act(0, 7), 0)
    bank.rbm(0, 1, 28)
    bank.commit_activation(512 + 9, 1, 35)
    assert bank.token_of(512 + 9) == initial_token(bank.bank_key, 7)
    assert bank.subarrays[1].row_buffer == ('Activated', 521)


def test_commit_activation_is_idempotent_on_open_row(bank):
    bank.issue(act(0, 7), 0)
    bank.commit_activation(7, 0, 28)
    assert bank.subarrays[0].row_buffer == ('Activated', 7)


def test_back_to_back_commit_copies_within_subarray(bank):
    bank.issue(act(0, 7), 0)
    bank.commit_activation(8, 0, 28, back_to_back=True)
    assert bank.token_of(8) == initial_token(bank.bank_key, 7)
    assert bank.open_row() == 8


def test_commit_without_latch_is_illegal(bank):
    with pytest.raises(IllegalCommandError, match='no latched row'):
        bank.commit_activation(520, 1, 0)


def test_activation_window_enforces_trrd_and_tfaw():
    window = ActivationWindow(tRRD=5, tFAW=24)
    for t in (0, 5, 10, 15):
        assert window.is_legal(t)
        window.record(t)
    assert not window.is_legal(20)
    assert window.earliest(20) == 24
    assert not window.is_legal(17)


def test_activation_window_prune_keeps_recent():
    window = ActivationWindow(tRRD=5, tFAW=24)
    window.record(0)
    window.record(100)
    window.prune(110)
    assert not window.is_legal(103)
    assert window.is_legal(2)


def test_channel_bus_occupancy():
    bus = ChannelBus()
    bus.reserve(22, 4)
    assert not bus.is_free(24, 4)
    assert bus.is_free(26, 4)
    assert bus.earliest(10, 11, 4) == 15
    assert bus.busy_cycles == 4
    bus.prune(30)
    assert bus.is_free(22, 4)


def test_command_log_records_issued_commands(bank):
    bank.issue(act(0, 3), 0)
    bank.issue(Command(CommandKind.RD, 0, 3), 11)
    assert [r.format() for r in bank.command_log] == ['0 0 ACT 0 3', '11 0 RD 0 3']


def test_activate_in_another_subarray_waits_for_bank_precharge(bank):
    bank.issue(act(0, 3), 0)
    bank.issue(Command(CommandKind.PRE, 0), 28)
    assert bank.earliest_issue(act(1, 600), 30) == 39
    with pytest.raises(TimingViolationError):
        bank.issue(act(1, 600), 35)


@pytest.mark.parametrize('hops', range(1, 16))
def test_rbm_chain_of_any_length(bank, hops):
    bank.issue(act(0, 7), 0)
    now = 28
    for sub in range(hops):
        now = bank.rbm(sub, sub + 1, now)
    # each hop costs tRBM = 8 ns, rounded up once over the whole chain
    assert now == 28 + (32 * hops + 4) // 5
    assert bank.subarrays[hops].latched_token == initial_token(bank.bank_key, 7)
    assert all(bank.subarrays[sub].latched_token is None for sub in range(1, hops))
    bank.commit_activation(hops * 512 + 3, hops, now)
    assert bank.token_of(hops * 512 + 3) == initial_token(bank.bank_key, 7)


TINY = Geometry(subarrays_per_bank=4, rows_per_subarray=8)


def random_command(bank, rng, now, lip=False, write_token=None):
    """Issue one random legal command; steps are far enough apart that timing always allows it"""
    subs = bank.subarrays
    options = []
    if not bank.activated_subarrays():
        options += [('act', i) for i, s in enumerate(subs) if s.is_idle]
    for i, s in enumerate(subs):
        if s.latched_token is not None:
            options += [('rbm', i, n) for n in (i - 1, i + 1) if 0 <= n < len(subs) and subs[n].is_idle]
            if not s.is_activated:
                options.append(('commit', i))
        if not s.is_idle:
            options.append(('pre', i))
        if s.is_activated and write_token is not None:
            options.append(('wr', i))
    op = rng.choice(options)
    rows = TINY.rows_per_subarray
    if op[0] == 'act':
        bank.issue(act(op[1], op[1] * rows + rng.randrange(rows)), now)
    elif op[0] == 'rbm':
        bank.rbm(op[1], op[2], now)
    elif op[0] == 'commit':
        row = op[1] * rows + rng.randrange(rows)
        latched = subs[op[1]].latched_token
        bank.commit_activation(row, op[1], now)
        assert bank.token_of(row) == latched
    elif op[0] == 'pre':
        bank.precharge(op[1], now, lip_enabled=lip)
    else:
        bank.issue(Command(CommandKind.WR, op[1], subs[op[1]].open_row), now, token=write_token)
    return op[0]


def snapshot(bank):
    rows = [bank.token_of(row) for row in range(TINY.rows_per_bank)]
    return rows, [s.latched_token for s in bank.subarrays]


@pytest.mark.parametrize('seed', range(5))
def test_random_commands_never_invent_data(seed):
    bank = BankState(TimingParams(), TINY)
    rng = random.Random(seed)
    known = {initial_token(bank.bank_key, row) for row in range(TINY.rows_per_bank)}
    kinds = set()
    for step in range(2000):
        kinds.add(random_command(bank, rng, 100 * step))
        rows, latched = snapshot(bank)
        assert set(rows) <= known
        assert {t for t in latched if t is not None} <= known
    assert kinds == {'act', 'rbm', 'commit', 'pre'}


@pytest.mark.parametrize('seed', range(5))
def test_linked_precharge_never_changes_data(seed):
    histories = []
    for lip in (False, True):
        bank = BankState(TimingParams(), TINY)
        rng = random.Random(seed)
        history = []
        for step in range(1000):
            random_command(bank, rng, 100 * step, lip=lip, write_token=('wr', step))
            history.append(snapshot(bank))
        histories.append(history)
        if lip:
            assert bank.linked_precharges > 0
    assert histories[0] == histories[1]
