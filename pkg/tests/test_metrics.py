import math
import random
import statistics

import pytest
from hypothesis import given, strategies as st

from crsim.metrics import (
    PeriodLedger,
    PowerProfile,
    aggregate_rounds,
    energy_mj_per_frame,
    energy_per_su_per_frame,
    record_interval,
)

TABLE1 = PowerProfile(trans_power=1980, idle_power=990, circuit_power=210, switch_power=1000)
S = 1_000_000


def test_record_interval_accumulates():
    ledger = PeriodLedger()
    record_interval(ledger, 1, "transmit", 50_000)
    record_interval(ledger, 1, "idle", 50_000)
    assert ledger[1].trans_s == 0.05 and ledger[1].idle_s == 0.05


def test_preempted_transmit_truncates():
    ledger = PeriodLedger()
    start, planned, preempt = 1_000_000, 50_000, 1_020_000
    record_interval(ledger, 4, "transmit", min(planned, preempt - start))
    assert ledger[4].trans_s == 0.02


def test_zero_duration_is_noop_and_negative_rejected():
    ledger = PeriodLedger()
    record_interval(ledger, 1, "idle", 0)
    assert len(ledger) == 0
    with pytest.raises(ValueError):
        record_interval(ledger, 1, "idle", -1)
    with pytest.raises(ValueError):
        record_interval(ledger, 1, "sleeping", 5)


def test_close_books_remainder_as_idle():
    ledger = PeriodLedger()
    ledger.arrive(1, 100_000)
    record_interval(ledger, 1, "transmit", 300_000)
    record_interval(ledger, 1, "switching", 500)
    ledger.close(10 * S)
    p = ledger[1]
    assert p.presence == 10 * S - 100_000
    assert p.transmit + p.idle + p.switching == p.presence


def test_close_detects_overbooking():
    ledger = PeriodLedger()
    ledger.arrive(1, 0)
    record_interval(ledger, 1, "transmit", 2 * S)
    with pytest.raises(ValueError):
        ledger.close(S)


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_closed_form_energy():
    # (3600*990 + 3600*210) * 0.1 / 3600
    assert _rel(energy_mj_per_frame(0, 3600, 0, TABLE1, 0.1, 3600), 120.0) < 1e-9
    assert _rel(energy_mj_per_frame(0, 0, 0, TABLE1, 0.1, 3600), 21.0) < 1e-9
    # (0.2*1980 + 0.8*990 + 210) * 0.1
    assert _rel(energy_mj_per_frame(720, 2880, 0, TABLE1, 0.1, 3600), 139.8) < 1e-9


def test_energy_from_ledger():
    ledger = PeriodLedger()
    ledger.arrive(1, 0)
    record_interval(ledger, 1, "transmit", 720 * S)
    ledger.close(3600 * S)
    assert _rel(energy_per_su_per_frame(ledger, 1, TABLE1, 0.1, 3600), 139.8) < 1e-9


def test_literal_reading_multiplies_by_circuit_power():
    value = energy_mj_per_frame(0, 3600, 0, TABLE1, 0.1, 3600, literal_eq1=True)
    assert _rel(value, 3600 * 990 * 210 * 0.1 / 3600) < 1e-12


def test_energy_rejects_nonpositive_sim_time():
    with pytest.raises(ValueError):
        energy_mj_per_frame(1, 1, 1, TABLE1, 0.1, 0)


@given(
    t=st.floats(0, 3600), i=st.floats(0, 3600), s=st.floats(0, 3600),
    which=st.sampled_from(["t", "i", "s"]), bump=st.floats(0, 100),
)
def test_energy_monotone(t, i, s, which, bump):
    base = energy_mj_per_frame(t, i, s, TABLE1, 0.1, 3600)
    args = {"t": t, "i": i, "s": s}
    args[which] += bump
    assert energy_mj_per_frame(args["t"], args["i"], args["s"], TABLE1, 0.1, 3600) >= base


def test_aggregate_rounds_reference_values():
    mean, half = aggregate_rounds([1, 2, 3])
    assert mean == 2.0
    assert half == pytest.approx(4.302652729696142 / math.sqrt(3), rel=1e-12)
    assert round(half, 3) == 2.484
    assert aggregate_rounds([5, 5, 5, 5]) == (5.0, 0.0)
    with pytest.raises(ValueError):
        aggregate_rounds([1.0])


def test_ci_coverage_is_about_95_percent():
    rng = random.Random(11)
    trials, hits = 10_000, 0
    for _ in range(trials):
        xs = [rng.gauss(3.0, 2.0) for _ in range(8)]
        mean, half = aggregate_rounds(xs)
        hits += abs(mean - 3.0) <= half
    assert abs(hits / trials - 0.95) <= 0.02


def test_power_profile_rejects_negative():
    with pytest.raises(ValueError):
        PowerProfile(idle_power=-1)
    assert statistics.fmean([TABLE1.trans_power, TABLE1.idle_power]) == 1485
