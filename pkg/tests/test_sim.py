import math
from dataclasses import replace

import numpy as np
import pytest

from csmmwave.channel import AngleModel
from csmmwave.geometry import ArrayGeometry
from csmmwave.sim import (
    CoherenceSweep,
    MeasurementPoint,
    MeasurementSweep,
    MEpsilonNotFound,
    RateMode,
    TrainingKind,
    estimate_recovery_probability,
    find_m_epsilon,
    measurement_point,
    reference_config,
    run_trial,
    run_trials,
    splitmix64,
    split_measurements,
    sweep_coherence,
    sweep_measurements,
    trial_seed,
    wilson_interval,
)


def small_config(**overrides):
    cfg = reference_config(n_trials=40, master_seed=11)
    channel = replace(cfg.channel, bs_geometry=ArrayGeometry(16), ms_geometry=ArrayGeometry(8), n_users=3)
    cfg = replace(cfg, channel=channel)
    return replace(cfg, **overrides).with_measurements(48)


def test_split_measurements_reference_points():
    assert split_measurements(300, 64, 32) == (24, 13)
    assert split_measurements(1, 64, 32) == (1, 1)
    assert split_measurements(1, 1, 1000) == (1, 1)
    assert split_measurements(2048, 64, 32) == (64, 32)
    assert split_measurements(140, 64, 32) == (17, 9)
    with pytest.raises(ValueError):
        split_measurements(0, 64, 32)


@pytest.mark.parametrize("m", [1, 2, 3, 7, 50, 99, 300, 777, 4096])
@pytest.mark.parametrize("dims", [(64, 32), (8, 4), (4, 16), (1, 1)])
def test_split_covers_budget_minimally(m, dims):
    m_bs, m_ms = split_measurements(m, *dims)
    assert 1 <= m_bs <= m and m_bs * m_ms >= m
    assert m_bs * (m_ms - 1) < m


def test_splitmix64_reference_output():
    # first output of the reference SplitMix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert trial_seed(5, 0) != trial_seed(5, 1) != trial_seed(6, 0)


def test_run_trial_is_deterministic():
    cfg = small_config()
    a, b = run_trial(cfg, 3), run_trial(cfg, 3)
    assert a == b
    assert a.per_user_rate == b.per_user_rate and a.channels == b.channels
    assert run_trial(cfg, 4).channels != a.channels


def test_interference_only_hurts():
    cfg = reference_config(n_trials=30)
    for t in run_trials(cfg):
        for rate, single in zip(t.per_user_rate, t.per_user_single_rate):
            assert rate <= single + 1e-9


def test_noiseless_exhaustive_training_recovers_everything():
    cfg = reference_config(n_trials=20, training_kind=TrainingKind.EXHAUSTIVE, noiseless_training=True).with_point(
        MeasurementPoint(2048, 64, 32)
    )
    for t in run_trials(cfg):
        assert all(t.per_user_success)
        assert t.per_user_rate == t.per_user_perfect_rate
    rec = estimate_recovery_probability(cfg, 2048, 20)
    assert rec.p_hat == 1.0 and rec.training_symbols == 2048


def test_exhaustive_training_checks_dimensions():
    cfg = reference_config(training_kind=TrainingKind.EXHAUSTIVE)
    with pytest.raises(ValueError, match="exhaustive"):
        run_trial(cfg, 0)


def test_single_measurement_is_chance_level():
    cfg = reference_config(n_trials=3000, master_seed=99)
    rec = estimate_recovery_probability(cfg, 1)
    assert rec.training_symbols == 1
    assert rec.wilson_low <= 1 / 2048 <= rec.wilson_high
    assert rec.p_hat < 0.003


def test_indicator_mode_agrees_with_sinr_mode():
    cfg = small_config()
    ind = replace(cfg, rate_mode=RateMode.INDICATOR)
    for i in range(40):
        a, b = run_trial(cfg, i), run_trial(ind, i)
        assert a.per_user_success == b.per_user_success
        np.testing.assert_allclose(a.per_user_rate, b.per_user_rate, atol=1e-9)
        np.testing.assert_allclose(a.per_user_perfect_rate, b.per_user_perfect_rate, atol=1e-9)


def test_continuous_angles_run_and_indicator_is_rejected():
    cfg = small_config()
    cont = replace(cfg, channel=replace(cfg.channel, angle_model=AngleModel.CONTINUOUS))
    t = run_trial(cont, 0)
    assert len(t.per_user_success) == 3
    assert all(r <= p + 1e-9 for r, p in zip(t.per_user_rate, t.per_user_single_rate))
    with pytest.raises(ValueError):
        replace(cont, rate_mode=RateMode.INDICATOR)


def test_wilson_interval():
    low, high = wilson_interval(0, 10)
    assert low == 0.0 and 0.2 < high < 0.35
    # closed form for 50/100
    z = 1.959963984540054
    centre = (0.5 + z * z / 200) / (1 + z * z / 100)
    half = z / (1 + z * z / 100) * math.sqrt(0.25 / 100 + z * z / 40000)
    assert wilson_interval(50, 100) == pytest.approx((centre - half, centre + half), abs=1e-12)


def test_find_m_epsilon():
    exhaustive = reference_config(n_trials=5, training_kind=TrainingKind.EXHAUSTIVE, noiseless_training=True)
    assert find_m_epsilon(exhaustive.with_point(MeasurementPoint(2048, 64, 32)), 0.01, [2048]).m_eps == 2048
    vacuous = reference_config(n_trials=2000, master_seed=3)
    assert find_m_epsilon(vacuous, 1 - 1e-6, [1]).m_eps == 1
    with pytest.raises(MEpsilonNotFound) as info:
        find_m_epsilon(reference_config(n_trials=20), 0.01, [1, 2])
    assert [m for m, _ in info.value.curve] == [1, 2]
    with pytest.raises(ValueError):
        find_m_epsilon(vacuous, 0.1, [4, 2])


def test_find_m_epsilon_picks_smallest_passing_budget():
    cfg = small_config(n_trials=60)
    result = find_m_epsilon(cfg, 0.2, [2, 8, 24, 64, 128])
    probs = dict((m, r.p_hat) for m, r in result.curve)
    assert probs[result.m_eps] >= 0.8
    assert all(probs[m] < 0.8 for m in probs if m < result.m_eps)
    strict = find_m_epsilon(cfg, 0.2, [2, 8, 24, 64, 128], use_lower_bound=True)
    assert strict.m_eps >= result.m_eps


def _sweep_config(n_users=3, seed=5):
    cfg = small_config(master_seed=seed)
    cfg = replace(cfg, channel=replace(cfg.channel, n_users=n_users))
    pts = tuple(measurement_point(m, 16, 8) for m in (4, 16, 48, 128))
    return replace(cfg, sweep=MeasurementSweep(pts))


def test_sweep_reproducible_and_thread_independent():
    cfg = _sweep_config()
    a = sweep_measurements(cfg)
    b = sweep_measurements(cfg, threads=2)
    assert a.rows == b.rows and a.metadata == b.metadata


def test_sweep_rows_and_bound_dominance():
    table = sweep_measurements(_sweep_config())
    assert [r.training_symbols for r in table.rows] == [p.total for p in _sweep_config().sweep.points]
    for row in table.rows:
        assert row.mean_rate >= row.lower_bound - 2 * row.stderr
        assert row.mean_rate <= row.perfect_csi_rate + 1e-9
        assert row.p_wilson_low <= row.p_hat <= row.p_wilson_high
        assert row.mean_sum_rate == pytest.approx(row.n_users * row.mean_rate, rel=1e-12)


def test_training_overhead_independent_of_users():
    counts = {u: sweep_measurements(_sweep_config(n_users=u)).metadata["training_symbols"] for u in (1, 2, 3)}
    assert counts[1] == counts[2] == counts[3]


def test_recovery_probability_monotone_in_budget():
    table = sweep_measurements(replace(_sweep_config(), n_trials=80))
    for lo, hi in zip(table.rows, table.rows[1:]):
        # Wilson intervals must overlap whenever the point estimate drops
        if hi.p_hat < lo.p_hat:
            assert hi.p_wilson_high >= lo.p_wilson_low


def test_coherence_sweep_limits():
    base = _sweep_config()
    pts = base.sweep.points
    lengths = (float(pts[2].total), math.inf, 1000.0)
    table = sweep_coherence(replace(base, sweep=CoherenceSweep(lengths, pts, 0.2)))
    assert len(table.rows) == 3 * len(pts)
    by_lc = {}
    for row in table.rows:
        by_lc.setdefault(row.coherence_length, []).append(row)
    assert by_lc[float(pts[2].total)][2].effective_rate == 0.0
    for row in by_lc[math.inf]:
        assert row.effective_rate == row.mean_rate
    for rows in by_lc.values():
        assert sum(r.is_argmax for r in rows) == 1
        best = max(rows, key=lambda r: r.effective_rate)
        assert best.is_argmax
    assert len(table.metadata["bound_at_m_eps"]) == 3 or table.metadata["m_eps_training_symbols"] is None


def test_sweep_requires_matching_config():
    with pytest.raises(ValueError):
        sweep_coherence(_sweep_config())


def test_rate_non_decreasing_in_budget():
    pts = tuple(measurement_point(m, 64, 32) for m in (16, 64, 140, 300, 512))
    table = sweep_measurements(reference_config(n_trials=150, master_seed=21, sweep=MeasurementSweep(pts)))
    for lo, hi in zip(table.rows, table.rows[1:]):
        assert hi.mean_rate >= lo.mean_rate - 2 * math.hypot(lo.stderr, hi.stderr)
    assert table.rows[-1].mean_rate >= 0.9 * table.rows[-1].perfect_csi_rate


def test_noiseless_recovery_at_512_measurements(record_property):
    cfg = reference_config(n_trials=2000, master_seed=512, noiseless_training=True)
    rec = estimate_recovery_probability(cfg, 512)
    record_property("p_hat", rec.p_hat)
    assert rec.training_symbols == 512
    # random combiners occasionally alias neighbouring AoAs even without noise (7999/8000 here)
    assert rec.p_hat >= 0.999


def test_reference_m_epsilon_is_in_the_low_hundreds(record_property):
    cfg = reference_config(n_trials=300, master_seed=5)
    result = find_m_epsilon(cfg, 0.05, [32, 64, 96, 128, 160, 200, 240, 300, 400])
    record_property("m_eps", result.m_eps)
    assert 64 < result.m_eps <= 300


def test_requantized_precoder_keeps_phase_levels():
    cfg = replace(small_config(requantize_precoder=True), n_trials=10)
    plain = small_config()
    for i in range(10):
        q, p = run_trial(cfg, i), run_trial(plain, i)
        assert q.per_user_success == p.per_user_success
        assert all(r <= s + 1e-9 for r, s in zip(q.per_user_rate, q.per_user_single_rate))
