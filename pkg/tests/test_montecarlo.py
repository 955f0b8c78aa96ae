import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError
from scipy import integrate

from smallcell.lib.errors import DomainError
from smallcell.lib.network_model import (
    PowerMode,
    Scenario,
    convert_units,
    min_transmit_power,
    received_power_outage,
    user_count_pmf,
    void_probability,
)
from smallcell.lib.config import ValidationTolerances
from smallcell.lib.rate_analysis import avg_rate, outage, user_rate
from smallcell.simulation.montecarlo import (
    Boundary,
    PointPattern,
    SimConfig,
    empirical_user_count_pmf,
    estimate_cell_and_user_rate,
    estimate_outage,
    estimate_received_power_outage,
    estimate_sinr_rate,
    estimate_void_fraction,
    sample_network,
    sample_patterns,
    sinr,
    summarize,
    write_pattern_csv,
)

LAMBDA = convert_units(370.0, "per_km2", "per_m2")
SMALL = SimConfig(target_bs_count=600, n_realizations=120, seed=11)


@pytest.fixture(scope="module")
def patterns_mu_one():
    return sample_patterns(LAMBDA, LAMBDA, SMALL)


def test_window_must_hold_enough_bs():
    with pytest.raises(DomainError):
        SimConfig(window_side=100.0).side_for(LAMBDA)
    side = SMALL.side_for(LAMBDA)
    assert LAMBDA * side * side == pytest.approx(600.0)


def test_guard_boundary_needs_width():
    with pytest.raises(ValidationError):
        SimConfig(boundary=Boundary.GUARD)
    guarded = SimConfig(boundary=Boundary.GUARD, guard_width=200.0, target_bs_count=600)
    assert guarded.side_for(LAMBDA) == pytest.approx(SMALL.side_for(LAMBDA) + 400.0)


def test_realizations_are_reproducible():
    first = sample_network(LAMBDA, LAMBDA, SMALL, index=3)
    again = sample_network(LAMBDA, LAMBDA, SMALL, index=3)
    other = sample_network(LAMBDA, LAMBDA, SMALL, index=4)
    assert np.array_equal(first.bs_positions, again.bs_positions)
    assert np.array_equal(first.association, again.association)
    assert not np.array_equal(first.bs_positions[:10], other.bs_positions[:10])


def test_worker_count_does_not_change_realizations():
    config = SMALL.model_copy(update={"n_realizations": 3})
    serial = sample_patterns(LAMBDA, LAMBDA, config)
    pooled = sample_patterns(LAMBDA, LAMBDA, config.model_copy(update={"workers": 2}))
    for a, b in zip(serial, pooled):
        assert np.array_equal(a.user_positions, b.user_positions)
        assert np.array_equal(a.association, b.association)


def test_association_is_nearest_bs_on_torus():
    pattern = sample_network(LAMBDA, LAMBDA, SMALL, index=0)
    brute = np.argmin(pattern.distances(pattern.user_positions[:200]), axis=1)
    assert np.array_equal(brute, pattern.association[:200])


def test_no_users_leaves_every_cell_void(params):
    config = SMALL.model_copy(update={"n_realizations": 4})
    patterns = sample_patterns(LAMBDA, 0.0, config, PowerMode.ON_OFF)
    assert all(len(p.association) == 0 for p in patterns)
    assert not patterns[0].active_mask.any()
    void = estimate_void_fraction(patterns)
    assert void.mean == 1.0 and void.half_width_95 == 0.0
    cell, user = estimate_cell_and_user_rate(patterns, PowerMode.ON_OFF, params)
    assert cell.mean == 0.0 and user.mean == 0.0


def test_summarize_statistics():
    out = summarize([1.0, 2.0, 3.0, 4.0])
    assert out.mean == 2.5
    assert out.half_width_95 == pytest.approx(3.182446305284263 * math.sqrt(5.0 / 3.0 / 4.0), rel=1e-9)
    assert summarize([7.0]).half_width_95 == math.inf
    with pytest.raises(DomainError):
        summarize([])


def test_sinr_arithmetic():
    assert sinr(2.0, np.array([0.5, 0.5]), 1.0) == pytest.approx(1.0)
    assert sinr(3.0, np.array([]), 1.5) == pytest.approx(2.0)


def test_void_fraction_matches_closed_form(patterns_mu_one):
    est = estimate_void_fraction(patterns_mu_one)
    assert abs(est.mean - void_probability(1.0)) <= est.half_width_95 + 0.02


def test_user_count_pmf_matches_fit(patterns_mu_one):
    empirical = empirical_user_count_pmf(patterns_mu_one, 6)
    for n in range(7):
        assert abs(empirical[n] - user_count_pmf(n, 1.0)) < 0.02


def test_typical_user_rate_matches_analytic(patterns_mu_one, params, fast_quad):
    est = estimate_sinr_rate(patterns_mu_one, PowerMode.ALL_ON, params)
    analytic = avg_rate(Scenario(lambda_b=LAMBDA, lambda_u=LAMBDA), params, fast_quad).value
    assert abs(est.mean - analytic) <= est.half_width_95 + 0.05 * analytic


def test_typical_user_outage_matches_analytic(patterns_mu_one, params, fast_quad):
    threshold = 10 ** 0.5
    est = estimate_outage(patterns_mu_one, PowerMode.ALL_ON, threshold, params)
    analytic = outage(Scenario(lambda_b=LAMBDA, lambda_u=LAMBDA), threshold, params, fast_quad).value
    assert abs(est.mean - analytic) <= est.half_width_95 + 0.02


def test_received_power_outage_matches_exact_value(patterns_mu_one, params):
    est = estimate_received_power_outage(patterns_mu_one, params)
    exact = received_power_outage(params)
    assert abs(est.mean - exact) <= est.half_width_95 + 0.02


def test_on_off_interference_not_above_all_on(patterns_mu_one, params):
    all_on = estimate_sinr_rate(patterns_mu_one, PowerMode.ALL_ON, params).mean
    on_off = estimate_sinr_rate(patterns_mu_one, PowerMode.ON_OFF, params).mean
    assert on_off >= all_on


def _single_bs_patterns(n: int) -> list:
    side = 200.0
    return [
        PointPattern(
            bs_positions=np.array([[side / 2 + 10.0, side / 2]]),
            user_positions=np.zeros((0, 2)),
            association=np.zeros(0, dtype=np.intp),
            active_mask=np.ones(1, dtype=bool),
            mode=PowerMode.ALL_ON,
            lambda_b=LAMBDA,
            lambda_u=0.0,
            window_side=side,
            seed=5,
            index=i,
        )
        for i in range(n)
    ]


def test_single_bs_rate_matches_fading_integral(params):
    patterns = _single_bs_patterns(2000)
    est = estimate_sinr_rate(patterns, PowerMode.ALL_ON, params)
    mean_snr = params.path_loss_constant * min_transmit_power(LAMBDA, params) * 10.0 ** (-params.alpha) / params.noise_power
    exact, _ = integrate.quad(lambda h: math.log2(1.0 + mean_snr * h) * math.exp(-h), 0.0, math.inf)
    assert abs(est.mean - exact) <= est.half_width_95 + 0.02 * exact


def test_one_user_per_cell_gives_equal_cell_and_user_rate(params):
    side = 300.0
    bs = np.array([[50.0, 50.0], [150.0, 150.0], [250.0, 60.0]])
    users = bs + np.array([[3.0, 0.0], [0.0, -4.0], [2.0, 2.0]])
    pattern = PointPattern(
        bs_positions=bs,
        user_positions=users,
        association=np.array([0, 1, 2]),
        active_mask=np.ones(3, dtype=bool),
        mode=PowerMode.ALL_ON,
        lambda_b=LAMBDA,
        lambda_u=LAMBDA,
        window_side=side,
    )
    cell, user = estimate_cell_and_user_rate([pattern], PowerMode.ALL_ON, params)
    assert cell.mean == pytest.approx(user.mean, rel=1e-12)
    assert cell.mean > 0


def test_write_pattern_csv(tmp_path):
    pattern = sample_network(LAMBDA, LAMBDA, SMALL.model_copy(update={"n_realizations": 1}), PowerMode.ON_OFF)
    path = tmp_path / "pattern.csv"
    write_pattern_csv(pattern, str(path))
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["x", "y", "kind", "serving_index", "active"]
    assert (frame["kind"] == "bs").sum() == len(pattern.bs_positions)
    assert (frame["kind"] == "user").sum() == len(pattern.user_positions)
    # a served user's BS is on under on-off control
    assert frame.loc[frame["kind"] == "user", "active"].all()


def _streamed(lambda_b: float, lambda_u: float, config: SimConfig, n: int):
    return (sample_network(lambda_b, lambda_u, config, index=i) for i in range(n))


@pytest.fixture(scope="module")
def outage_draws(params):
    # users play no part in the typical user's all-on SINR
    config = SimConfig(target_bs_count=500, seed=29)
    threshold = 10 ** 0.5
    quarter = estimate_outage(_streamed(LAMBDA, 0.0, config, 2_500), PowerMode.ALL_ON, threshold, params)
    full = estimate_outage(_streamed(LAMBDA, 0.0, config, 10_000), PowerMode.ALL_ON, threshold, params)
    return quarter, full


def test_outage_agrees_at_ten_thousand_draws(outage_draws, params, run_config):
    _, full = outage_draws
    assert full.n_samples == 10_000
    analytic = outage(Scenario(lambda_b=LAMBDA, lambda_u=LAMBDA), 10 ** 0.5, params, run_config.quadrature).value
    # 500-BS window leaves a small far-field interference deficit
    assert abs(full.mean - analytic) <= full.half_width_95 + 0.005


def test_half_width_shrinks_with_root_of_sample_count(outage_draws):
    quarter, full = outage_draws
    assert 1.8 <= quarter.half_width_95 / full.half_width_95 <= 2.2


def test_bs_count_is_poisson():
    config = SimConfig(target_bs_count=600, seed=3)
    counts = [len(p.bs_positions) for p in _streamed(LAMBDA, 0.0, config, 200)]
    summary = summarize(counts)
    assert abs(summary.mean - 600.0) <= 2 * summary.half_width_95
    assert 0.65 <= np.var(counts, ddof=1) / 600.0 <= 1.35


def test_torus_and_guard_windows_agree(params):
    torus = SimConfig(target_bs_count=600, n_realizations=150, seed=17)
    guard = SimConfig(target_bs_count=600, n_realizations=150, seed=18, boundary=Boundary.GUARD, guard_width=150.0)
    rate_torus = estimate_sinr_rate(sample_patterns(LAMBDA, LAMBDA, torus), PowerMode.ALL_ON, params)
    guarded = sample_patterns(LAMBDA, LAMBDA, guard)
    rate_guard = estimate_sinr_rate(guarded, PowerMode.ALL_ON, params)
    assert abs(rate_torus.mean - rate_guard.mean) <= rate_torus.half_width_95 + rate_guard.half_width_95
    void_guard = estimate_void_fraction(guarded)
    assert abs(void_guard.mean - void_probability(1.0)) <= void_guard.half_width_95 + 0.02


def test_all_on_rate_independent_of_bs_density(params, fast_quad):
    densities = [convert_units(d, "per_km2", "per_m2") for d in (100.0, 333.0, 1000.0)]
    config = SimConfig(target_bs_count=600, seed=41)
    estimates = [estimate_sinr_rate(_streamed(b, 0.0, config, 300), PowerMode.ALL_ON, params) for b in densities]
    for i, a in enumerate(estimates):
        for b in estimates[i + 1:]:
            assert abs(a.mean - b.mean) <= a.half_width_95 + b.half_width_95
    analytic = [avg_rate(Scenario(lambda_b=b, lambda_u=LAMBDA), params, fast_quad).value for b in densities]
    assert max(analytic) - min(analytic) <= 2 * fast_quad.rel_tol * max(analytic)


def test_reused_seed_reproduces_estimates_exactly(params):
    config = SimConfig(target_bs_count=500, n_realizations=6, seed=77)
    runs = []
    for _ in range(2):
        patterns = sample_patterns(LAMBDA, LAMBDA, config, PowerMode.ON_OFF)
        cell, user = estimate_cell_and_user_rate(patterns, PowerMode.ON_OFF, params)
        rate = estimate_sinr_rate(patterns, PowerMode.ON_OFF, params)
        runs.append([cell.model_dump_json(), user.model_dump_json(), rate.model_dump_json()])
    assert runs[0] == runs[1]


@pytest.mark.parametrize("mu", [0.5, 1.0, 2.0, 4.0])
def test_user_rate_matches_analytic_per_load(params, fast_quad, mu):
    tolerances = ValidationTolerances()
    lambda_b = LAMBDA / mu
    patterns = sample_patterns(lambda_b, LAMBDA, SimConfig(target_bs_count=600, n_realizations=60, seed=5))
    estimates = {}
    for mode in PowerMode:
        _, mc_user = estimate_cell_and_user_rate(patterns, mode, params)
        analytic = user_rate(Scenario(lambda_b=lambda_b, lambda_u=LAMBDA, mode=mode), params, fast_quad).value
        # On-off estimates run a few percent above the analytic rate: the analytic
        # model thins active BSs independently while neighbouring cells' occupancies
        # are correlated. The wider on-off tolerance absorbs that gap.
        allowance = mc_user.half_width_95 + tolerances.rate_tolerance_for(mode) * analytic
        assert abs(mc_user.mean - analytic) <= allowance, f"{mode.value} at mu={mu}"
        estimates[mode] = mc_user.mean
    # same fading draws, fewer interferers
    assert estimates[PowerMode.ON_OFF] >= estimates[PowerMode.ALL_ON]
