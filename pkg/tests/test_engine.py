from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from folio.engine import Algorithm
from folio.engine import RunConfig
from folio.engine import StepRecord
from folio.engine import check_erroneous_bound
from folio.engine import regret_bound
from folio.engine import run
from folio.engine import run_alg1
from folio.engine import run_alg2
from folio.engine import run_alg3
from folio.engine import run_alg4
from folio.engine import run_eeg_trajectory
from folio.engine import run_replications
from folio.engine import wealth_factor
from folio.errors import DeltaOutOfRangeError
from folio.errors import EpsIExceedsRMinError
from folio.errors import EpsITooLargeError
from folio.errors import EpsZTooLargeError
from folio.errors import InputError
from folio.errors import ParameterRegimeError
from folio.errors import RMinViolationError
from folio.estimators import NoiseModel
from folio.estimators import QuantumCostModel
from folio.estimators import sample_count
from folio.market import MarketGenConfig
from folio.market import MarketKind
from folio.market import PriceRelativeSeries
from folio.market import generate_market
from folio.offline import solve_offline
from folio.updates import inner_product_tolerance
from folio.updates import norm_tolerance


def _market(kind: MarketKind, n: int, horizon: int, r_min: float, seed: int = 0) -> PriceRelativeSeries:
    return generate_market(MarketGenConfig(kind, n, horizon, r_min, seed))


def _iid(n: int, horizon: int, r_min: float, seed: int = 0) -> PriceRelativeSeries:
    return _market(MarketKind.IID_UNIFORM, n, horizon, r_min, seed)


def _flat(n: int, horizon: int) -> PriceRelativeSeries:
    return PriceRelativeSeries(np.ones((horizon, n)), 1.0)


def _suite_markets(kind: MarketKind, n: int, horizon: int, r_min: float) -> list[PriceRelativeSeries]:
    seeds = range(100) if kind is MarketKind.IID_UNIFORM else [0]
    return [_market(kind, n, horizon, r_min, seed) for seed in seeds]


def _satisfied(algorithm: Algorithm, rel_for_seed, seeds, **overrides) -> int:
    return sum(run(rel_for_seed(seed), RunConfig(algorithm, seed=seed, **overrides)).bound_satisfied for seed in seeds)


def _portfolios(report) -> np.ndarray:
    return np.array([step.portfolio for step in report.steps])


def _expected_queries(n: int, horizon: int, r_min: float, delta: float, eps_i: float, eps_z: float, s: int) -> int:
    cost = QuantumCostModel(n, horizon, r_min, delta)
    if 1 < s < n:
        sampling = cost.multi_sample_parameter_charge(s, eps_z) + cost.multi_sample_draw_charge(s)
    else:
        sampling = cost.direct_sample_charge(s)
    per_step = (
        cost.max_find_charge()
        + cost.norm_estimate_charge(eps_z)
        + cost.state_prepare_charge()
        + sampling
        + 1
        + cost.inner_product_charge(eps_i)
    )
    return horizon * per_step


class TestAlgorithm:
    @pytest.mark.parametrize(
        ("text", "expected"),
        [
            ("eg", Algorithm.ALG1_EG),
            ("sampled", Algorithm.ALG2_SAMPLED),
            ("approx", Algorithm.ALG3_APPROX),
            ("quantum", Algorithm.ALG4_QUANTUM_EMULATED),
            ("alg3_approx", Algorithm.ALG3_APPROX),
        ],
    )
    def test_parse(self, text, expected):
        assert Algorithm.parse(text) is expected

    def test_parse_unknown(self):
        with pytest.raises(InputError):
            Algorithm.parse("greedy")


class TestRunConfig:
    def test_delta_range(self):
        with pytest.raises(DeltaOutOfRangeError):
            RunConfig(Algorithm.ALG1_EG, delta=0.4)

    def test_negative_cost(self):
        with pytest.raises(InputError):
            RunConfig(Algorithm.ALG1_EG, cost_per_trade=-1.0)

    def test_accepts_short_names(self):
        assert RunConfig("quantum").algorithm is Algorithm.ALG4_QUANTUM_EMULATED  # type: ignore[arg-type]

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            run(_iid(3, 10, 0.5), RunConfig(Algorithm.ALG1_EG, n=4))

    def test_r_min_above_observed(self):
        with pytest.raises(RMinViolationError):
            run(_iid(3, 10, 0.5), RunConfig(Algorithm.ALG1_EG, r_min=0.99))

    def test_wrong_runner(self):
        with pytest.raises(InputError):
            run_alg2(_iid(3, 10, 0.5), RunConfig(Algorithm.ALG1_EG))


class TestRegretBound:
    def test_alg1_value(self):
        assert regret_bound(Algorithm.ALG1_EG, 2, 1000, 0.5) == pytest.approx(2 * math.sqrt(math.log(2) / 2000))
        assert regret_bound(Algorithm.ALG1_EG, 2, 1000, 0.5) == pytest.approx(0.0372330, abs=1e-7)

    def test_alg3_value(self):
        assert regret_bound(Algorithm.ALG3_APPROX, 2, 4000, 0.5) == pytest.approx(16 * math.sqrt(math.log(2) / 8000))
        assert regret_bound(Algorithm.ALG3_APPROX, 2, 4000, 0.5) == pytest.approx(0.1489319, abs=1e-7)

    def test_constant_ratios(self):
        base = regret_bound(Algorithm.ALG1_EG, 7, 300, 0.4)
        assert regret_bound(Algorithm.ALG2_SAMPLED, 7, 300, 0.4) == pytest.approx(2 * base)
        assert regret_bound(Algorithm.ALG4_QUANTUM_EMULATED, 7, 300, 0.4) == pytest.approx(12 * base)

    def test_quadrupled_horizon_halves(self):
        for algorithm in Algorithm:
            assert regret_bound(algorithm, 5, 400, 0.5) == pytest.approx(regret_bound(algorithm, 5, 100, 0.5) / 2)


class TestWealthFactor:
    def test_flat_market_keeps_wealth(self):
        report = run_alg1(_flat(3, 10), RunConfig(Algorithm.ALG1_EG))
        assert wealth_factor(report) == pytest.approx(1.0)

    def test_two_halvings(self):
        report = run_alg1(_flat(2, 2), RunConfig(Algorithm.ALG1_EG))
        steps = (StepRecord(1, 0.5, 0.0), StepRecord(2, 0.5, 0.0))
        halved = replace(report, steps=steps, ls_achieved=math.log(0.5))
        assert wealth_factor(halved) == pytest.approx(0.25)

    def test_matches_product_of_factors(self):
        report = run_alg1(_iid(4, 60, 0.4, seed=2), RunConfig(Algorithm.ALG1_EG))
        product = math.prod(step.realized_factor for step in report.steps)
        assert wealth_factor(report) == pytest.approx(product, rel=1e-9)


class TestRunAlg1:
    def test_flat_market(self):
        report = run_alg1(_flat(3, 20), RunConfig(Algorithm.ALG1_EG, cost_per_trade=0.5))
        assert report.ls_achieved == pytest.approx(0.0, abs=1e-12)
        assert report.regret == pytest.approx(0.0, abs=1e-12)
        assert report.total_cost == 20 * 3 * 0.5

    def test_alternating_within_bound(self):
        rel = _market(MarketKind.TWO_ASSET_ALTERNATING, 2, 1000, 0.5)
        report = run_alg1(rel, RunConfig(Algorithm.ALG1_EG))
        assert report.regret_bound == pytest.approx(2 * math.sqrt(math.log(2) / 2000))
        assert report.regret <= report.regret_bound + report.offline.gradient_residual
        assert report.bound_satisfied

    def test_single_asset(self):
        rel = _flat(1, 15)
        report = run_alg1(rel, RunConfig(Algorithm.ALG1_EG))
        assert all(step.portfolio.tolist() == [1.0] for step in report.steps)
        assert report.ls_achieved == pytest.approx(np.log(rel.relatives[:, 0]).mean())

    def test_ls_recomputes_from_steps(self):
        report = run_alg1(_iid(5, 80, 0.3, seed=4), RunConfig(Algorithm.ALG1_EG))
        recomputed = math.fsum(math.log(step.realized_factor) for step in report.steps) / report.horizon
        assert abs(recomputed - report.ls_achieved) <= 1e-12
        assert report.regret == pytest.approx(report.ls_star - report.ls_achieved, abs=1e-12)

    @pytest.mark.parametrize("kind", list(MarketKind))
    @pytest.mark.parametrize("n", [2, 10, 50])
    @pytest.mark.parametrize("horizon", [100, 1000])
    @pytest.mark.parametrize("r_min", [0.3, 0.5, 0.9])
    def test_regret_bound_suite(self, kind, n, horizon, r_min):
        cfg = RunConfig(Algorithm.ALG1_EG)
        bound = math.sqrt(math.log(n) / (2 * horizon)) / r_min
        for rel in _suite_markets(kind, n, horizon, r_min):
            report = run_alg1(rel, cfg)
            assert report.regret <= bound + 10 * cfg.offline_tol + report.offline.gradient_residual
            assert report.bound_satisfied


class TestRunAlg2:
    def test_flat_market(self):
        report = run_alg2(_flat(4, 30), RunConfig(Algorithm.ALG2_SAMPLED))
        assert report.ls_achieved == 0.0
        assert all(step.realized_factor == 1.0 for step in report.steps)

    def test_cost_independent_of_n(self):
        cfg = RunConfig(Algorithm.ALG2_SAMPLED, cost_per_trade=0.01)
        small = run_alg2(_iid(10, 50, 0.5), cfg)
        large = run_alg2(_iid(1000, 50, 0.5), cfg)
        assert small.total_cost == large.total_cost == 50 * small.params["s"] * 0.01

    def test_follows_exact_portfolios(self):
        rel = _iid(6, 40, 0.4, seed=5)
        exact = run_alg1(rel, RunConfig(Algorithm.ALG1_EG))
        sampled = run_alg2(rel, RunConfig(Algorithm.ALG2_SAMPLED, seed=5))
        np.testing.assert_array_equal(_portfolios(exact), _portfolios(sampled))

    def test_factors_within_range(self):
        rel = _iid(6, 40, 0.4, seed=6)
        report = run_alg2(rel, RunConfig(Algorithm.ALG2_SAMPLED, s_override=3))
        assert all(0.4 <= step.realized_factor <= 1.0 for step in report.steps)
        assert all(len(step.indices) == 3 for step in report.steps)

    def test_deterministic(self):
        rel = _iid(5, 30, 0.5, seed=1)
        cfg = RunConfig(Algorithm.ALG2_SAMPLED, seed=77)
        a, b = run_alg2(rel, cfg), run_alg2(rel, cfg)
        assert a.ls_achieved == b.ls_achieved
        for x, y in zip(a.steps, b.steps):
            np.testing.assert_array_equal(x.indices, y.indices)

    def test_sampling_concentration(self):
        close = 0
        for seed in range(100):
            rel = _iid(10, 200, 0.5, seed)
            exact = run_alg1(rel, RunConfig(Algorithm.ALG1_EG))
            sampled = run_alg2(rel, RunConfig(Algorithm.ALG2_SAMPLED, delta=0.05, seed=seed))
            close += abs(exact.ls_achieved - sampled.ls_achieved) <= (1 / 0.5) * math.sqrt(1 / 400)
        assert close >= 90

    def test_bound_holds_across_seeds(self):
        satisfied = _satisfied(Algorithm.ALG2_SAMPLED, lambda seed: _iid(10, 200, 0.5, seed), range(100))
        assert satisfied >= 90

    def test_hoeffding_events_counted(self):
        report = run_alg2(_iid(4, 50, 0.5, seed=2), RunConfig(Algorithm.ALG2_SAMPLED))
        assert report.success_events["steps"] == 50
        assert 0 <= report.success_events["hoeffding_ok"] <= 50


class TestRunAlg3:
    def test_refuses_when_eps_exceeds_r_min(self):
        with pytest.raises(EpsIExceedsRMinError) as exc_info:
            run_alg3(_iid(50, 100, 0.3), RunConfig(Algorithm.ALG3_APPROX))
        assert exc_info.value.values["r_min"] == 0.3
        assert exc_info.value.values["eps_I"] > 0.3

    def test_flat_market(self):
        report = run_alg3(_flat(2, 30), RunConfig(Algorithm.ALG3_APPROX))
        assert report.ls_achieved == 0.0
        assert all(step.i_tilde == 1.0 for step in report.steps)

    def test_small_instance(self):
        rel = _iid(2, 100, 0.5, seed=3)
        report = run_alg3(rel, RunConfig(Algorithm.ALG3_APPROX, seed=3))
        assert report.success_events["estimate_ok"] >= 98
        assert report.total_queries == sum(step.queries for step in report.steps)
        assert report.bound_satisfied

    def test_exact_estimates_reproduce_eg(self):
        rel = _iid(5, 50, 0.5, seed=9)
        exact = run_alg1(rel, RunConfig(Algorithm.ALG1_EG))
        approx = run_alg3(rel, RunConfig(Algorithm.ALG3_APPROX, eps_i_override=0.0))
        np.testing.assert_allclose(_portfolios(approx), _portfolios(exact), atol=1e-9)

    def test_bound_holds_across_seeds(self):
        satisfied = _satisfied(Algorithm.ALG3_APPROX, lambda seed: _iid(2, 100, 0.5, seed), range(100))
        assert satisfied >= 85


class TestRunAlg4:
    def test_refuses_large_norm_tolerance(self):
        with pytest.raises(EpsZTooLargeError):
            run_alg4(_iid(2, 100, 0.5), RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, eps_z_override=0.6))

    def test_refuses_large_inner_product_tolerance(self):
        with pytest.raises(EpsITooLargeError):
            run_alg4(_iid(2, 10, 0.9), RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, eps_i_override=0.55))

    def test_refusal_is_a_regime_error(self):
        with pytest.raises(ParameterRegimeError):
            run(_iid(50, 100, 0.3), RunConfig(Algorithm.ALG4_QUANTUM_EMULATED))

    def test_flat_market(self):
        report = run_alg4(_flat(3, 20), RunConfig(Algorithm.ALG4_QUANTUM_EMULATED))
        assert report.ls_achieved == 0.0

    def test_cost_matches_sampled(self):
        cfg = RunConfig(Algorithm.ALG2_SAMPLED, cost_per_trade=0.02)
        sampled = run_alg2(_iid(8, 60, 0.5), cfg)
        emulated = run_alg4(_iid(8, 60, 0.5), replace(cfg, algorithm=Algorithm.ALG4_QUANTUM_EMULATED))
        assert emulated.total_cost == sampled.total_cost

    def test_query_total_matches_formulas(self):
        rel = _iid(100, 20, 0.5)
        report = run_alg4(rel, RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, eta_override=0.1, s_override=16))
        eps_i, eps_z = inner_product_tolerance(0.1, 0.5), norm_tolerance(0.1, 0.5)
        assert report.total_queries == _expected_queries(100, 20, 0.5, 0.05, eps_i, eps_z, 16)
        assert report.success_events["multi_sample_fallbacks"] == 0

    def test_root_n_query_scaling(self):
        cfg = RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, eta_override=0.1, s_override=16)
        small = run_alg4(_iid(100, 20, 0.5), cfg)
        large = run_alg4(_iid(400, 20, 0.5), cfg)
        assert 1.9 <= large.total_queries / small.total_queries <= 2.1

    def test_horizon_query_scaling(self):
        cfg = RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, eta_override=0.1, s_override=16)
        short = run_alg4(_iid(100, 20, 0.5), cfg)
        long = run_alg4(_iid(100, 40, 0.5), cfg)
        eps_i, eps_z = inner_product_tolerance(0.1, 0.5), norm_tolerance(0.1, 0.5)
        predicted = _expected_queries(100, 40, 0.5, 0.05, eps_i, eps_z, 16) / _expected_queries(
            100, 20, 0.5, 0.05, eps_i, eps_z, 16
        )
        assert long.total_queries / short.total_queries == pytest.approx(predicted, rel=0.05)

    def test_fallback_flagged(self):
        report = run_alg4(_iid(3, 20, 0.5), RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, s_override=5))
        assert report.success_events["multi_sample_fallbacks"] == 20

    def test_worst_case_noise_stays_in_band(self):
        rel = _iid(4, 200, 0.5, seed=12)
        report = run_alg4(rel, RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, noise=NoiseModel.parse("worst+")))
        assert report.success_events["estimate_ok"] == 200
        assert report.success_events["norm_ok"] == 200
        assert report.bound_satisfied
        assert report.history_queries > report.total_queries

    def test_deterministic_with_random_noise(self):
        rel = _iid(6, 50, 0.5, seed=4)
        cfg = RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, noise=NoiseModel.parse("random"), seed=13)
        a, b = run_alg4(rel, cfg), run_alg4(rel, cfg)
        assert [s.i_tilde for s in a.steps] == [s.i_tilde for s in b.steps]
        assert [s.z_tilde for s in a.steps] == [s.z_tilde for s in b.steps]

    def test_bound_holds_across_seeds(self):
        worst = NoiseModel.parse("worst-")
        satisfied = _satisfied(
            Algorithm.ALG4_QUANTUM_EMULATED, lambda seed: _iid(10, 200, 0.5, seed), range(100), noise=worst
        )
        assert satisfied >= 85

    def test_long_two_asset_horizon(self):
        bound = regret_bound(Algorithm.ALG3_APPROX, 2, 4000, 0.5)
        worst = NoiseModel.parse("worst-")
        for seed in range(20):
            rel = _iid(2, 4000, 0.5, seed)
            report = run(rel, RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, noise=worst, seed=seed))
            assert report.params["eps_I"] == pytest.approx(3 * report.params["eta"] / (4 * rel.r_min))
            assert report.regret <= bound + report.offline.gradient_residual


class TestCostIndependence:
    @pytest.mark.parametrize(
        "algorithm", [Algorithm.ALG2_SAMPLED, Algorithm.ALG3_APPROX, Algorithm.ALG4_QUANTUM_EMULATED]
    )
    def test_total_cost_ignores_n(self, algorithm):
        cfg = RunConfig(algorithm, cost_per_trade=0.01)
        costs = {run(_iid(n, 150, 0.5), cfg).total_cost for n in (10, 100, 1000)}
        assert len(costs) == 1
        (cost,) = costs
        assert cost == 150 * sample_count(150, 0.5, 0.05) * 0.01

    def test_alg1_pays_per_asset(self):
        report = run(_iid(10, 150, 0.5), RunConfig(Algorithm.ALG1_EG, cost_per_trade=0.01))
        assert report.total_cost == 150 * 10 * 0.01


class TestDegeneracyChain:
    @pytest.mark.parametrize("seed", range(10))
    def test_zero_error_runs_coincide(self, seed):
        rel = _iid(5, 50, 0.5, seed)
        exact = _portfolios(run(rel, RunConfig(Algorithm.ALG1_EG)))
        approx = _portfolios(run(rel, RunConfig(Algorithm.ALG3_APPROX, eps_i_override=0.0, seed=seed)))
        emulated = _portfolios(
            run(rel, RunConfig(Algorithm.ALG4_QUANTUM_EMULATED, eps_i_override=0.0, eps_z_override=0.0, seed=seed))
        )
        np.testing.assert_allclose(approx, exact, atol=1e-9)
        np.testing.assert_allclose(emulated, exact, atol=1e-9)


class TestReplications:
    def test_ordered_by_seed(self):
        def factory(seed: int) -> PriceRelativeSeries:
            return _iid(3, 20, 0.5, seed)

        reports = run_replications(factory, RunConfig(Algorithm.ALG2_SAMPLED), [3, 1, 2])
        assert [report.params["seed"] for report in reports] == [1, 2, 3]

    def test_parallel_matches_sequential(self):
        def factory(seed: int) -> PriceRelativeSeries:
            return _iid(3, 20, 0.5, seed)

        cfg = RunConfig(Algorithm.ALG2_SAMPLED)
        sequential = run_replications(factory, cfg, range(4))
        parallel = run_replications(factory, cfg, range(4), workers=3)
        assert [r.ls_achieved for r in sequential] == [r.ls_achieved for r in parallel]


class TestErroneousTrajectory:
    @pytest.mark.parametrize("kind", list(MarketKind))
    @pytest.mark.parametrize("n", [2, 10, 50])
    @pytest.mark.parametrize("horizon", [100, 1000])
    @pytest.mark.parametrize("r_min", [0.3, 0.5, 0.9])
    def test_worst_case_errors_within_bound(self, kind, n, horizon, r_min):
        worst = NoiseModel.parse("worst+")
        for rel in _suite_markets(kind, n, horizon, r_min):
            trajectory = run_eeg_trajectory(rel, noise=worst)
            assert trajectory.eps_i == pytest.approx(inner_product_tolerance(trajectory.eta, rel.r_min))
            comparisons = [np.full(n, 1.0 / n), solve_offline(rel).w_star.weights, *np.eye(n)]
            for u in comparisons:
                assert check_erroneous_bound(trajectory, rel, u)

    def test_mass_stays_near_one(self):
        rel = _iid(5, 100, 0.5, seed=2)
        trajectory = run_eeg_trajectory(rel, noise=NoiseModel.parse("worst+"))
        masses = trajectory.weights[1:].sum(axis=1)
        np.testing.assert_allclose(masses, 1.0 / (1.0 + trajectory.eps_z), rtol=1e-9)

    def test_exact_normalizer_variant(self):
        rel = _iid(4, 100, 0.5, seed=5)
        trajectory = run_eeg_trajectory(rel, eps_z=0.0, noise=NoiseModel.parse("worst-"))
        assert trajectory.z_tildes is None
        np.testing.assert_allclose(trajectory.weights.sum(axis=1), 1.0, atol=1e-12)
        assert check_erroneous_bound(trajectory, rel, np.full(4, 0.25))

    def test_rejects_large_tolerances(self):
        with pytest.raises(EpsZTooLargeError):
            run_eeg_trajectory(_iid(2, 100, 0.5), eps_z=0.5)
