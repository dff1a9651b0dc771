import math

import numpy as np
import pytest
from scipy.special import ndtr

from oracles import grid_best_split
from tplots import (
    AllocationError,
    CapacityAllocation,
    GaussianParams,
    SamplerConfig,
    TSetSpec,
    lagrangian_allocation,
    mu_k_sigma_allocation,
    optimize_envelope,
    saturation_probability,
)
from tplots.alloc import (
    default_L_grid,
    fraction_within,
    hill_climb,
    homogeneous_allocation,
    implied_k,
    log_hazard_ratio,
    sample_flows,
)
from tplots.tset import Sampler


def gp(mu, sigma):
    return GaussianParams(float(mu), float(sigma), "test")


def params_from(mus, sigmas):
    return {f"e{i}": gp(m, s) for i, (m, s) in enumerate(zip(mus, sigmas))}


class TestMuKSigma:
    def test_budget_equals_mean_sum(self):
        p = params_from([1, 2, 3], [0.5, 0.1, 1])
        a = mu_k_sigma_allocation(p, 6.0)
        assert a.k == 0 and np.allclose(a.vector, [1, 2, 3])

    def test_algebra_example(self):
        a = mu_k_sigma_allocation(params_from([1, 1], [1, 3]), 6.0)
        assert a.k == 1.0 and np.allclose(a.vector, [2, 4])

    def test_negative_k(self):
        a = mu_k_sigma_allocation(params_from([2, 2], [1, 1]), 3.0)
        assert a.k == -0.5 and np.allclose(a.vector, [1.5, 1.5])

    def test_degenerate_budget_names_edges(self):
        with pytest.raises(AllocationError, match="e1"):
            mu_k_sigma_allocation(params_from([2, 0.1], [0.1, 1]), 1.0)
        with pytest.raises(AllocationError):
            mu_k_sigma_allocation(params_from([1, 1], [0, 0]), 3.0)

    def test_round_trip_k(self, rng):
        for _ in range(20):
            p = params_from(rng.random(6) + 0.5, rng.random(6) + 0.1)
            budget = sum(x.mu for x in p.values()) + 2 * rng.random()
            a = mu_k_sigma_allocation(p, budget)
            assert implied_k(a, p) == pytest.approx(a.k, rel=1e-12, abs=1e-12)
            assert abs(a.vector.sum() - budget) <= 1e-9


class TestLagrangian:
    def test_equal_sigma_matches_mu_k_sigma(self, rng):
        for _ in range(10):
            p = params_from(rng.random(5) + 1, np.full(5, 0.3))
            budget = sum(x.mu for x in p.values()) + rng.random() * 3 - 0.5
            a = lagrangian_allocation(p, budget)
            b = mu_k_sigma_allocation(p, budget)
            assert np.allclose(a.vector, b.vector, atol=1e-9)

    def test_single_edge(self):
        assert lagrangian_allocation(params_from([1], [0.2]), 3.0).vector.tolist() == [3.0]

    @pytest.mark.parametrize("mu,budget", [((1.0, 1.0), 2.5), ((0.5, 1.5), 2.6), ((1.0, 0.7), 2.0)])
    def test_two_edge_grid_search(self, mu, budget):
        sigma = (0.1, 0.3)
        a = lagrangian_allocation(params_from(mu, sigma), budget)
        (g1, _), gval = grid_best_split(mu, sigma, budget, 1000)
        val = ndtr((a.vector[0] - mu[0]) / sigma[0]) * ndtr((a.vector[1] - mu[1]) / sigma[1])
        assert abs(a.vector[0] - g1) <= budget / 1000
        assert val >= gval - 1e-12

    def test_first_order_condition(self):
        p = params_from([1.0, 2.0, 0.5], [0.1, 0.4, 0.2])
        a = lagrangian_allocation(p, 4.5)
        z = (a.vector - np.array([1.0, 2.0, 0.5])) / np.array([0.1, 0.4, 0.2])
        ratios = log_hazard_ratio(z) - np.log([0.1, 0.4, 0.2])
        assert np.ptp(ratios) < 1e-6

    def test_far_tails_finite(self):
        a = lagrangian_allocation(params_from([1.0, 1.0], [0.01, 0.02]), 10.0)
        assert np.all(np.isfinite(a.vector)) and abs(a.vector.sum() - 10.0) <= 1e-9

    def test_hazard_ratio_decreasing(self):
        z = np.linspace(-40, 40, 2001)
        assert np.all(np.diff(log_hazard_ratio(z)) < 0)

    def test_needs_positive_sigma(self):
        with pytest.raises(AllocationError):
            lagrangian_allocation(params_from([1, 1], [0.1, 0]), 3.0)


class TestSaturation:
    def test_far_capacities(self):
        p = params_from([1, 2, 3], [0.1, 0.2, 0.3])
        a = CapacityAllocation({e: x.mu + 10 * x.sigma for e, x in p.items()}, 6 + 6.0)
        assert saturation_probability(a, p) < 1e-15

    def test_one_edge_at_mean(self):
        p = params_from([1.0], [0.5])
        assert saturation_probability(CapacityAllocation({"e0": 1.0}, 1.0), p) == pytest.approx(0.5)

    def test_zero_sigma_edges(self):
        p = params_from([1.0, 1.0], [0.0, 0.5])
        assert saturation_probability(CapacityAllocation({"e0": 1.5, "e1": 1.0}, 2.5), p) == pytest.approx(0.5)
        assert saturation_probability(CapacityAllocation({"e0": 1.0, "e1": 2.0}, 3.0), p) == 1.0

    def test_mu_k_sigma_locally_optimal(self):
        rng = np.random.default_rng(3)
        p = params_from([1.0, 1.5, 0.7, 2.0, 1.2], np.full(5, 0.25))
        budget = 8.0
        best = mu_k_sigma_allocation(p, budget)
        base = saturation_probability(best, p)
        for _ in range(100):
            d = rng.normal(scale=0.05, size=5)
            c = best.vector + d - d.mean()
            other = CapacityAllocation(dict(zip(best.edge_ids, c.tolist())), budget)
            assert base <= saturation_probability(other, p) + 1e-15


class TestAllocationRecord:
    def test_budget_and_positivity_enforced(self):
        with pytest.raises(AllocationError):
            CapacityAllocation({"a": 1.0, "b": 1.0}, 2.1)
        with pytest.raises(AllocationError):
            CapacityAllocation({"a": 2.5, "b": -0.5}, 2.0)

    def test_apply(self, toy4):
        net, _ = toy4
        a = homogeneous_allocation(net.edge_ids, 20.0)
        assert np.allclose(a.apply(net).capacities, 2.0)


@pytest.fixture(scope="module")
def setup(abilene):
    net, f = abilene
    D = Sampler(TSetSpec("A", 11), SamplerConfig(seed=7)).draw(1000)
    return net, f, D


class TestEnvelope:
    def test_fraction_within(self):
        flows = np.array([[1.0, 2.0], [3.0, 0.0]])
        assert fraction_within(flows, np.array([1.0, 1.0]), 2.0) == 0.5
        assert np.allclose(fraction_within(flows, np.array([1.0, 2.0]), [0.5, 1.0, 3.0]), [0, 0.5, 1])

    def test_hill_climb_monotone_and_feasible(self, setup):
        net, f, D = setup
        flows = sample_flows(net, f, D)
        rng = np.random.default_rng(1)
        start = np.full(net.n_edges, 1.0)
        c, best, trace = hill_climb(flows, 28.0, 2.0, start, 500, rng)
        assert np.all(np.diff(trace) >= 0)
        assert trace[-1] == best == fraction_within(flows, c, 2.0)
        assert abs(c.sum() - 28.0) <= 1e-9 and c.min() > 0

    def test_envelope_dominates_and_is_monotone(self, setup):
        net, f, D = setup
        res = optimize_envelope(net, f, D, 28.0, iterations=300, seed=2,
                                L_grid=default_L_grid(sample_flows(net, f, D), 28.0, 6))
        assert np.all(res.envelope >= res.homogeneous)
        assert np.all(res.envelope >= res.mu_k_sigma)
        assert np.all(res.envelope >= res.best_fraction)
        assert np.all(np.diff(res.envelope) >= 0)
        for a in res.allocations:
            assert abs(a.vector.sum() - 28.0) <= 1e-9 and a.vector.min() > 0
        assert res.start_fractions.shape == (6, 2) and res.restart_gap >= 0
        assert res.meta["k"] == pytest.approx(mu_k_sigma_allocation(
            {e: gp(*m) for e, m in zip(net.edge_ids, zip(sample_flows(net, f, D).mean(0),
                                                           sample_flows(net, f, D).std(0)))}, 28.0).k)

    def test_single_level_optimum_dominated_elsewhere(self, setup):
        net, f, D = setup
        flows = sample_flows(net, f, D)
        grid = default_L_grid(flows, 28.0, 6)
        res = optimize_envelope(net, f, D, 28.0, L_grid=grid, iterations=400, seed=3)
        one = res.allocations[2]
        curve = fraction_within(flows, one.vector, grid)
        assert np.all(curve <= res.envelope + 1e-12)
        assert np.any(curve < res.envelope)

    def test_deterministic(self, setup):
        net, f, D = setup
        a = optimize_envelope(net, f, D[:200], 28.0, L_grid=[2.0, 3.0], iterations=100, seed=5)
        b = optimize_envelope(net, f, D[:200], 28.0, L_grid=[2.0, 3.0], iterations=100, seed=5)
        assert np.array_equal(a.envelope, b.envelope)

    def test_infeasible_budget(self, setup):
        net, f, D = setup
        with pytest.raises(AllocationError):
            optimize_envelope(net, f, D[:10], 1e-6, L_grid=[1.0], iterations=1)


def test_abilene_k_near_reported(abilene):
    # closed-form P parameters on the reconstructed metric; reported value is about 1.14
    from tplots import gaussian_params

    net, f = abilene
    p = {e: gaussian_params(net, f, e, TSetSpec("P", 11)) for e in net.edge_ids}
    a = mu_k_sigma_allocation(p, 28.0)
    assert math.isfinite(a.k) and a.k > 0
