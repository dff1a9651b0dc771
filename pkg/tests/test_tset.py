import itertools
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as sps

from tplots import (
    SamplerConfig,
    StructuralError,
    TSetSpec,
    UnsupportedModeError,
    contains,
    convergence_diagnostics,
    sample_permutation,
    sample_stream,
    walk_step,
)
from tplots.tset import Sampler, derive_seed, ecdf_sup_distance, splitmix64


class TestContains:
    def test_identity(self):
        assert contains(TSetSpec("P", 4), np.eye(4))
        assert not contains(TSetSpec("P_d", 4), np.eye(4))

    def test_uniform_doubly_stochastic(self):
        assert contains(TSetSpec("S", 5), np.full((5, 5), 0.2))
        assert not contains(TSetSpec("P", 5), np.full((5, 5), 0.2))

    def test_row_sum_above_one(self):
        D = np.zeros((3, 3))
        D[0, :2] = 0.6
        assert not contains(TSetSpec("A", 3), D)
        D[0, 1] = 0.4
        assert contains(TSetSpec("A", 3), D)
        assert not contains(TSetSpec("S", 3), D)

    def test_tolerance_on_sums(self):
        D = np.full((4, 4), 0.25)
        D[0, 0] += 5e-10
        assert contains(TSetSpec("S", 4), D)
        D[0, 0] += 1e-8
        assert not contains(TSetSpec("S", 4), D)

    def test_zero_diagonal_kinds(self):
        D = np.full((3, 3), 0.5)
        np.fill_diagonal(D, 0)
        assert contains(TSetSpec("A_d", 3), D)
        D[1, 1] = 1e-3
        assert not contains(TSetSpec("A_d", 3), D)

    def test_heterogeneous(self):
        t = TSetSpec("H", 2, (1.0, 2.0), (2.0, 1.0))
        assert contains(t, [[0.5, 0.5], [1.5, 0.5]])
        assert not contains(t, [[0.5, 0.6], [1.5, 0.5]])

    def test_dimension_mismatch(self):
        with pytest.raises(StructuralError):
            contains(TSetSpec("A", 3), np.zeros((4, 4)))

    def test_spec_validation(self):
        with pytest.raises(StructuralError):
            TSetSpec("B", 3)
        with pytest.raises(StructuralError):
            TSetSpec("A", 1)
        with pytest.raises(StructuralError):
            TSetSpec("H", 2, (1.0, 0.0), (1.0, 1.0))
        with pytest.raises(StructuralError):
            TSetSpec("H_surface", 2, (1.0, 1.0), (1.0, 2.0))
        with pytest.raises(StructuralError):
            SamplerConfig(thinning=0)
        with pytest.raises(StructuralError):
            SamplerConfig(step_scale=0.0)


class TestPermutationSampling:
    def test_n2_derangement_is_swap(self, rng):
        for _ in range(20):
            assert np.array_equal(sample_permutation(rng, 2, True), [[0, 1], [1, 0]])

    def test_n3_uniform_chi_square(self, rng):
        sigma = Sampler(TSetSpec("P", 3), SamplerConfig(seed=0)).draw_permutations(60000)
        keys = [tuple(s) for s in sigma]
        counts = np.array([keys.count(p) for p in itertools.permutations(range(3))])
        assert counts.sum() == 60000
        assert np.all(np.abs(counts / 60000 - 1 / 6) <= 3 * math.sqrt((1 / 6) * (5 / 6) / 60000))
        assert sps.chisquare(counts).pvalue > 1e-3

    def test_chi_square_pvalues_uniform_across_seeds(self):
        # a six-cell 3 SE check fails ~1.6% of seeds by chance; the p-values themselves must be uniform
        pvals = []
        for seed in range(100):
            sigma = Sampler(TSetSpec("P", 3), SamplerConfig(seed=seed)).draw_permutations(6000)
            code = sigma[:, 0] * 3 + sigma[:, 1]
            pvals.append(sps.chisquare(np.unique(code, return_counts=True)[1]).pvalue)
        assert sps.kstest(pvals, "uniform").pvalue > 1e-3

    def test_n3_derangements_only(self):
        sigma = Sampler(TSetSpec("P_d", 3), SamplerConfig(seed=8)).draw_permutations(20000)
        keys = {tuple(s) for s in sigma}
        assert keys == {(1, 2, 0), (2, 0, 1)}
        share = np.mean(sigma[:, 0] == 1)
        assert abs(share - 0.5) <= 3 * math.sqrt(0.25 / 20000)

    def test_derangement_share_near_inverse_e(self, rng):
        for n in (8, 10):
            sigma = np.argsort(rng.random((50000, n)), axis=1)
            share = np.mean(~(sigma == np.arange(n)).any(axis=1))
            assert abs(share - 1 / math.e) < 0.02

    def test_samples_are_members(self):
        for kind in ("P", "P_d"):
            t = TSetSpec(kind, 6)
            assert all(contains(t, D) for D in sample_stream(t, SamplerConfig(seed=1), 200))


class TestWalks:
    def test_surface_walk_conserves_sums(self, rng):
        t = TSetSpec("S", 5)
        D = np.full((5, 5), 0.2)
        moved = 0
        for _ in range(10**5):
            nxt = walk_step(t, rng, D)
            moved += not np.array_equal(nxt, D)
            D = nxt
        assert moved > 1000
        assert np.abs(D.sum(axis=0) - 1).max() <= 1e-12
        assert np.abs(D.sum(axis=1) - 1).max() <= 1e-12
        assert D.min() >= 0

    def test_compiled_surface_walk_conserves_sums(self):
        t = TSetSpec("S", 6)
        X = Sampler(t, SamplerConfig(seed=3, thinning=1, burn_in=0)).draw(10**5)
        assert np.abs(X.sum(axis=2) - 1).max() <= 1e-12
        assert np.abs(X.sum(axis=1) - 1).max() <= 1e-12

    def test_ball_walk_stays_inside(self, rng):
        t = TSetSpec("A", 4)
        D = np.zeros((4, 4))
        for _ in range(5000):
            D = walk_step(t, rng, D)
            assert contains(t, D)

    @pytest.mark.parametrize("kind", ["S", "S_d", "A", "A_d", "H", "H_surface"])
    def test_stream_members(self, kind):
        r = (0.5, 1.0, 1.5, 1.0)
        t = TSetSpec(kind, 4, r, r) if kind.startswith("H") else TSetSpec(kind, 4)
        X = sample_stream(t, SamplerConfig(seed=5), 300)
        assert X.shape == (300, 4, 4)
        assert all(contains(t, D) for D in X)

    def test_full_move_variant(self):
        t = TSetSpec("A", 3)
        s = Sampler(t, SamplerConfig(seed=2, move="full"))
        X = s.draw(200)
        assert all(contains(t, D) for D in X) and 0 < s.acceptance_rate < 1

    def test_discrete_kinds_do_not_walk(self, rng):
        with pytest.raises(UnsupportedModeError):
            walk_step(TSetSpec("P", 3), rng, np.eye(3))

    def test_sd_n3_is_refused(self):
        with pytest.raises(UnsupportedModeError):
            TSetSpec("S_d", 3)

    def test_entry_exchangeability_a4(self):
        X = sample_stream(TSetSpec("A", 4), SamplerConfig(seed=11), 10**5)
        means = X.mean(axis=0)
        # spread of 16 means against an honest SE from batch means
        batches = X.reshape(100, -1, 4, 4).mean(axis=1)
        se = batches.std(axis=0, ddof=1) / math.sqrt(100)
        grand = means.mean()
        assert np.all(np.abs(means - grand) <= 3.5 * se)
        se12 = math.hypot(se[0, 1], se[1, 0])
        assert abs(means[0, 1] - means[1, 0]) <= 3 * se12


class TestDeterminism:
    @pytest.mark.parametrize("kind", ["P", "P_d", "S", "A"])
    def test_same_seed_same_stream(self, kind):
        t = TSetSpec(kind, 5)
        a = sample_stream(t, SamplerConfig(seed=42), 500)
        b = sample_stream(t, SamplerConfig(seed=42), 500)
        c = sample_stream(t, SamplerConfig(seed=43), 500)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_split_draws_match_one_long_draw(self):
        t = TSetSpec("A", 4)
        cfg = SamplerConfig(seed=9, block=64)
        whole = Sampler(t, cfg).draw(300)
        s = Sampler(t, cfg)
        parts = np.concatenate([s.draw(k) for k in (1, 63, 100, 136)])
        assert np.array_equal(whole, parts)

    def test_seed_derivation(self):
        assert splitmix64(0) == 0xE220A8397B1DCDAF
        seeds = {derive_seed(7, k) for k in range(100)}
        assert len(seeds) == 100
        assert derive_seed(7, 3) == derive_seed(7, 3)

    def test_defaults_resolve(self):
        cfg = SamplerConfig().resolved(11)
        assert (cfg.burn_in, cfg.thinning) == (1210, 968)
        assert cfg.step_scale == pytest.approx(math.sqrt(1 / 22))


class TestDiagnostics:
    def test_impossible_bin_has_zero_variance(self):
        t = TSetSpec("A", 3)
        rep = convergence_diagnostics(t, SamplerConfig(seed=1, thinning=5), lambda X: X.sum(axis=(1, 2)),
                                      (10.0, 11.0), m_values=(10, 100), repetitions=5)
        assert rep.p == 0
        assert all(v == 0 for v in rep.variance.values())
        assert rep.variance_ratio(10, 100) == 1.0

    def test_report_shape(self):
        t = TSetSpec("S", 4)
        rep = convergence_diagnostics(t, SamplerConfig(seed=1), lambda X: X[:, 0, 0],
                                      (0.0, 0.25), m_values=(50, 500), repetitions=10)
        assert set(rep.variance) == {50, 500}
        assert 0 < rep.p < 1
        assert 0 <= rep.sup_distance <= 1
        assert 0 < rep.acceptance_rate < 1

    def test_sup_distance(self):
        assert ecdf_sup_distance([1, 2, 3], [1, 2, 3]) == 0
        assert ecdf_sup_distance([0, 0], [1, 1]) == 1
        assert ecdf_sup_distance([0, 1], [1, 1]) == pytest.approx(0.5)
