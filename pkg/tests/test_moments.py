import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import derangement_pair_probability, rejection_sample_substochastic
from tplots import MissingMomentTableError, SamplerConfig, StructuralError, TSetSpec, moment_tables
from tplots.moments import (
    MomentTable,
    class_sums,
    derangement_count,
    find_table,
    get_or_compute,
    pair_counts,
    permutation_weights,
    save_table,
)

# Pr[sigma(a)=b and sigma(c)=d] over derangements, frozen from the enumeration oracle
FROZEN_PD = {
    4: {"same": Fraction(1, 3), "transposed": Fraction(1, 9), "chain": Fraction(1, 9), "distinct": Fraction(2, 9)},
    5: {"same": Fraction(1, 4), "transposed": Fraction(1, 22), "chain": Fraction(3, 44), "distinct": Fraction(1, 11)},
    6: {"same": Fraction(1, 5), "transposed": Fraction(9, 265), "chain": Fraction(11, 265), "distinct": Fraction(14, 265)},
}
REPRESENTATIVE = {
    "same": ((0, 1), (0, 1)),
    "transposed": ((0, 1), (1, 0)),
    "chain": ((0, 1), (2, 0)),
    "distinct": ((0, 1), (2, 3)),
}


def brute_class_sums(X, zero_diagonal):
    n = len(X)
    out = {}
    cells = [(i, j) for i in range(n) for j in range(n) if not (zero_diagonal and i == j)]
    for (i, j), (k, l) in itertools.product(cells, cells):
        if (i, j) == (k, l):
            c = "same"
        elif i == k:
            c = "row"
        elif j == l:
            c = "col"
        elif not zero_diagonal:
            c = "disjoint"
        elif (k, l) == (j, i):
            c = "transposed"
        elif k == j or l == i:
            c = "chain"
        else:
            c = "distinct"
        out[c] = out.get(c, 0.0) + X[i][j] * X[k][l]
    return out


class TestExactWeights:
    @pytest.mark.parametrize("n", [4, 5, 6])
    def test_derangement_weights_frozen(self, n):
        first, w = permutation_weights(n, True)
        assert first == pytest.approx(1 / (n - 1), rel=1e-15)
        for cls, value in FROZEN_PD[n].items():
            assert w[cls] == pytest.approx(float(value), rel=1e-14)
        assert w["row"] == w["col"] == 0

    @pytest.mark.parametrize("n", [4, 5])
    def test_frozen_values_match_enumeration(self, n):
        for cls, (a, b) in REPRESENTATIVE.items():
            assert derangement_pair_probability(n, a, b) == FROZEN_PD[n][cls]
        assert derangement_pair_probability(n, (0, 1), (1, 2)) == FROZEN_PD[n]["chain"]

    def test_permutation_weights(self):
        first, w = permutation_weights(5, False)
        assert first == 0.2 and w["same"] == 0.2 and w["disjoint"] == pytest.approx(1 / 20)

    def test_derangement_counts(self):
        assert [derangement_count(n) for n in range(1, 8)] == [0, 1, 2, 9, 44, 265, 1854]

    def test_weights_sum_to_pair_total(self):
        # sum over ordered pairs of E[s_ij s_kl] equals E[(sum s)^2] = n^2
        for n in range(3, 8):
            for zd in (False, True):
                _, w = permutation_weights(n, zd)
                counts = pair_counts(n, zd)
                assert sum(w[c] * counts[c] for c in w) == pytest.approx(n * n, rel=1e-12)


class TestClassSums:
    @pytest.mark.parametrize("zd", [False, True])
    def test_against_quadruple_loop(self, zd, rng):
        for n in (2, 3, 5):
            X = rng.random((n, n))
            fast = class_sums(X, zd)
            slow = brute_class_sums(X.tolist(), zd)
            for c, v in fast.items():
                assert float(v) == pytest.approx(slow.get(c, 0.0), rel=1e-12, abs=1e-12)

    def test_stacked_input(self, rng):
        X = rng.random((7, 4, 4))
        stacked = class_sums(X, True)
        for k in range(7):
            single = class_sums(X[k], True)
            for c in single:
                assert stacked[c][k] == pytest.approx(single[c])


class TestMonteCarloTables:
    def test_s_first_moment_is_one_over_n(self):
        t = moment_tables(TSetSpec("S", 5), SamplerConfig(seed=1), m=10**4)
        assert abs(t.first - 1 / 5) <= 3 * t.first_se + 1e-15
        # row and column sums are exactly 1, so the per-row second moment sum is fixed
        assert t.second["same"] + 4 * t.second["row"] == pytest.approx(1 / 5, rel=1e-9)

    def test_sd_first_moment(self):
        t = moment_tables(TSetSpec("S_d", 5), SamplerConfig(seed=2), m=10**4)
        assert abs(t.first - 1 / 4) <= 3 * t.first_se + 1e-15
        assert set(t.second) == {"same", "row", "col", "transposed", "chain", "distinct"}

    def test_a3_matches_rejection_oracle(self):
        t = moment_tables(TSetSpec("A", 3), SamplerConfig(seed=3), m=2 * 10**4)
        oracle = rejection_sample_substochastic(3, 2 * 10**4, np.random.default_rng(99))
        entries = oracle.reshape(len(oracle), -1).mean(axis=1)
        o_mean = entries.mean()
        o_se = entries.std(ddof=1) / math.sqrt(len(entries))
        assert abs(t.first - o_mean) <= 3 * math.hypot(t.first_se, o_se)
        o_same = (oracle ** 2).reshape(len(oracle), -1).mean(axis=1)
        se = o_same.std(ddof=1) / math.sqrt(len(o_same))
        assert abs(t.second["same"] - o_same.mean()) <= 3 * math.hypot(t.second_se["same"], se)

    def test_h_table_shapes(self):
        r = (0.5, 1.0, 1.5)
        t = moment_tables(TSetSpec("H", 3, r, r), SamplerConfig(seed=4), m=10**4)
        assert t.first.shape == (3, 3) and t.second.shape == (9, 9)
        assert np.allclose(t.second, t.second.T)
        assert np.allclose(np.diag(t.second).reshape(3, 3) >= t.first ** 2, True)

    def test_refuses_small_m_and_discrete(self):
        with pytest.raises(StructuralError):
            moment_tables(TSetSpec("S", 4), m=100)
        with pytest.raises(StructuralError):
            moment_tables(TSetSpec("P", 4))


class TestCache:
    def test_round_trip_and_lookup(self, tmp_path):
        tset = TSetSpec("A", 3)
        with pytest.raises(MissingMomentTableError, match="precompute"):
            find_table(tset, tmp_path)
        table = get_or_compute(tset, SamplerConfig(seed=5), m=10**4, directory=tmp_path)
        again = find_table(tset, tmp_path)
        assert again.to_dict() == table.to_dict()
        assert not again.matches(TSetSpec("A", 4))

    def test_h_tables_keyed_by_rates(self, tmp_path):
        a = TSetSpec("H", 3, (1.0, 1.0, 2.0), (1.0, 1.0, 1.0))
        b = TSetSpec("H", 3, (1.0, 2.0, 2.0), (1.0, 1.0, 1.0))
        save_table(moment_tables(a, SamplerConfig(seed=6), m=10**4), tmp_path)
        assert find_table(a, tmp_path).matches(a)
        with pytest.raises(MissingMomentTableError):
            find_table(b, tmp_path)

    def test_json_round_trip(self, tmp_path):
        table = MomentTable("S", 4, 1, 10**4, 0.25, 0.001, {"same": 0.1}, {"same": 0.01})
        table.save(tmp_path / "t.json")
        assert MomentTable.load(tmp_path / "t.json") == table
