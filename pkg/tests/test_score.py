import math

import numpy as np
import pytest
from scipy.special import gammaln

from bnbench.data import Dataset, Variable, dataset_from_columns
from bnbench.graph import MixedGraph, graph_from_arcs
from bnbench.model import CPT, DiscreteBN, forward_sample, mle_fit
from bnbench.score import (
    LocalScore,
    LocalScoreParams,
    MeanScore,
    bdeu_local,
    bic_local,
    chi2_deviance,
    degrees_of_freedom,
    free_parameters,
    model_stats,
)


def binary_dataset(columns):
    return dataset_from_columns({k: [str(v) for v in col] for k, col in columns.items()})


class TestFreeParameters:
    def test_no_edges(self):
        g = MixedGraph(["A", "B", "C"])
        assert free_parameters(g, [2, 2, 2]) == 3

    def test_binary_collider(self):
        g = graph_from_arcs(["A", "B", "C"], [(0, 2), (1, 2)])
        assert free_parameters(g, [2, 2, 2]) == 1 + 1 + 4

    def test_ternary_parents(self):
        g = graph_from_arcs(["A", "B", "C"], [(0, 2), (1, 2)])
        assert free_parameters(g, [3, 3, 4]) == 2 + 2 + (4 - 1) * 9

    def test_overflow_guard(self):
        n = 15
        g = MixedGraph([f"X{i}" for i in range(n)])
        for i in range(n - 1):
            g.add_directed(i, n - 1)  # one node with 14 arity-32 parents
        with pytest.raises(OverflowError):
            free_parameters(g, [32] * n)


class TestDegreesOfFreedom:
    def test_zero(self):
        assert degrees_of_freedom(3, 3) == 0

    def test_large(self):
        assert degrees_of_freedom(52, 0) == 1326

    def test_negative_allowed(self):
        assert degrees_of_freedom(2, 3) == -2


class TestChi2Deviance:
    def test_saturated_single_variable(self):
        d = binary_dataset({"a": [0, 0, 0, 1]})
        bn = mle_fit(MixedGraph(["a"]), d)
        value, skipped = chi2_deviance(bn, d)
        assert value == pytest.approx(0.0, abs=1e-12)
        assert skipped == 0

    def test_uniform_model_75_25(self):
        d = binary_dataset({"a": [0] * 75 + [1] * 25})
        bn = DiscreteBN(MixedGraph(["a"]), [CPT(0, (), np.array([[0.5, 0.5]]))])
        value, _ = chi2_deviance(bn, d)
        assert value == pytest.approx(25.0)

    def test_zero_probability_cells_skipped(self):
        d = binary_dataset({"a": [0, 1]})
        bn = DiscreteBN(MixedGraph(["a"]), [CPT(0, (), np.array([[1.0, 0.0]]))])
        value, skipped = chi2_deviance(bn, d)
        assert skipped == 1
        assert value == pytest.approx(2.0 * (1 - 2) ** 2 / 2.0 + 0)  # only the a=0 cell

    def test_nonnegative(self):
        rng = np.random.default_rng(6)
        g = graph_from_arcs(["a", "b"], [(0, 1)])
        bn = DiscreteBN(
            g,
            [
                CPT(0, (), np.array([[0.3, 0.7]])),
                CPT(1, (0,), np.array([[0.9, 0.1], [0.2, 0.8]])),
            ],
        )
        d = forward_sample(bn, 500, seed=8)
        value, _ = chi2_deviance(bn, d)
        assert value >= 0


class TestModelStats:
    def test_bic_is_chi2_minus_df_log_n(self):
        d = binary_dataset({"a": [0] * 60 + [1] * 40, "b": [0, 1] * 50})
        bn = mle_fit(graph_from_arcs(["a", "b"], [(0, 1)]), d)
        s = model_stats(bn, d)
        assert s.bic == s.chi2 - s.df * math.log(d.n)  # bit-level identity

    def test_nonpositive_df_gives_p_one(self):
        d = binary_dataset({"a": [0, 1] * 10, "b": [0, 0, 1, 1] * 5})
        g = graph_from_arcs(["a", "b"], [(0, 1)])
        s = model_stats(mle_fit(g, d), d)
        assert s.df == 1 - 3  # m(m-1)/2 - f = 1 - (1 + 2)
        assert s.negative_df and s.p_value == 1.0

    def test_zero_chi2_gives_p_one(self):
        d = binary_dataset({"a": [0] * 8 + [1] * 8, "b": [0, 1] * 8})
        full = MixedGraph(["a", "b", "c", "d"])
        # independent model over 4 binary vars: df = 6 - 4 > 0
        d4 = binary_dataset(
            {
                "a": [0, 1] * 8,
                "b": [0, 0, 1, 1] * 4,
                "c": [0] * 8 + [1] * 8,
                "d": [0, 1, 1, 0] * 4,
            }
        )
        s = model_stats(mle_fit(full, d4), d4)
        assert s.df > 0
        if s.chi2 == 0:
            assert s.p_value == 1.0


class TestBDeu:
    def test_single_positive_count(self):
        d = binary_dataset({"a": [0, 1]})
        # counts (1, 0): score with ess=1 is ln(1/2)
        d_one = Dataset([Variable("a", ("0", "1"))], np.array([[0]], dtype=np.int32))
        val = bdeu_local(d_one, 0, [], LocalScoreParams())
        assert val == pytest.approx(math.log(0.5), rel=1e-12)

    def test_gamma_identity_zero_counts(self):
        # with all-zero counts every gamma term cancels
        a_jk, a_j = 0.25, 0.5
        zero = (gammaln(a_j) - gammaln(a_j)) + 2 * (gammaln(a_jk) - gammaln(a_jk))
        assert zero == 0.0

    def test_decomposability(self):
        rng = np.random.default_rng(77)
        rows = rng.integers(0, 2, size=(200, 3)).astype(np.int32)
        d = Dataset([Variable(n, ("0", "1")) for n in "abc"], rows)
        g = graph_from_arcs(["a", "b", "c"], [(0, 1), (1, 2)])
        p = LocalScoreParams()
        total = sum(bdeu_local(d, i, sorted(g.parents(i)), p) for i in range(3))
        score = LocalScore(d, p, "bdeu")
        assert total == pytest.approx(score.total(g), rel=1e-12)

    def test_score_equivalence_chain_class(self):
        rng = np.random.default_rng(15)
        rows = rng.integers(0, 2, size=(300, 3)).astype(np.int32)
        rows[:, 1] = (rows[:, 0] + (rng.random(300) < 0.2)) % 2
        rows[:, 2] = (rows[:, 1] + (rng.random(300) < 0.3)) % 2
        d = Dataset([Variable(n, ("0", "1")) for n in "abc"], rows)
        members = [
            graph_from_arcs(["a", "b", "c"], [(0, 1), (1, 2)]),
            graph_from_arcs(["a", "b", "c"], [(2, 1), (1, 0)]),
            graph_from_arcs(["a", "b", "c"], [(1, 0), (1, 2)]),
        ]
        p = LocalScoreParams()
        totals = [LocalScore(d, p, "bdeu").total(g) for g in members]
        assert max(totals) - min(totals) < 1e-9

    def test_structure_prior_term(self):
        rng = np.random.default_rng(5)
        rows = rng.integers(0, 2, size=(50, 3)).astype(np.int32)
        d = Dataset([Variable(n, ("0", "1")) for n in "abc"], rows)
        base = bdeu_local(d, 0, [1], LocalScoreParams())
        shifted = bdeu_local(d, 0, [1], LocalScoreParams(structure_prior=2.0))
        assert shifted - base == pytest.approx(math.log(2.0 / 2), rel=1e-12)


class TestBicLocal:
    def test_even_split(self):
        d = binary_dataset({"a": [0] * 50 + [1] * 50})
        val = bic_local(d, 0, [], LocalScoreParams())
        assert val == pytest.approx(100 * math.log(0.5) - 0.5 * math.log(100), rel=1e-9)

    def test_deterministic_column(self):
        d = Dataset([Variable("a", ("0", "1"))], np.zeros((100, 1), dtype=np.int32))
        val = bic_local(d, 0, [], LocalScoreParams())
        assert val == pytest.approx(-0.5 * math.log(100), rel=1e-9)

    def test_independent_parent_does_not_help(self):
        rng = np.random.default_rng(99)
        rows = rng.integers(0, 2, size=(10_000, 2)).astype(np.int32)
        d = Dataset([Variable(n, ("0", "1")) for n in "ab"], rows)
        p = LocalScoreParams()
        assert bic_local(d, 1, [0], p) <= bic_local(d, 1, [], p)

    def test_penalty_discount(self):
        d = binary_dataset({"a": [0] * 50 + [1] * 50})
        p1 = bic_local(d, 0, [], LocalScoreParams())
        p2 = bic_local(d, 0, [], LocalScoreParams(penalty_discount=2.0))
        assert p1 - p2 == pytest.approx(0.5 * math.log(100), rel=1e-9)


def test_mean_score_single_is_identity():
    rng = np.random.default_rng(1)
    rows = rng.integers(0, 2, size=(80, 2)).astype(np.int32)
    d = Dataset([Variable(n, ("0", "1")) for n in "ab"], rows)
    p = LocalScoreParams()
    single = LocalScore(d, p, "bdeu")
    mean = MeanScore([LocalScore(d, p, "bdeu")])
    assert mean.local(1, [0]) == single.local(1, [0])  # bitwise


def test_params_validation():
    with pytest.raises(ValueError):
        LocalScoreParams(sample_prior=0.0)
    with pytest.raises(ValueError):
        LocalScore(dataset_from_columns({"a": ["0", "1"]}), LocalScoreParams(), "nope")
