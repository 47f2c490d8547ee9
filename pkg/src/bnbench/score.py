"""Model-selection scores and whole-model fit statistics.

Two decomposable local scores drive the greedy searches (BDeu and a
penalized discrete log-likelihood BIC); the whole-model statistics
(deviance Chi^2, degrees of freedom, p, and the Chi^2 - Df*ln(N) selection
score) grade a fitted network against a dataset.  Natural logarithms
throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import gammaln
from scipy.stats import chi2 as chi2_dist

from .data import Dataset
from .graph import MixedGraph
from .model import DiscreteBN, _parent_codes

MAX_FREE_PARAMS = 1 << 62
CELL_FLOOR = 1e-12


@dataclass(frozen=True)
class LocalScoreParams:
    sample_prior: float = 1.0
    structure_prior: float = 1.0
    penalty_discount: float = 1.0

    def __post_init__(self):
        if min(self.sample_prior, self.structure_prior, self.penalty_discount) <= 0:
            raise ValueError("score parameters must be positive")


@dataclass(frozen=True)
class ModelStats:
    chi2: float
    df: int
    p_value: float
    bic: float
    n: int
    skipped_cells: int = 0

    @property
    def negative_df(self) -> bool:
        return self.df < 0


class Chi2Deviance(NamedTuple):
    value: float
    skipped_cells: int


def free_parameters(g: MixedGraph, arities: Sequence[int]) -> int:
    """f = sum over nodes of (k_i - 1) * prod of parent arities."""
    if len(arities) != g.n:
        raise ValueError("arities must match node count")
    if not g.all_edges_directed():
        raise ValueError("free_parameters expects a DAG")
    total = 0
    for i in range(g.n):
        q = 1
        for p in g.parents(i):
            q *= int(arities[p])
        total += (int(arities[i]) - 1) * q
        if total > MAX_FREE_PARAMS:
            raise OverflowError("free parameter count exceeds 2^62")
    return total


def degrees_of_freedom(m: int, f: int) -> int:
    """m(m-1)/2 - f; negative values are legal and reported as-is."""
    if m < 1:
        raise ValueError("need at least one variable")
    return m * (m - 1) // 2 - f


def chi2_deviance(bn: DiscreteBN, d: Dataset) -> Chi2Deviance:
    """Sum of (D - E)^2 / E over the distinct observed joint cells.

    D is the observed count of the cell, E = N * P(cell) under the model.
    Cells with E below a tiny floor are skipped and counted instead of
    blowing up the sum.
    """
    if not d.is_complete():
        raise ValueError("chi2_deviance needs complete data (impute first)")
    if d.arities != bn.arities:
        raise ValueError("dataset arities disagree with the model")
    uniq, counts = np.unique(d.rows, axis=0, return_counts=True)
    logp = np.zeros(uniq.shape[0])
    for i in range(bn.n):
        probs = bn.cpts[i].table[_parent_codes(bn, i, uniq), uniq[:, i]]
        with np.errstate(divide="ignore"):
            logp += np.log(probs)
    expected = d.n * np.exp(logp)
    ok = expected >= CELL_FLOOR
    value = float((((counts[ok] - expected[ok]) ** 2) / expected[ok]).sum())
    return Chi2Deviance(value, int((~ok).sum()))


def model_stats(bn: DiscreteBN, d: Dataset) -> ModelStats:
    """Chi^2, Df, p and the selection score Chi^2 - Df*ln(N)."""
    chi2, skipped = chi2_deviance(bn, d)
    f = free_parameters(bn.graph, bn.arities)
    df = degrees_of_freedom(d.m, f)
    p = 1.0 if df <= 0 else float(chi2_dist.sf(chi2, df))
    bic = chi2 - df * math.log(d.n)
    return ModelStats(chi2, df, p, bic, d.n, skipped)


# -- decomposable local scores ------------------------------------------------


def _local_family_counts(
    d: Dataset, node: int, parents: Sequence[int]
) -> tuple[np.ndarray, int]:
    """(q, k) count matrix for node given parents over complete data."""
    k = d.variables[node].arity
    q = 1
    code = np.zeros(d.n, dtype=np.int64)
    for p in parents:
        code = code * d.variables[p].arity + d.rows[:, p]
        q *= d.variables[p].arity
    flat = code * k + d.rows[:, node]
    tab = np.bincount(flat, minlength=q * k).reshape(q, k)
    return tab, q


def bdeu_local(
    d: Dataset, node: int, parents: Sequence[int], params: LocalScoreParams
) -> float:
    """Standard BDeu with effective sample size = sample_prior.

    A structure-prior term |parents| * ln(sp / (m - 1)) is added when the
    structure prior differs from 1 (under the default it vanishes).
    """
    if not d.is_complete():
        raise ValueError("bdeu_local needs complete data")
    parents = sorted(parents)
    tab, q = _local_family_counts(d, node, parents)
    k = tab.shape[1]
    ess = params.sample_prior
    a_jk = ess / (q * k)
    a_j = ess / q
    nj = tab.sum(axis=1)
    score = float(
        (gammaln(a_j) - gammaln(a_j + nj)).sum()
        + (gammaln(a_jk + tab) - gammaln(a_jk)).sum()
    )
    if params.structure_prior != 1.0 and d.m > 1:
        score += len(parents) * math.log(params.structure_prior / (d.m - 1))
    return score


def bic_local(
    d: Dataset, node: int, parents: Sequence[int], params: LocalScoreParams
) -> float:
    """Maximized log-likelihood minus penalty_discount * (params/2) * ln N."""
    if not d.is_complete():
        raise ValueError("bic_local needs complete data")
    parents = sorted(parents)
    tab, q = _local_family_counts(d, node, parents)
    k = tab.shape[1]
    nj = tab.sum(axis=1, keepdims=True)
    nz = tab > 0
    ratios = np.zeros_like(tab, dtype=float)
    ratios[nz] = tab[nz] / np.broadcast_to(nj, tab.shape)[nz]
    ll = float((tab[nz] * np.log(ratios[nz])).sum())
    n_params = (k - 1) * q
    return ll - params.penalty_discount * (n_params / 2.0) * math.log(d.n)


class LocalScore:
    """Cached decomposable score over one dataset (run-confined cache)."""

    def __init__(self, d: Dataset, params: LocalScoreParams, kind: str = "bdeu"):
        if kind not in ("bdeu", "bic"):
            raise ValueError(f"unknown score kind {kind!r}")
        if not d.is_complete():
            raise ValueError("score-based search needs complete data")
        self.data = d
        self.params = params
        self.kind = kind
        self.n_vars = d.m
        self._cache: dict[tuple[int, frozenset[int]], float] = {}

    def local(self, node: int, parents) -> float:
        key = (node, frozenset(parents))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        fn = bdeu_local if self.kind == "bdeu" else bic_local
        val = fn(self.data, node, sorted(parents), self.params)
        self._cache[key] = val
        return val

    def total(self, g: MixedGraph) -> float:
        return sum(self.local(i, g.parents(i)) for i in range(self.n_vars))


class MeanScore:
    """Arithmetic mean of per-dataset local scores (multi-dataset search)."""

    def __init__(self, scores: Sequence[LocalScore]):
        if not scores:
            raise ValueError("need at least one score")
        if len({s.n_vars for s in scores}) != 1:
            raise ValueError("datasets disagree on variable count")
        self.scores = list(scores)
        self.n_vars = scores[0].n_vars

    def local(self, node: int, parents) -> float:
        return sum(s.local(node, parents) for s in self.scores) / len(self.scores)

    def total(self, g: MixedGraph) -> float:
        return sum(self.local(i, g.parents(i)) for i in range(self.n_vars))
