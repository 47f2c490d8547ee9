"""Graph-comparison and predictive-accuracy metrics.

Arc bookkeeping against a reference DAG uses four counters: matched arcs
(same orientation), reversed arcs (same skeleton pair, opposite direction),
deleted arcs (reference pair absent from the learned skeleton) and added
arcs (learned pairs absent from the reference skeleton), so m + r + d
always equals the reference arc count.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .graph import MixedGraph


@dataclass(frozen=True)
class ArcComparison:
    a: int  # added
    d: int  # deleted
    r: int  # reversed
    m: int  # matched
    t: int  # reference arc count

    def __post_init__(self):
        if min(self.a, self.d, self.r, self.m, self.t) < 0:
            raise ValueError("arc counts must be non-negative")
        if self.m + self.r + self.d != self.t:
            raise ValueError(
                f"m + r + d must equal t ({self.m}+{self.r}+{self.d} != {self.t})"
            )


def arc_comparison(learned: MixedGraph, reference: MixedGraph) -> ArcComparison:
    """Classify every reference arc as matched/reversed/deleted and count
    learned arcs whose skeleton pair the reference lacks as added."""
    if learned.names != reference.names:
        raise ValueError("graphs must share one node set")
    ref_arcs = reference.directed_edges()
    learned_arcs = set(learned.directed_edges())
    learned_pairs = learned.skeleton_pairs()
    ref_pairs = reference.skeleton_pairs()
    m = r = d = 0
    for u, v in ref_arcs:
        if (u, v) in learned_arcs:
            m += 1
        elif (v, u) in learned_arcs:
            r += 1
        else:
            d += 1
    a = sum(1 for pair in learned_pairs if pair not in ref_pairs)
    return ArcComparison(a=a, d=d, r=r, m=m, t=len(ref_arcs))


def ddm(c: ArcComparison) -> float:
    """(m + r/2 - a - d) / t; 1 means perfect agreement."""
    if c.t < 1:
        raise ValueError("DDM undefined for an empty reference graph")
    return (c.m + c.r / 2.0 - c.a - c.d) / c.t


def shd(learned: MixedGraph, reference: MixedGraph) -> int:
    """Skeleton additions + deletions + orientation mismatches on shared pairs."""
    if learned.names != reference.names:
        raise ValueError("graphs must share one node set")
    lp = learned.skeleton_pairs()
    rp = reference.skeleton_pairs()
    dist = len(lp - rp) + len(rp - lp)
    for u, v in lp & rp:
        if (
            learned.endpoint(u, v) is not reference.endpoint(u, v)
            or learned.endpoint(v, u) is not reference.endpoint(v, u)
        ):
            dist += 1
    return dist


# -- predictive metrics -----------------------------------------------------


@dataclass
class PredictionReport:
    target: str
    per_state_auc: list[float]  # NaN where undefined
    summary_auc: float  # prevalence-weighted mean of defined per-state AUCs
    cc: float  # percentage in [0, 100]
    excluded_rows: int = 0
    notes: list[str] = field(default_factory=list)


def auc_ovr(
    posteriors: np.ndarray, labels: np.ndarray
) -> tuple[list[float], float]:
    """One-vs-rest AUCs per state via the Mann-Whitney statistic (midranks).

    States without both a positive and a negative example get NaN and are
    left out of the prevalence-weighted summary.  Rows with NaN posteriors
    or negative labels are ignored.
    """
    posteriors = np.asarray(posteriors, dtype=float)
    labels = np.asarray(labels)
    ok = (labels >= 0) & np.isfinite(posteriors).all(axis=1)
    posteriors, labels = posteriors[ok], labels[ok]
    n, k = posteriors.shape
    per_state: list[float] = []
    weights: list[float] = []
    for s in range(k):
        pos = labels == s
        npos = int(pos.sum())
        nneg = n - npos
        if npos == 0 or nneg == 0:
            per_state.append(float("nan"))
            weights.append(0.0)
            continue
        ranks = rankdata(posteriors[:, s])
        u = ranks[pos].sum() - npos * (npos + 1) / 2.0
        per_state.append(float(u / (npos * nneg)))
        weights.append(npos / n)
    wsum = sum(weights)
    if wsum <= 0:
        return per_state, float("nan")
    summary = sum(
        w * v for w, v in zip(weights, per_state) if not math.isnan(v)
    ) / wsum
    return per_state, float(summary)


def cc(predictions: Sequence[int], labels: Sequence[int]) -> float:
    """Percentage of correct argmax predictions among scored rows.

    Rows with prediction -1 (excluded) do not count toward the denominator.
    """
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    scored = predictions >= 0
    n = int(scored.sum())
    if n == 0:
        raise ValueError("no scored rows")
    return 100.0 * float((predictions[scored] == labels[scored]).sum()) / n


# -- rank summaries ------------------------------------------------------------


def rank_summary(
    tests: Sequence[Sequence[tuple[str, float]]], k: int = 3
) -> dict[str, float]:
    """Share of tests in which each model's value reaches the top-k set.

    The top-k set includes every model tied with the k-th best value.  A
    model missing from a test (or with a NaN value there) is excluded from
    that test's denominator for that model.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    appearances: Counter[str] = Counter()
    tops: Counter[str] = Counter()
    for rows in tests:
        scored = [(name, v) for name, v in rows if not math.isnan(v)]
        if not scored:
            continue
        values = sorted((v for _, v in scored), reverse=True)
        kth = values[min(k, len(values)) - 1]
        for name, v in scored:
            appearances[name] += 1
            if v >= kth:
                tops[name] += 1
    return {
        name: 100.0 * tops[name] / appearances[name] for name in sorted(appearances)
    }
