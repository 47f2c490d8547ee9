"""Conditional-independence tests on discrete data, plus the d-separation
oracle used to validate constraint-based searches.

The data tests stratify on the conditioning set: within each configuration
of S a kx x ky table is formed and the statistic summed across strata.
Degrees of freedom count only rows/columns with positive margins, so empty
cells do not manufacture dependence.  Rows with a missing cell among
{x, y} | S are dropped (listwise deletion).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .data import MISSING, Dataset
from .graph import MixedGraph

TestKind = str  # "g2" or "chi2"


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    dof: int
    p_value: float
    independent: bool
    low_power: bool = False


class SepsetMap:
    """Separating sets recorded during adjacency search, keyed by pair."""

    def __init__(self):
        self._sets: dict[frozenset[int], tuple[tuple[int, ...], float]] = {}

    def record(self, x: int, y: int, cond: Iterable[int], p_value: float) -> None:
        self._sets[frozenset((x, y))] = (tuple(sorted(cond)), float(p_value))

    def has(self, x: int, y: int) -> bool:
        return frozenset((x, y)) in self._sets

    def get(self, x: int, y: int) -> tuple[int, ...] | None:
        hit = self._sets.get(frozenset((x, y)))
        return hit[0] if hit else None

    def p_value(self, x: int, y: int) -> float | None:
        hit = self._sets.get(frozenset((x, y)))
        return hit[1] if hit else None

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(tuple(sorted(k)) for k in self._sets)

    def __len__(self) -> int:
        return len(self._sets)


def _strata_tables(
    d: Dataset, x: int, y: int, cond: Sequence[int]
) -> tuple[np.ndarray, int]:
    """(u, kx, ky) count array over non-empty conditioning strata."""
    kx = d.variables[x].arity
    ky = d.variables[y].arity
    cols = [x, y, *cond]
    sub = d.rows[:, cols]
    if not d.is_complete():
        sub = sub[~(sub == MISSING).any(axis=1)]
    n_used = sub.shape[0]
    if n_used == 0:
        return np.zeros((0, kx, ky), dtype=np.int64), 0
    if cond:
        ar = tuple(d.variables[j].arity for j in cond)
        n_conf = int(np.prod(ar, dtype=np.int64))
        codes = np.ravel_multi_index(tuple(sub[:, 2:].T), ar)
        if n_conf <= 1 << 14:
            # dense strata: skip the sort inside np.unique, drop empty ones after
            flat = (codes * kx + sub[:, 0]) * ky + sub[:, 1]
            tab = np.bincount(flat, minlength=n_conf * kx * ky).reshape(n_conf, kx, ky)
            tab = tab[tab.sum(axis=(1, 2)) > 0]
            return tab.astype(np.int64), n_used
        _, strat = np.unique(codes, return_inverse=True)
        u = int(strat.max()) + 1
    else:
        strat = np.zeros(n_used, dtype=np.int64)
        u = 1
    flat = (strat * kx + sub[:, 0]) * ky + sub[:, 1]
    tab = np.bincount(flat, minlength=u * kx * ky).reshape(u, kx, ky)
    return tab.astype(np.int64), n_used


def ci_test(
    d: Dataset,
    x: int,
    y: int,
    cond: Sequence[int],
    alpha: float,
    kind: TestKind = "g2",
) -> CITestResult:
    """Test x _||_ y | cond with the G^2 likelihood ratio or Pearson chi-square.

    dof sums (rx-1)(ry-1) over strata, counting only rows/columns with a
    positive margin; dof = 0 yields p = 1 (judged independent, low power).
    """
    if x == y or x in cond or y in cond:
        raise ValueError("x, y must be distinct and outside the conditioning set")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if kind not in ("g2", "chi2"):
        raise ValueError(f"unknown test kind {kind!r}")
    tab, n_used = _strata_tables(d, x, y, cond)
    if n_used == 0:
        return CITestResult(0.0, 0, 1.0, True, low_power=True)
    rowm = tab.sum(axis=2)
    colm = tab.sum(axis=1)
    tot = tab.sum(axis=(1, 2))
    pos = tot > 0
    expected = np.zeros_like(tab, dtype=float)
    expected[pos] = (
        rowm[pos][:, :, None] * colm[pos][:, None, :] / tot[pos][:, None, None]
    )
    if kind == "g2":
        obs = tab.astype(float)
        nz = obs > 0
        stat = 2.0 * float((obs[nz] * np.log(obs[nz] / expected[nz])).sum())
    else:
        nz = expected > 0
        stat = float(((tab[nz] - expected[nz]) ** 2 / expected[nz]).sum())
    stat = max(stat, 0.0)
    rx = (rowm > 0).sum(axis=1)
    ry = (colm > 0).sum(axis=1)
    dof = int((np.maximum(rx - 1, 0) * np.maximum(ry - 1, 0)).sum())
    if dof <= 0:
        return CITestResult(stat, 0, 1.0, True, low_power=True)
    p = float(chi2_dist.sf(stat, dof))
    return CITestResult(stat, dof, p, p > alpha)


# -- d-separation oracle -----------------------------------------------------


def _ancestors_of(g: MixedGraph, seeds: Iterable[int]) -> set[int]:
    out = set(seeds)
    stack = list(out)
    while stack:
        v = stack.pop()
        for p in g.parents(v):
            if p not in out:
                out.add(p)
                stack.append(p)
    return out


def d_separated(g: MixedGraph, x: int, y: int, cond: Iterable[int]) -> bool:
    """Reachability test for d-separation of x and y given cond in a DAG."""
    z = set(cond)
    if x in z or y in z:
        raise ValueError("endpoints must not be in the conditioning set")
    anc_z = _ancestors_of(g, z) if z else set()
    # traverse (node, direction); "up" = arrived from a child, "down" = from a parent
    up, down = 0, 1
    visited = set()
    stack = [(x, up)]
    while stack:
        v, direction = stack.pop()
        if (v, direction) in visited:
            continue
        visited.add((v, direction))
        if v == y and v not in z:
            return False
        if direction == up and v not in z:
            for p in g.parents(v):
                stack.append((p, up))
            for c in g.children(v):
                stack.append((c, down))
        elif direction == down:
            if v not in z:
                for c in g.children(v):
                    stack.append((c, down))
            if v in anc_z:
                for p in g.parents(v):
                    stack.append((p, up))
    return True


def dsep_oracle(g: MixedGraph, x: int, y: int, cond: Sequence[int]) -> CITestResult:
    """Perfect CI information from a DAG: p = 1 when d-separated, else 0."""
    if d_separated(g, x, y, cond):
        return CITestResult(0.0, 0, 1.0, True)
    return CITestResult(float("inf"), 0, 0.0, False)


# -- test handles for the search algorithms ----------------------------------

CITest = Callable[[int, int, tuple[int, ...]], CITestResult]


class DataCITester:
    """Cached CI test over one dataset; results keyed by (pair, cond set)."""

    def __init__(
        self, d: Dataset, alpha: float, kind: TestKind = "g2", cache: bool = True
    ):
        self.data = d
        self.alpha = alpha
        self.kind = kind
        self.n_vars = d.m
        self._cache: dict | None = {} if cache else None
        self.calls = 0

    def __call__(self, x: int, y: int, cond: tuple[int, ...]) -> CITestResult:
        key = (min(x, y), max(x, y), frozenset(cond))
        if self._cache is not None and key in self._cache:
            return self._cache[key]
        self.calls += 1
        res = ci_test(self.data, x, y, cond, self.alpha, self.kind)
        if self._cache is not None:
            self._cache[key] = res
        return res


class OracleCITester:
    """CI handle answering from d-separation in a known DAG.

    ``observed`` optionally restricts the oracle to a subset of the DAG's
    nodes (queries use positions within that subset), so searches can be run
    as if the remaining nodes were latent.
    """

    def __init__(self, g: MixedGraph, observed: Sequence[int] | None = None):
        self.graph = g
        self.observed = list(observed) if observed is not None else list(range(g.n))
        self.n_vars = len(self.observed)
        self.calls = 0

    def __call__(self, x: int, y: int, cond: tuple[int, ...]) -> CITestResult:
        self.calls += 1
        obs = self.observed
        return dsep_oracle(self.graph, obs[x], obs[y], tuple(obs[c] for c in cond))
