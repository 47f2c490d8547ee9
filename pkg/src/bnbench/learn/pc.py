"""The PC family: skeleton search, collider orientation, Meek closure.

Three collider rules cover the published variants:

* ``sepset``     - classic PC: orient x -> y <- z iff y is outside the
                   recorded separating set of (x, z).
* ``conservative`` - CPC voting: re-test all subsets of adj(x) and adj(z);
                   collider only if y appears in no separating subset,
                   definite noncollider if in all, otherwise ambiguous
                   (left unoriented).
* ``maxp``       - among candidate conditioning sets pick the one with the
                   largest p-value; collider iff y is outside it.  The
                   heuristic bounds the candidate size by maxp_depth.

Conflicting collider orientations are resolved first-come in ascending
(x, z) order; later conflicting arrows are dropped with a warning.
"""

from __future__ import annotations

import warnings
from itertools import combinations

from ..data import Dataset
from ..graph import ARROW, MixedGraph, has_directed_path, meek_closure, unshielded_triples
from ..indtest import CITest, SepsetMap
from .fas import _tester_for, fas
from .params import CONSERVATIVE, MAXP, SEPSET, PcParams

COLLIDER = "collider"
NONCOLLIDER = "noncollider"
AMBIGUOUS = "ambiguous"


def _subset_pool(g: MixedGraph, x: int, z: int, max_size: int | None):
    """Candidate conditioning sets: subsets of adj(x)\\{z} and adj(z)\\{x}."""
    seen: set[frozenset[int]] = set()
    pool: list[tuple[int, ...]] = []
    for a, b in ((x, z), (z, x)):
        cands = sorted(g.neighbors(a) - {b})
        top = len(cands) if max_size is None else min(len(cands), max_size)
        for size in range(top + 1):
            for cond in combinations(cands, size):
                key = frozenset(cond)
                if key not in seen:
                    seen.add(key)
                    pool.append(cond)
    return pool


def _vote_conservative(g, tester, x, y, z, depth) -> str:
    max_size = None if depth < 0 else depth
    separating = [
        cond
        for cond in _subset_pool(g, x, z, max_size)
        if tester(x, z, cond).independent
    ]
    if not separating:
        return AMBIGUOUS
    with_y = sum(1 for cond in separating if y in cond)
    if with_y == 0:
        return COLLIDER
    if with_y == len(separating):
        return NONCOLLIDER
    return AMBIGUOUS


def _vote_maxp(g, tester, x, y, z, p: PcParams) -> str:
    if p.maxp_heuristic:
        max_size = p.maxp_depth
    else:
        max_size = None if p.depth < 0 else p.depth
    best_p, best_cond = -1.0, None
    for cond in _subset_pool(g, x, z, max_size):
        res = tester(x, z, cond)
        if res.p_value > best_p:
            best_p, best_cond = res.p_value, cond
    if best_cond is None or best_p <= p.alpha:
        return AMBIGUOUS  # nothing separates the pair at this level
    return COLLIDER if y not in best_cond else NONCOLLIDER


def orient_colliders(
    skeleton: MixedGraph,
    sepsets: SepsetMap,
    p: PcParams,
    tester: CITest | None = None,
) -> tuple[MixedGraph, list[tuple[int, int, int]], int]:
    """Orient unshielded colliders on a copy of the skeleton.

    Returns (pdag, ambiguous_triples, conflict_count).
    """
    g = skeleton.copy()
    ambiguous: list[tuple[int, int, int]] = []
    conflicts = 0
    triples = sorted(unshielded_triples(skeleton), key=lambda t: (t[0], t[2], t[1]))
    for x, y, z in triples:
        if p.collider_rule == SEPSET:
            cond = sepsets.get(x, z)
            verdict = (
                COLLIDER if cond is not None and y not in cond else NONCOLLIDER
            )
        elif p.collider_rule == CONSERVATIVE:
            verdict = _vote_conservative(g, tester, x, y, z, p.depth)
        elif p.collider_rule == MAXP:
            verdict = _vote_maxp(g, tester, x, y, z, p)
        else:
            raise ValueError(f"unknown collider rule {p.collider_rule!r}")
        if verdict == AMBIGUOUS:
            ambiguous.append((x, y, z))
            continue
        if verdict != COLLIDER:
            continue
        for tail in (x, z):
            if g.is_undirected_edge(tail, y):
                if has_directed_path(g, y, tail):
                    conflicts += 1  # would close a directed cycle
                else:
                    g.set_endpoint(tail, y, ARROW)
            elif not g.is_directed_edge(tail, y):
                conflicts += 1  # earlier orientation wins
    return g, ambiguous, conflicts


def pc(
    d: Dataset | None,
    p: PcParams | None = None,
    test: CITest | None = None,
    names: list[str] | None = None,
) -> MixedGraph:
    """Pattern search: FAS skeleton, collider orientation, Meek closure."""
    p = p or PcParams()
    tester = _tester_for(d, p, test)
    skeleton, sepsets = fas(d, p, tester, names)
    pdag, _, conflicts = orient_colliders(skeleton, sepsets, p, tester)
    if conflicts:
        warnings.warn(
            f"pc: {conflicts} conflicting collider orientation(s) dropped",
            RuntimeWarning,
            stacklevel=2,
        )
    return meek_closure(pdag)
