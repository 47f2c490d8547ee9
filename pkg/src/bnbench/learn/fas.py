"""Fast adjacency search: the edge-elimination phase shared by the PC and
FCI families.

Starting from the complete undirected graph, conditioning sets of growing
size are drawn from the current adjacency sets of each edge's endpoints;
the first set whose test exceeds the significance level removes the edge
and is recorded as its separating set.  The stable variant freezes the
adjacency sets at the start of each depth level, which makes the surviving
skeleton independent of variable order.
"""

from __future__ import annotations

from itertools import combinations

from ..data import Dataset
from ..graph import MixedGraph
from ..indtest import CITest, DataCITester, SepsetMap
from .params import PcParams


def _tester_for(d: Dataset | None, p: PcParams, test: CITest | None) -> CITest:
    if test is not None:
        return test
    if d is None:
        raise ValueError("need a dataset or an explicit CI test handle")
    return DataCITester(d, p.alpha, p.test_kind)


def fas(
    d: Dataset | None,
    p: PcParams | None = None,
    test: CITest | None = None,
    names: list[str] | None = None,
) -> tuple[MixedGraph, SepsetMap]:
    """Undirected skeleton plus the separating sets that removed each edge."""
    p = p or PcParams()
    tester = _tester_for(d, p, test)
    n = tester.n_vars
    if names is None:
        names = d.names if d is not None else [f"X{i + 1}" for i in range(n)]
    g = MixedGraph(names)
    for x in range(n):
        for y in range(x + 1, n):
            g.add_undirected(x, y)
    sepsets = SepsetMap()
    max_depth = p.depth if p.depth >= 0 else max(n - 2, 0)

    level = 0
    while level <= max_depth:
        if p.stable:
            frozen = [g.neighbors(i) for i in range(n)]
            adj = lambda i: frozen[i]  # noqa: E731
        else:
            adj = g.neighbors
        for x in range(n):
            for y in range(x + 1, n):
                if not g.has_edge(x, y):
                    continue
                if _separate_edge(g, tester, sepsets, adj, x, y, level):
                    continue
        if all(g.degree(x) - 1 <= level for x in range(n)):
            break  # no adjacency set can fill a conditioning set of size level+1
        level += 1
    return g, sepsets


def _separate_edge(g, tester, sepsets, adj, x, y, level) -> bool:
    for a, b in ((x, y), (y, x)):
        cands = sorted(adj(a) - {b})
        if len(cands) < level:
            continue
        for cond in combinations(cands, level):
            res = tester(x, y, cond)
            if res.independent:
                g.remove_edge(x, y)
                sepsets.record(x, y, cond, res.p_value)
                return True
    return False
