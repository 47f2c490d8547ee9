"""The FCI family (FCI, RFCI, CFCI) and the hybrid GFCI.

All of them produce partial ancestral graphs.  The shared machinery is:

* circle-initialized skeleton plus collider rule R0 (optionally the
  conservative vote, which is what turns FCI into CFCI),
* the possible-d-sep pruning stage (full FCI only; RFCI substitutes its
  cheaper per-triple tests),
* the orientation rules R1-R4 applied to fixpoint, with the discriminating
  path rule bounded by ``max_discriminating_path``; the complete rule set
  adds R5-R10.

Marks are only ever refined from circles; a rule that wants to overwrite a
tail/arrow is counted as a conflict and ignored, so the closure terminates.
"""

from __future__ import annotations

from itertools import combinations

from ..data import Dataset
from ..graph import ARROW, CIRCLE, TAIL, MixedGraph, unshielded_triples
from ..indtest import CITest, DataCITester, SepsetMap
from .fas import fas
from .fges import fges
from .params import FciParams, FgesParams, PcParams
from .pc import AMBIGUOUS, COLLIDER, _vote_conservative


def _circle_graph(skeleton: MixedGraph) -> MixedGraph:
    g = MixedGraph(skeleton.names)
    for e in skeleton.edges():
        g.add_edge(e.a, e.b, CIRCLE, CIRCLE)
    return g


def _set_mark(pag: MixedGraph, a: int, b: int, mark) -> bool:
    """Refine the mark at b on edge a~b; only circles may change."""
    cur = pag.endpoint(a, b)
    if cur is mark or cur is None:
        return False
    if cur is CIRCLE:
        pag.set_endpoint(a, b, mark)
        return True
    return False


def _orient_r0(
    skeleton: MixedGraph,
    sepsets: SepsetMap,
    conservative: bool,
    tester: CITest | None,
    depth: int,
) -> tuple[MixedGraph, set[tuple[int, int, int]]]:
    """Circle graph with unshielded colliders oriented; returns ambiguous triples."""
    pag = _circle_graph(skeleton)
    ambiguous: set[tuple[int, int, int]] = set()
    for x, y, z in sorted(unshielded_triples(skeleton), key=lambda t: (t[0], t[2], t[1])):
        if conservative:
            verdict = _vote_conservative(skeleton, tester, x, y, z, depth)
            if verdict == AMBIGUOUS:
                ambiguous.add((x, y, z))
                continue
            is_collider = verdict == COLLIDER
        else:
            cond = sepsets.get(x, z)
            is_collider = cond is not None and y not in cond
        if is_collider:
            _set_mark(pag, x, y, ARROW)
            _set_mark(pag, z, y, ARROW)
    return pag, ambiguous


# -- possible-d-sep ------------------------------------------------------------


def possible_d_sep(pag: MixedGraph, x: int) -> set[int]:
    """Nodes reachable from x along paths whose interior vertices are each
    either a collider on the path or part of a triangle."""
    out: set[int] = set()
    visited: set[tuple[int, int]] = set()
    stack = [(x, y) for y in sorted(pag.neighbors(x))]
    visited.update(stack)
    while stack:
        prev, cur = stack.pop()
        out.add(cur)
        for nxt in sorted(pag.neighbors(cur)):
            if nxt == prev or nxt == x or (cur, nxt) in visited:
                continue
            triangle = pag.has_edge(prev, nxt)
            collider = (
                pag.endpoint(prev, cur) is ARROW and pag.endpoint(nxt, cur) is ARROW
            )
            if triangle or collider:
                visited.add((cur, nxt))
                stack.append((cur, nxt))
    out.discard(x)
    return out


# Possible-d-sep sets routinely span most of the graph, and with the
# degenerate-stratum dof reduction any huge conditioning set tests as
# vacuously independent (dof 0 => p = 1), so an unbounded subset sweep
# would both blow up combinatorially and delete true edges.  Unless the
# caller requests a depth explicitly, pds conditioning sets are capped.
PDS_DEPTH_DEFAULT = 3


def _pds_prune(
    pag: MixedGraph, sepsets: SepsetMap, tester: CITest, depth: int
) -> bool:
    """Remove edges separable by subsets of either endpoint's possible-d-sep
    set (sizes >= 1; the empty set was covered by the adjacency search)."""
    pds = {x: possible_d_sep(pag, x) for x in range(pag.n)}
    cap = depth if depth >= 0 else PDS_DEPTH_DEFAULT
    removed = False
    for e in pag.edges():
        x, y = e.a, e.b
        if not pag.has_edge(x, y):
            continue
        if _pds_separate(pag, sepsets, tester, pds, x, y, cap):
            removed = True
    return removed


def _pds_separate(pag, sepsets, tester, pds, x, y, cap) -> bool:
    for a, b in ((x, y), (y, x)):
        cands = sorted(pds[a] - {a, b})
        for size in range(1, min(len(cands), cap) + 1):
            for cond in combinations(cands, size):
                res = tester(x, y, cond)
                if res.independent:
                    pag.remove_edge(x, y)
                    sepsets.record(x, y, cond, res.p_value)
                    return True
    return False


# -- RFCI's substitute for the pds stage ----------------------------------------


def _rfci_triple_checks(
    skeleton: MixedGraph, sepsets: SepsetMap, tester: CITest
) -> None:
    """Re-test both edges of every unshielded triple given sepset(x, z)\\{y};
    independent edges are removed (with the new sepset) and the sweep repeats."""
    changed = True
    while changed:
        changed = False
        for x, y, z in unshielded_triples(skeleton):
            base = sepsets.get(x, z)
            if base is None:
                continue
            cond_pool = set(base) - {y}
            for a in (x, z):
                if not skeleton.has_edge(a, y):
                    continue
                cond = tuple(sorted(cond_pool - {a}))
                res = tester(a, y, cond)
                if res.independent:
                    skeleton.remove_edge(a, y)
                    sepsets.record(a, y, cond, res.p_value)
                    changed = True


# -- orientation rules -----------------------------------------------------------


class _RuleState:
    def __init__(self, pag: MixedGraph, sepsets: SepsetMap, p: FciParams, ambiguous):
        self.pag = pag
        self.sepsets = sepsets
        self.p = p
        self.ambiguous = set(ambiguous)

    def mark(self, a: int, b: int, m) -> bool:
        return _set_mark(self.pag, a, b, m)


def _rule1(s: _RuleState) -> bool:
    # a *-> b o-* c, a and c nonadjacent  =>  b -> c
    g = s.pag
    changed = False
    for b in range(g.n):
        into_b = [a for a in sorted(g.neighbors(b)) if g.endpoint(a, b) is ARROW]
        for a in into_b:
            for c in sorted(g.neighbors(b)):
                if c == a or g.has_edge(a, c):
                    continue
                if g.endpoint(c, b) is not CIRCLE:
                    continue
                key = (min(a, c), b, max(a, c))
                if key in s.ambiguous:
                    continue
                changed |= s.mark(c, b, TAIL)
                changed |= s.mark(b, c, ARROW)
    return changed


def _rule2(s: _RuleState) -> bool:
    # (a -> b *-> c) or (a *-> b -> c), and a *-o c  =>  arrow at c on a~c
    g = s.pag
    changed = False
    for a in range(g.n):
        for b in sorted(g.neighbors(a)):
            if g.endpoint(a, b) is not ARROW:
                continue
            for c in sorted(g.neighbors(b)):
                if c == a or g.endpoint(b, c) is not ARROW:
                    continue
                if g.endpoint(a, c) is not CIRCLE:
                    continue
                if g.endpoint(b, a) is TAIL or g.endpoint(c, b) is TAIL:
                    changed |= s.mark(a, c, ARROW)
    return changed


def _rule3(s: _RuleState) -> bool:
    # a *-> b <-* c, a *-o d o-* c, a,c nonadjacent, d *-o b  =>  arrow at b on d~b
    g = s.pag
    changed = False
    for b in range(g.n):
        spokes = [a for a in sorted(g.neighbors(b)) if g.endpoint(a, b) is ARROW]
        for a, c in combinations(spokes, 2):
            if g.has_edge(a, c):
                continue
            for d in sorted(g.neighbors(b)):
                if d in (a, c) or g.endpoint(d, b) is not CIRCLE:
                    continue
                if g.endpoint(a, d) is CIRCLE and g.endpoint(c, d) is CIRCLE:
                    changed |= s.mark(d, b, ARROW)
    return changed


def _discriminating_paths(g: MixedGraph, theta: int, b: int, c: int, max_len: int):
    """Paths <theta, ..., a, b, c> whose interior nodes are colliders on the
    path and parents of c.  Yields each valid path once (DFS order)."""
    allowed = {
        v
        for v in range(g.n)
        if g.endpoint(c, v) is TAIL and g.endpoint(v, c) is ARROW
    }
    # path grows from b backwards toward theta
    stack = [(b, [b])]
    while stack:
        cur, path = stack.pop()
        for nxt in sorted(g.neighbors(cur), reverse=True):
            if nxt in path or nxt == c:
                continue
            if nxt == theta:
                full = [theta] + path[::-1] + [c]
                if len(full) >= 4 and (max_len < 0 or len(full) - 1 <= max_len):
                    if _valid_ddp(g, full):
                        yield full
                continue
            if nxt not in allowed:
                continue
            # interior node must be a collider on the path so far
            if g.endpoint(nxt, cur) is not ARROW and cur != b:
                continue
            if max_len >= 0 and len(path) + 2 > max_len:
                continue
            stack.append((nxt, path + [nxt]))


def _valid_ddp(g: MixedGraph, path: list[int]) -> bool:
    for i in range(1, len(path) - 2):
        prev, mid, nxt = path[i - 1], path[i], path[i + 1]
        if g.endpoint(prev, mid) is not ARROW or g.endpoint(nxt, mid) is not ARROW:
            return False
    return True


def _rule4(s: _RuleState) -> bool:
    # discriminating path <theta,...,a,b,c> with circle at b on b~c:
    # b in sepset(theta, c) => b -> c; otherwise a <-> b <-> c
    g = s.pag
    changed = False
    for c in range(g.n):
        for b in sorted(g.neighbors(c)):
            if g.endpoint(c, b) is not CIRCLE:
                continue
            for theta in range(g.n):
                if theta in (b, c) or g.has_edge(theta, c):
                    continue
                hit = next(
                    _discriminating_paths(
                        g, theta, b, c, s.p.max_discriminating_path
                    ),
                    None,
                )
                if hit is None:
                    continue
                sep = s.sepsets.get(theta, c)
                if sep is not None and b in sep:
                    changed |= s.mark(c, b, TAIL)
                    changed |= s.mark(b, c, ARROW)
                elif sep is not None:
                    a = hit[-3]
                    changed |= s.mark(a, b, ARROW)
                    changed |= s.mark(b, a, ARROW)
                    changed |= s.mark(b, c, ARROW)
                    changed |= s.mark(c, b, ARROW)
    return changed


def _is_uncovered(g: MixedGraph, path: list[int]) -> bool:
    return all(
        not g.has_edge(path[i - 1], path[i + 1]) for i in range(1, len(path) - 1)
    )


def _pd_step(g: MixedGraph, u: int, v: int) -> bool:
    """Edge u~v can be oriented u -> v (no arrowhead at u, no tail at v)."""
    return g.endpoint(v, u) is not ARROW and g.endpoint(u, v) is not TAIL


def _uncovered_pd_path_exists(
    g: MixedGraph, src: int, dst: int, first: int | None = None, min_edges: int = 1
) -> bool:
    """DFS for an uncovered potentially-directed path src ~> dst."""
    start = [first] if first is not None else sorted(g.neighbors(src))
    for nxt in start:
        if not g.has_edge(src, nxt) or not _pd_step(g, src, nxt):
            continue
        stack = [(nxt, [src, nxt])]
        while stack:
            cur, path = stack.pop()
            if cur == dst and len(path) - 1 >= min_edges and _is_uncovered(g, path):
                return True
            for w in sorted(g.neighbors(cur), reverse=True):
                if w in path or not _pd_step(g, cur, w):
                    continue
                # prune covered prefixes early
                if g.has_edge(path[-2], w):
                    continue
                stack.append((w, path + [w]))
    return False


def _rule5(s: _RuleState) -> bool:
    # a o-o b with an uncovered circle path <a, g1, ..., gk, b>,
    # a nonadjacent gk, b nonadjacent g1  =>  undirect a~b and the whole path
    g = s.pag
    changed = False
    for e in g.edges():
        a, b = e.a, e.b
        if g.endpoint(a, b) is not CIRCLE or g.endpoint(b, a) is not CIRCLE:
            continue
        path = _find_circle_path(g, a, b)
        if path is None:
            continue
        loop = [a] + path + [b]
        for u, v in zip(loop, loop[1:]):
            changed |= s.mark(u, v, TAIL)
            changed |= s.mark(v, u, TAIL)
        changed |= s.mark(a, b, TAIL)
        changed |= s.mark(b, a, TAIL)
    return changed


def _find_circle_path(g: MixedGraph, a: int, b: int) -> list[int] | None:
    """Interior of an uncovered all-circle path a - g1 ... gk - b with
    a nonadjacent gk and b nonadjacent g1, if one exists."""

    def circle_edge(u, v):
        return g.endpoint(u, v) is CIRCLE and g.endpoint(v, u) is CIRCLE

    for g1 in sorted(g.neighbors(a)):
        if g1 == b or not circle_edge(a, g1) or g.has_edge(g1, b):
            continue
        stack = [(g1, [a, g1])]
        while stack:
            cur, path = stack.pop()
            for w in sorted(g.neighbors(cur), reverse=True):
                if w in path or not circle_edge(cur, w):
                    continue
                if g.has_edge(path[-2], w):
                    continue  # covered
                if w == b:
                    full = path + [w]
                    gk = path[-1]
                    if len(full) >= 4 and not g.has_edge(a, gk):
                        return full[1:-1]
                    continue
                stack.append((w, path + [w]))
    return None


def _rule6(s: _RuleState) -> bool:
    # a --- b o-* c  =>  tail at b on b~c
    g = s.pag
    changed = False
    for b in range(g.n):
        if not any(
            g.endpoint(a, b) is TAIL and g.endpoint(b, a) is TAIL
            for a in g.neighbors(b)
        ):
            continue
        for c in sorted(g.neighbors(b)):
            if g.endpoint(c, b) is CIRCLE:
                changed |= s.mark(c, b, TAIL)
    return changed


def _rule7(s: _RuleState) -> bool:
    # a --o b o-* c, a nonadjacent c  =>  tail at b on b~c
    g = s.pag
    changed = False
    for b in range(g.n):
        anchors = [
            a
            for a in sorted(g.neighbors(b))
            if g.endpoint(b, a) is TAIL and g.endpoint(a, b) is CIRCLE
        ]
        for a in anchors:
            for c in sorted(g.neighbors(b)):
                if c == a or g.has_edge(a, c):
                    continue
                if g.endpoint(c, b) is CIRCLE:
                    changed |= s.mark(c, b, TAIL)
    return changed


def _rule8(s: _RuleState) -> bool:
    # (a -> b -> c) or (a --o b -> c), and a o-> c  =>  a -> c
    g = s.pag
    changed = False
    for a in range(g.n):
        for c in sorted(g.neighbors(a)):
            if not (g.endpoint(c, a) is CIRCLE and g.endpoint(a, c) is ARROW):
                continue
            for b in sorted(g.neighbors(a)):
                if b == c or not g.has_edge(b, c):
                    continue
                ab_dir = g.endpoint(b, a) is TAIL and g.endpoint(a, b) in (ARROW, CIRCLE)
                bc_dir = g.endpoint(c, b) is TAIL and g.endpoint(b, c) is ARROW
                if ab_dir and bc_dir:
                    changed |= s.mark(c, a, TAIL)
    return changed


def _rule9(s: _RuleState) -> bool:
    # a o-> c with an uncovered pd path <a, b, ..., c>, b nonadjacent c  =>  a -> c
    g = s.pag
    changed = False
    for a in range(g.n):
        for c in sorted(g.neighbors(a)):
            if not (g.endpoint(c, a) is CIRCLE and g.endpoint(a, c) is ARROW):
                continue
            for b in sorted(g.neighbors(a)):
                if b == c or g.has_edge(b, c) or not _pd_step(g, a, b):
                    continue
                if _uncovered_pd_path_exists(g, a, c, first=b, min_edges=2):
                    changed |= s.mark(c, a, TAIL)
                    break
    return changed


def _rule10(s: _RuleState) -> bool:
    # a o-> c, b -> c <- t, uncovered pd paths a~>b and a~>t whose first
    # hops differ and are nonadjacent  =>  a -> c
    g = s.pag
    changed = False
    for a in range(g.n):
        for c in sorted(g.neighbors(a)):
            if not (g.endpoint(c, a) is CIRCLE and g.endpoint(a, c) is ARROW):
                continue
            parents = [
                v
                for v in sorted(g.neighbors(c))
                if v != a and g.endpoint(c, v) is TAIL and g.endpoint(v, c) is ARROW
            ]
            done = False
            for b, t in combinations(parents, 2):
                if done:
                    break
                hops = [h for h in sorted(g.neighbors(a)) if _pd_step(g, a, h)]
                for mu, omega in combinations(hops, 2):
                    if g.has_edge(mu, omega):
                        continue
                    p1 = (mu == b) or _uncovered_pd_path_exists(g, a, b, first=mu)
                    p2 = (omega == t) or _uncovered_pd_path_exists(g, a, t, first=omega)
                    p1b = (omega == b) or _uncovered_pd_path_exists(g, a, b, first=omega)
                    p2b = (mu == t) or _uncovered_pd_path_exists(g, a, t, first=mu)
                    if (p1 and p2) or (p1b and p2b):
                        changed |= s.mark(c, a, TAIL)
                        done = True
                        break
    return changed


def _fci_orient(
    pag: MixedGraph,
    sepsets: SepsetMap,
    p: FciParams,
    ambiguous: set[tuple[int, int, int]],
) -> None:
    state = _RuleState(pag, sepsets, p, ambiguous)
    rules = [_rule1, _rule2, _rule3, _rule4]
    if p.complete_rule_set:
        rules += [_rule5, _rule6, _rule7, _rule8, _rule9, _rule10]
    changed = True
    while changed:
        changed = False
        for rule in rules:
            changed |= rule(state)


# -- entry points ------------------------------------------------------------------


def fci(
    d: Dataset | None,
    p: FciParams | None = None,
    test: CITest | None = None,
    variant: str = "fci",
    names: list[str] | None = None,
) -> MixedGraph:
    """FCI / RFCI / CFCI search returning a partial ancestral graph."""
    if variant not in ("fci", "rfci", "cfci"):
        raise ValueError(f"unknown variant {variant!r}")
    p = p or FciParams()
    if variant == "cfci" and not p.conservative:
        from dataclasses import replace

        p = replace(p, conservative=True)
    if test is None:
        if d is None:
            raise ValueError("need a dataset or an explicit CI test handle")
        test = DataCITester(d, p.alpha, p.test_kind)
    fas_params = PcParams(alpha=p.alpha, depth=p.depth, test_kind=p.test_kind)
    skeleton, sepsets = fas(d, fas_params, test, names)

    if variant == "rfci":
        _rfci_triple_checks(skeleton, sepsets, test)
    pag, ambiguous = _orient_r0(skeleton, sepsets, p.conservative, test, p.depth)
    if variant in ("fci", "cfci"):
        if _pds_prune(pag, sepsets, test, p.depth):
            pruned = MixedGraph(pag.names)
            for e in pag.edges():
                pruned.add_undirected(e.a, e.b)
            pag, ambiguous = _orient_r0(
                pruned, sepsets, p.conservative, test, p.depth
            )
    _fci_orient(pag, sepsets, p, ambiguous)
    return pag


def gfci(
    d: Dataset | None,
    fp: FgesParams | None = None,
    cp: FciParams | None = None,
    test: CITest | None = None,
    cpdag: MixedGraph | None = None,
) -> MixedGraph:
    """Hybrid search: FGES adjacencies, CI pruning, FCI orientation.

    ``cpdag`` short-circuits the FGES stage (used with oracle tests).
    """
    fp = fp or FgesParams()
    cp = cp or FciParams()
    if cpdag is None:
        if d is None:
            raise ValueError("need a dataset (or a precomputed cpdag)")
        cpdag = fges(d, fp)
    if test is None:
        if d is None:
            raise ValueError("need a dataset or an explicit CI test handle")
        test = DataCITester(d, cp.alpha, cp.test_kind)

    skeleton = MixedGraph(cpdag.names)
    for e in cpdag.edges():
        skeleton.add_undirected(e.a, e.b)
    sepsets = SepsetMap()
    for e in cpdag.edges():
        _gfci_separate(skeleton, sepsets, test, cpdag, e.a, e.b, cp.depth)

    pag = _circle_graph(skeleton)
    for x, y, z in sorted(unshielded_triples(skeleton), key=lambda t: (t[0], t[2], t[1])):
        if cpdag.has_edge(x, z):
            cond = sepsets.get(x, z)
            is_collider = cond is not None and y not in cond
        else:
            is_collider = cpdag.is_directed_edge(x, y) and cpdag.is_directed_edge(
                z, y
            )
        if is_collider:
            _set_mark(pag, x, y, ARROW)
            _set_mark(pag, z, y, ARROW)
    _fci_orient(pag, sepsets, cp, set())
    return pag


def _gfci_separate(skeleton, sepsets, tester, cpdag, x, y, depth) -> None:
    for a, b in ((x, y), (y, x)):
        cands = sorted(cpdag.neighbors(a) - {b})
        top = len(cands) if depth < 0 else min(len(cands), depth)
        for size in range(top + 1):
            for cond in combinations(cands, size):
                res = tester(x, y, cond)
                if res.independent:
                    if skeleton.has_edge(x, y):
                        skeleton.remove_edge(x, y)
                    sepsets.record(x, y, cond, res.p_value)
                    return
