"""Mixed-mark graphs: DAGs, partially directed graphs (PDAGs/CPDAGs) and
partial ancestral graphs (PAGs).

A graph holds a fixed node list (dense indices 0..n-1 with unique string
names) and at most one edge per unordered node pair.  Each edge carries one
endpoint mark per node: TAIL, ARROW or CIRCLE.  A directed edge x -> y is
(TAIL at x, ARROW at y); an undirected edge is TAIL/TAIL; a bidirected edge
is ARROW/ARROW; circle marks encode PAG uncertainty.

All graph-level operations in this module are pure: they copy their input
and return a new graph.  Graphs returned by the library should be treated
as immutable.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np


class Endpoint(Enum):
    TAIL = "-"
    ARROW = ">"
    CIRCLE = "o"


TAIL = Endpoint.TAIL
ARROW = Endpoint.ARROW
CIRCLE = Endpoint.CIRCLE


@dataclass(frozen=True)
class Edge:
    """One edge, normalized so that a < b."""

    a: int
    mark_a: Endpoint
    b: int
    mark_b: Endpoint

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("self-loops are not allowed")
        if self.a > self.b:
            raise ValueError("Edge must be stored with a < b")


class NoExtensionError(ValueError):
    """Raised when a PDAG admits no consistent DAG extension."""


class GraphFormatError(ValueError):
    """Raised on malformed graph text."""


class MixedGraph:
    """Node list plus endpoint-marked edges.

    The adjacency structure is a list of neighbor sets; endpoint marks are
    kept in a dict keyed by ordered pair: ``_marks[(x, y)]`` is the mark at
    ``y`` on the edge between ``x`` and ``y``.
    """

    def __init__(self, names: Sequence[str]):
        names = list(names)
        if len(set(names)) != len(names):
            raise ValueError("node names must be unique")
        self.names: list[str] = names
        self._index = {name: i for i, name in enumerate(names)}
        self._adj: list[set[int]] = [set() for _ in names]
        self._marks: dict[tuple[int, int], Endpoint] = {}

    # -- basic accessors ------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        return self._index[name]

    def copy(self) -> "MixedGraph":
        g = MixedGraph(self.names)
        g._adj = [set(s) for s in self._adj]
        g._marks = dict(self._marks)
        return g

    def __eq__(self, other) -> bool:
        if not isinstance(other, MixedGraph):
            return NotImplemented
        return self.names == other.names and self._marks == other._marks

    def __repr__(self) -> str:
        return f"MixedGraph({self.n} nodes, {self.edge_count()} edges)"

    # -- edge manipulation ----------------------------------------------

    def add_edge(self, a: int, b: int, mark_a: Endpoint, mark_b: Endpoint) -> None:
        if a == b:
            raise ValueError("self-loops are not allowed")
        if b in self._adj[a]:
            raise ValueError(f"edge {self.names[a]}~{self.names[b]} already present")
        self._adj[a].add(b)
        self._adj[b].add(a)
        self._marks[(a, b)] = mark_b
        self._marks[(b, a)] = mark_a

    def add_directed(self, a: int, b: int) -> None:
        self.add_edge(a, b, TAIL, ARROW)

    def add_undirected(self, a: int, b: int) -> None:
        self.add_edge(a, b, TAIL, TAIL)

    def remove_edge(self, a: int, b: int) -> None:
        self._adj[a].discard(b)
        self._adj[b].discard(a)
        self._marks.pop((a, b), None)
        self._marks.pop((b, a), None)

    def has_edge(self, a: int, b: int) -> bool:
        return b in self._adj[a]

    adjacent = has_edge

    def neighbors(self, a: int) -> set[int]:
        return set(self._adj[a])

    def degree(self, a: int) -> int:
        return len(self._adj[a])

    def endpoint(self, a: int, b: int) -> Endpoint | None:
        """Mark at ``b`` on the edge a~b, or None if not adjacent."""
        return self._marks.get((a, b))

    def set_endpoint(self, a: int, b: int, mark: Endpoint) -> None:
        if (a, b) not in self._marks:
            raise ValueError(f"no edge {self.names[a]}~{self.names[b]}")
        self._marks[(a, b)] = mark

    # -- mark-level queries ----------------------------------------------

    def is_directed_edge(self, a: int, b: int) -> bool:
        """True iff a -> b."""
        return (
            self._marks.get((a, b)) is ARROW and self._marks.get((b, a)) is TAIL
        )

    def is_undirected_edge(self, a: int, b: int) -> bool:
        return (
            self._marks.get((a, b)) is TAIL and self._marks.get((b, a)) is TAIL
        )

    def is_bidirected_edge(self, a: int, b: int) -> bool:
        return (
            self._marks.get((a, b)) is ARROW and self._marks.get((b, a)) is ARROW
        )

    def parents(self, a: int) -> set[int]:
        return {b for b in self._adj[a] if self.is_directed_edge(b, a)}

    def children(self, a: int) -> set[int]:
        return {b for b in self._adj[a] if self.is_directed_edge(a, b)}

    def undirected_neighbors(self, a: int) -> set[int]:
        return {b for b in self._adj[a] if self.is_undirected_edge(a, b)}

    def edges(self) -> list[Edge]:
        out = []
        for a in range(self.n):
            for b in self._adj[a]:
                if a < b:
                    out.append(Edge(a, self._marks[(b, a)], b, self._marks[(a, b)]))
        out.sort(key=lambda e: (e.a, e.b))
        return out

    def edge_count(self) -> int:
        return sum(len(s) for s in self._adj) // 2

    def directed_edges(self) -> list[tuple[int, int]]:
        """All (u, v) with u -> v, sorted."""
        out = []
        for e in self.edges():
            if e.mark_a is TAIL and e.mark_b is ARROW:
                out.append((e.a, e.b))
            elif e.mark_a is ARROW and e.mark_b is TAIL:
                out.append((e.b, e.a))
        out.sort()
        return out

    def skeleton_pairs(self) -> set[tuple[int, int]]:
        return {(e.a, e.b) for e in self.edges()}

    def all_edges_directed(self) -> bool:
        return all(
            (e.mark_a is TAIL and e.mark_b is ARROW)
            or (e.mark_a is ARROW and e.mark_b is TAIL)
            for e in self.edges()
        )

    def is_pdag(self) -> bool:
        """Only directed and undirected edges (no circles, no bidirected)."""
        for e in self.edges():
            marks = {e.mark_a, e.mark_b}
            if CIRCLE in marks or marks == {ARROW}:
                return False
        return True


# -- construction helpers -------------------------------------------------


def graph_from_arcs(names: Sequence[str], arcs: Iterable[tuple[int, int]]) -> MixedGraph:
    """DAG/PDAG builder from (parent, child) index pairs."""
    g = MixedGraph(names)
    for a, b in arcs:
        g.add_directed(a, b)
    return g


# -- acyclicity and orderings ----------------------------------------------


def is_acyclic(g: MixedGraph) -> bool:
    """True iff the all-directed graph g has no directed cycle.

    Rejects graphs containing undirected, bidirected or circle-marked edges.
    """
    if not g.all_edges_directed():
        raise ValueError("is_acyclic expects a graph with only directed edges")
    return _directed_part_acyclic(g)


def _directed_part_acyclic(g: MixedGraph) -> bool:
    indeg = [0] * g.n
    children = [[] for _ in range(g.n)]
    for u, v in g.directed_edges():
        indeg[v] += 1
        children[u].append(v)
    queue = [i for i in range(g.n) if indeg[i] == 0]
    seen = 0
    while queue:
        u = queue.pop()
        seen += 1
        for v in children[u]:
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(v)
    return seen == g.n


def topological_order(g: MixedGraph) -> list[int]:
    """Topological order of a DAG, lowest index first among ready nodes."""
    indeg = [0] * g.n
    children = [set() for _ in range(g.n)]
    for u, v in g.directed_edges():
        indeg[v] += 1
        children[u].add(v)
    import heapq

    ready = [i for i in range(g.n) if indeg[i] == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        u = heapq.heappop(ready)
        order.append(u)
        for v in sorted(children[u]):
            indeg[v] -= 1
            if indeg[v] == 0:
                heapq.heappush(ready, v)
    if len(order) != g.n:
        raise NoExtensionError("graph has a directed cycle")
    return order


def has_directed_path(g: MixedGraph, src: int, dst: int) -> bool:
    """Path using only directed edges src -> ... -> dst."""
    stack, seen = [src], {src}
    while stack:
        u = stack.pop()
        if u == dst:
            return True
        for v in g.children(u):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


# -- unshielded triples and colliders --------------------------------------


def unshielded_triples(g: MixedGraph) -> list[tuple[int, int, int]]:
    """All (x, y, z) with x~y, y~z, x not adjacent z; one per unordered (x, z)."""
    out = []
    for y in range(g.n):
        nbrs = sorted(g.neighbors(y))
        for x, z in combinations(nbrs, 2):
            if not g.has_edge(x, z):
                out.append((x, y, z))
    out.sort(key=lambda t: (t[0], t[2], t[1]))
    return out


def colliders_of_dag(g: MixedGraph) -> set[tuple[int, int, int]]:
    """Unshielded colliders x -> y <- z of a directed graph, x < z."""
    out = set()
    for x, y, z in unshielded_triples(g):
        if g.is_directed_edge(x, y) and g.is_directed_edge(z, y):
            out.add((x, y, z))
    return out


# -- Meek orientation rules --------------------------------------------------


def meek_closure(g: MixedGraph) -> MixedGraph:
    """Apply Meek rules R1-R4 to a PDAG until fixpoint.

    Never introduces a new unshielded collider or a directed cycle.  If a
    rule would flip an already-directed edge the existing orientation wins
    and a warning is emitted (inconsistent input PDAG).
    """
    if not g.is_pdag():
        raise ValueError("meek_closure expects a PDAG (directed/undirected edges only)")
    h = g.copy()
    conflicts = 0

    def direct(a: int, b: int) -> bool:
        nonlocal conflicts
        if h.is_undirected_edge(a, b):
            if has_directed_path(h, b, a):
                conflicts += 1  # orienting a -> b would close a cycle
                return False
            h.set_endpoint(a, b, ARROW)
            return True
        if h.is_directed_edge(b, a):
            conflicts += 1
        return False

    changed = True
    while changed:
        changed = False
        for a, b in [(e.a, e.b) for e in h.edges()] + [
            (e.b, e.a) for e in h.edges()
        ]:
            if not h.is_undirected_edge(a, b):
                continue
            # R1: x -> a, a - b, x not adjacent b  =>  a -> b
            if any(
                not h.has_edge(x, b) for x in h.parents(a)
            ):
                changed |= direct(a, b)
                continue
            # R2: a -> c -> b and a - b  =>  a -> b
            if any(b in h.children(c) for c in h.children(a)):
                changed |= direct(a, b)
                continue
            # R3: a - c -> b, a - d -> b, c not adjacent d  =>  a -> b
            spokes = [
                c
                for c in h.undirected_neighbors(a)
                if h.is_directed_edge(c, b)
            ]
            if any(
                not h.has_edge(c, d) for c, d in combinations(sorted(spokes), 2)
            ):
                changed |= direct(a, b)
                continue
            # R4: a - d, d -> c -> b, a - c or a - b covers c, with c not
            # adjacent to ... canonical form: a - b oriented when a - d,
            # c -> b, d -> c, and d not adjacent to b
            for d in h.undirected_neighbors(a):
                if any(
                    h.is_directed_edge(d, c)
                    and h.is_directed_edge(c, b)
                    and not h.has_edge(d, b)
                    for c in h.neighbors(a)
                ):
                    changed |= direct(a, b)
                    break
    if conflicts:
        warnings.warn(
            f"meek_closure: {conflicts} orientation conflict(s); first orientation kept",
            RuntimeWarning,
            stacklevel=2,
        )
    return h


def dag_to_cpdag(g: MixedGraph) -> MixedGraph:
    """CPDAG of a DAG: keep collider orientations, close under Meek rules."""
    if not g.all_edges_directed() or not _directed_part_acyclic(g):
        raise ValueError("dag_to_cpdag expects a DAG")
    h = MixedGraph(g.names)
    colliders = colliders_of_dag(g)
    arrow_into: set[tuple[int, int]] = set()
    for x, y, z in colliders:
        arrow_into.add((x, y))
        arrow_into.add((z, y))
    for u, v in g.directed_edges():
        if (u, v) in arrow_into:
            h.add_directed(u, v)
        else:
            h.add_undirected(u, v)
    return meek_closure(h)


# -- consistent extension (Dor & Tarsi) --------------------------------------


def _extension(g: MixedGraph, pick) -> MixedGraph:
    """Shared Dor-Tarsi engine; ``pick`` chooses among eligible sink nodes."""
    out = g.copy()
    work = g.copy()
    remaining = set(range(g.n))
    while remaining:
        eligible = []
        for x in sorted(remaining):
            if work.children(x):
                continue
            und = work.undirected_neighbors(x)
            adj = work.neighbors(x)
            ok = all(
                work.has_edge(y, w) for y in und for w in adj if w != y
            )
            if ok:
                eligible.append(x)
        if not eligible:
            raise NoExtensionError("PDAG admits no consistent DAG extension")
        x = pick(eligible)
        for y in work.undirected_neighbors(x):
            out.set_endpoint(y, x, ARROW)  # orient y -> x
            out.set_endpoint(x, y, TAIL)
        for y in list(work.neighbors(x)):
            work.remove_edge(x, y)
        remaining.discard(x)
    return out


def consistent_extension(g: MixedGraph) -> MixedGraph:
    """A DAG with g's skeleton and directed edges, preserving g's colliders.

    Deterministic: among eligible nodes the lowest index is consumed first.
    Raises NoExtensionError when no consistent extension exists.
    """
    if not g.is_pdag():
        raise ValueError("consistent_extension expects a PDAG")
    return _extension(g, lambda elig: elig[0])


def _relax_to_pdag(g: MixedGraph) -> tuple[MixedGraph, list[tuple[int, int]]]:
    """Circle marks become tails; bidirected edges become undirected.

    Returns the relaxed PDAG and the list of formerly bidirected pairs.
    """
    h = MixedGraph(g.names)
    bidirected = []
    for e in g.edges():
        ma = TAIL if e.mark_a is CIRCLE else e.mark_a
        mb = TAIL if e.mark_b is CIRCLE else e.mark_b
        if ma is ARROW and mb is ARROW:
            bidirected.append((e.a, e.b))
            ma = mb = TAIL
        elif ma is ARROW:  # b -> a after relaxation
            ma, mb = ARROW, TAIL
        h.add_edge(e.a, e.b, ma, mb)
    return h, bidirected


def _random_acyclic_completion(g: MixedGraph, rng: np.random.Generator) -> MixedGraph:
    """Orient remaining undirected edges at random, never creating a cycle."""
    h = g.copy()
    free = [(e.a, e.b) for e in h.edges() if e.mark_a is TAIL and e.mark_b is TAIL]
    order = list(rng.permutation(len(free)))
    for k in order:
        a, b = free[k]
        first, second = (a, b) if rng.random() < 0.5 else (b, a)
        # orienting first -> second is safe unless a directed path second ->* first exists
        if not has_directed_path(h, second, first):
            h.set_endpoint(first, second, ARROW)
        elif not has_directed_path(h, first, second):
            h.set_endpoint(second, first, ARROW)
        else:
            raise NoExtensionError("no acyclic completion exists")
    return h


def randomize_orientation(g: MixedGraph, seed: int) -> MixedGraph:
    """Direct every remaining undirected/circle/bidirected edge to get a DAG.

    Circle marks are relaxed to tails and bidirected edges are treated as
    undirected.  A seeded consistent extension (random choice among eligible
    nodes) is attempted first so CPDAG inputs yield a member of their
    equivalence class; if none exists, free edges are oriented at random
    subject only to acyclicity.  Output is a pure function of (g, seed).
    """
    rng = np.random.default_rng(seed)
    h, bidirected = _relax_to_pdag(g)
    if not _directed_part_acyclic(h):
        raise NoExtensionError("directed part of the relaxed graph is cyclic")
    try:
        return _extension(h, lambda elig: elig[int(rng.integers(len(elig)))])
    except NoExtensionError:
        warnings.warn(
            "randomize_orientation: no collider-preserving extension "
            f"({len(bidirected)} formerly bidirected edge(s)); orienting free "
            "edges at random subject to acyclicity",
            RuntimeWarning,
            stacklevel=2,
        )
        return _random_acyclic_completion(h, rng)


# -- text format --------------------------------------------------------------

_MARK_LEFT = {TAIL: "-", ARROW: "<", CIRCLE: "o"}
_MARK_RIGHT = {TAIL: "-", ARROW: ">", CIRCLE: "o"}
_LEFT_MARK = {v: k for k, v in _MARK_LEFT.items()}
_RIGHT_MARK = {v: k for k, v in _MARK_RIGHT.items()}

_EDGE_RE = re.compile(
    r"^\s*(?:\d+\.\s*)?(.+?)\s+([<o-])-([>o-])\s+(.+?)\s*$"
)


def _edge_token(mark_a: Endpoint, mark_b: Endpoint) -> str:
    return f"{_MARK_LEFT[mark_a]}-{_MARK_RIGHT[mark_b]}"


def write_graph_text(g: MixedGraph) -> str:
    """Serialize in the line-oriented interchange format.

    Directed edges are written tail-first (``A --> B``); mixed-mark edges put
    the circle end on the left where the format has a token for it.
    """
    lines = ["Graph Nodes:", ";".join(g.names), "", "Graph Edges:"]
    k = 0
    for e in g.edges():
        a, ma, b, mb = e.a, e.mark_a, e.b, e.mark_b
        # normalize: prefer tokens with '<' only in '<->'
        if ma is ARROW and mb is not ARROW:
            a, ma, b, mb = b, mb, a, ma
        elif ma is TAIL and mb is CIRCLE:
            a, ma, b, mb = b, mb, a, ma
        k += 1
        lines.append(f"{k}. {g.names[a]} {_edge_token(ma, mb)} {g.names[b]}")
    return "\n".join(lines) + "\n"


def parse_graph_text(text: str) -> MixedGraph:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0].rstrip(":").strip() != "Graph Nodes":
        raise GraphFormatError("expected 'Graph Nodes:' header")
    if len(lines) < 2:
        raise GraphFormatError("missing node list")
    names = [t.strip() for t in lines[1].split(";") if t.strip()]
    bad = [n for n in names if re.search(r";|-->|---|o->|o-o|o--|<->", n)]
    if bad:
        raise GraphFormatError(f"illegal node name(s): {bad}")
    g = MixedGraph(names)
    rest = lines[2:]
    if rest and rest[0].rstrip(":").strip() == "Graph Edges":
        rest = rest[1:]
    for ln in rest:
        m = _EDGE_RE.match(ln)
        if not m:
            raise GraphFormatError(f"unparseable edge line: {ln!r}")
        name_a, left, right, name_b = m.groups()
        if name_a not in g._index or name_b not in g._index:
            raise GraphFormatError(f"unknown node in edge line: {ln!r}")
        a, b = g.index_of(name_a), g.index_of(name_b)
        g.add_edge(a, b, _LEFT_MARK[left], _RIGHT_MARK[right])
    return g
