"""Parameterized discrete Bayesian networks.

A DiscreteBN couples a DAG with one conditional probability table per node.
CPT rows are indexed row-major by the node's parent states (parents kept in
ascending node order), columns by the node's own states.  Fitting (MLE or
EM), exact inference by variable elimination, per-record prediction and
forward sampling all live here.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data import MISSING, Dataset, Variable
from .graph import MixedGraph, topological_order

ROW_SUM_TOL = 1e-9
EM_ENUM_LIMIT = 1 << 20


class ZeroEvidenceError(ValueError):
    """Evidence assignment has probability zero under the model."""

    def __init__(self, evidence: dict[int, int]):
        self.evidence = dict(evidence)
        super().__init__(f"evidence has zero probability: {self.evidence}")


@dataclass(frozen=True)
class CPT:
    node: int
    parents: tuple[int, ...]
    table: np.ndarray  # (q, k)

    def __post_init__(self):
        t = self.table
        if t.ndim != 2:
            raise ValueError("CPT table must be 2-D (q x k)")
        if (t < 0).any() or np.abs(t.sum(axis=1) - 1.0).max() > ROW_SUM_TOL:
            raise ValueError(f"CPT rows for node {self.node} must sum to 1")

    @property
    def arity(self) -> int:
        return self.table.shape[1]


class DiscreteBN:
    """DAG + CPTs.  ``variables`` carry the state labels used for I/O."""

    def __init__(
        self,
        graph: MixedGraph,
        cpts: Sequence[CPT],
        variables: Sequence[Variable] | None = None,
        notes: Iterable[str] = (),
    ):
        if not graph.all_edges_directed():
            raise ValueError("DiscreteBN needs a fully directed graph")
        order = topological_order(graph)  # raises on cycles
        if sorted(c.node for c in cpts) != list(range(graph.n)):
            raise ValueError("need exactly one CPT per node")
        self.graph = graph
        self.cpts: list[CPT] = sorted(cpts, key=lambda c: c.node)
        for c in self.cpts:
            if c.parents != tuple(sorted(graph.parents(c.node))):
                raise ValueError(f"CPT parents for node {c.node} disagree with graph")
        self.arities: list[int] = [c.arity for c in self.cpts]
        for c in self.cpts:
            q = int(np.prod([self.arities[p] for p in c.parents], dtype=np.int64))
            if c.table.shape[0] != q:
                raise ValueError(f"CPT for node {c.node} has {c.table.shape[0]} rows, expected {q}")
        if variables is None:
            variables = [
                Variable(graph.names[i], tuple(f"s{s}" for s in range(k)))
                for i, k in enumerate(self.arities)
            ]
        variables = list(variables)
        if [v.arity for v in variables] != self.arities:
            raise ValueError("variable state counts disagree with CPT widths")
        self.variables = variables
        self.topo = order
        self.notes: list[str] = list(notes)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def names(self) -> list[str]:
        return self.graph.names

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscreteBN):
            return NotImplemented
        return (
            self.graph == other.graph
            and all(
                a.parents == b.parents and np.array_equal(a.table, b.table)
                for a, b in zip(self.cpts, other.cpts)
            )
        )

    def parent_strides(self, node: int) -> np.ndarray:
        """Row-major strides over the node's parent state space."""
        ar = [self.arities[p] for p in self.cpts[node].parents]
        strides = np.ones(len(ar), dtype=np.int64)
        for i in range(len(ar) - 2, -1, -1):
            strides[i] = strides[i + 1] * ar[i + 1]
        return strides


def _parent_codes(bn: DiscreteBN, node: int, rows: np.ndarray) -> np.ndarray:
    """CPT row index per data row (complete parent columns assumed)."""
    parents = bn.cpts[node].parents
    if not parents:
        return np.zeros(rows.shape[0], dtype=np.int64)
    strides = bn.parent_strides(node)
    return (rows[:, list(parents)].astype(np.int64) * strides).sum(axis=1)


# -- maximum-likelihood fitting ----------------------------------------------


def _family_counts(d: Dataset, node: int, parents: tuple[int, ...]) -> np.ndarray:
    ar = [d.variables[p].arity for p in parents] + [d.variables[node].arity]
    cols = list(parents) + [node]
    sub = d.rows[:, cols]
    codes = np.ravel_multi_index(tuple(sub.T), ar)
    q = int(np.prod(ar[:-1], dtype=np.int64))
    return (
        np.bincount(codes, minlength=q * ar[-1])
        .reshape(q, ar[-1])
        .astype(np.float64)
    )


def mle_fit(g: MixedGraph, d: Dataset, pseudocount: float = 0.0) -> DiscreteBN:
    """Fit CPTs by (possibly smoothed) relative frequencies on complete data.

    Unseen parent configurations with pseudocount 0 get a uniform row, noted
    on the returned model.
    """
    if pseudocount < 0:
        raise ValueError("pseudocount must be >= 0")
    if not d.is_complete():
        raise ValueError("mle_fit needs complete data (impute first)")
    notes = []
    cpts = []
    for i in range(d.m):
        parents = tuple(sorted(g.parents(i)))
        k = d.variables[i].arity
        cnt = _family_counts(d, i, parents)
        totals = cnt.sum(axis=1, keepdims=True)
        table = np.empty_like(cnt)
        seen = totals[:, 0] > 0 if pseudocount == 0 else np.full(cnt.shape[0], True)
        if pseudocount == 0:
            table[seen] = cnt[seen] / totals[seen]
            if (~seen).any():
                table[~seen] = 1.0 / k
                notes.append(
                    f"{d.names[i]}: {int((~seen).sum())} unseen parent row(s) set uniform"
                )
        else:
            table = (cnt + pseudocount) / (totals + k * pseudocount)
        cpts.append(CPT(i, parents, table))
    return DiscreteBN(g, cpts, d.variables, notes)


# -- factors and variable elimination ------------------------------------------


@dataclass
class _Factor:
    vars: tuple[int, ...]
    table: np.ndarray  # one axis per var, in vars order

    def restrict(self, evidence: dict[int, int]) -> "_Factor":
        keep, idx = [], []
        for v in self.vars:
            if v in evidence:
                idx.append(evidence[v])
            else:
                keep.append(v)
                idx.append(slice(None))
        return _Factor(tuple(keep), self.table[tuple(idx)])

    def marginalize(self, v: int) -> "_Factor":
        ax = self.vars.index(v)
        return _Factor(
            self.vars[:ax] + self.vars[ax + 1 :], self.table.sum(axis=ax)
        )


def _factor_product(a: _Factor, b: _Factor) -> _Factor:
    union = tuple(sorted(set(a.vars) | set(b.vars)))
    ta = _expand(a, union)
    tb = _expand(b, union)
    return _Factor(union, ta * tb)


def _expand(f: _Factor, union: tuple[int, ...]) -> np.ndarray:
    """Transpose/reshape f.table so its axes line up with ``union`` order."""
    src = [v for v in union if v in f.vars]
    t = np.transpose(f.table, [f.vars.index(v) for v in src])
    shape = [f.table.shape[f.vars.index(u)] if u in f.vars else 1 for u in union]
    return t.reshape(shape)


def _bn_factors(bn: DiscreteBN, evidence: dict[int, int]) -> list[_Factor]:
    out = []
    for c in bn.cpts:
        shape = [bn.arities[p] for p in c.parents] + [bn.arities[c.node]]
        f = _Factor(c.parents + (c.node,), c.table.reshape(shape))
        out.append(f.restrict(evidence))
    return out


def _min_degree_order(factors: list[_Factor], keep: set[int]) -> list[int]:
    scopes = [set(f.vars) for f in factors]
    all_vars = set().union(*scopes) if scopes else set()
    to_remove = sorted(all_vars - keep)
    neighbors = {v: set() for v in all_vars}
    for s in scopes:
        for v in s:
            neighbors[v] |= s - {v}
    order = []
    pending = set(to_remove)
    while pending:
        v = min(pending, key=lambda u: (len(neighbors[u] & (pending | keep)), u))
        order.append(v)
        nb = neighbors[v] & (pending | keep)
        for u in nb:
            neighbors[u] |= nb - {u}
            neighbors[u].discard(v)
        pending.discard(v)
    return order


def _eliminate_to_factor(
    bn: DiscreteBN, targets: Sequence[int], evidence: dict[int, int]
) -> _Factor:
    """Unnormalized joint factor over targets given evidence."""
    factors = _bn_factors(bn, evidence)
    order = _min_degree_order(factors, set(targets))
    for v in order:
        related = [f for f in factors if v in f.vars]
        rest = [f for f in factors if v not in f.vars]
        prod = related[0]
        for f in related[1:]:
            prod = _factor_product(prod, f)
        factors = rest + [prod.marginalize(v)]
    result = factors[0]
    for f in factors[1:]:
        result = _factor_product(result, f)
    # axes for targets in ascending var order; transpose to requested order
    perm = [result.vars.index(t) for t in targets]
    missing_axes = [i for i, v in enumerate(result.vars) if v not in targets]
    if missing_axes:
        result = _Factor(
            tuple(v for v in result.vars if v in targets),
            result.table.sum(axis=tuple(missing_axes)),
        )
        perm = [result.vars.index(t) for t in targets]
    return _Factor(tuple(targets), np.transpose(result.table, perm) if perm else result.table)


def eliminate(
    bn: DiscreteBN, target: int, evidence: dict[int, int] | None = None
) -> np.ndarray:
    """Exact posterior P(target | evidence) by variable elimination."""
    evidence = dict(evidence or {})
    if target in evidence:
        raise ValueError("target must not be part of the evidence")
    f = _eliminate_to_factor(bn, (target,), evidence)
    z = float(f.table.sum())
    if z <= 0.0:
        raise ZeroEvidenceError(evidence)
    return f.table / z


# -- prediction ----------------------------------------------------------------


@dataclass
class Prediction:
    """Per-row posteriors for one target; excluded rows have argmax -1."""

    target: int
    posteriors: np.ndarray  # (N, k); NaN rows were excluded
    argmax: np.ndarray  # (N,), -1 for excluded rows
    excluded: int = 0
    notes: list[str] = field(default_factory=list)


def _predict_full_evidence(bn: DiscreteBN, rows: np.ndarray, target: int) -> np.ndarray:
    """Vectorized posterior over rows whose non-target cells are all observed.

    With full evidence the posterior depends only on the Markov blanket:
    the target's own CPT row and each child's CPT entry.
    """
    n = rows.shape[0]
    k = bn.arities[target]
    post = bn.cpts[target].table[_parent_codes(bn, target, rows)].copy()  # (n, k)
    for child in sorted(bn.graph.children(target)):
        c = bn.cpts[child]
        strides = bn.parent_strides(child)
        pos = c.parents.index(target)
        base = np.zeros(n, dtype=np.int64)
        for j, p in enumerate(c.parents):
            if p != target:
                base += rows[:, p].astype(np.int64) * strides[j]
        flat = c.table.reshape(-1)
        kc = c.arity
        xc = rows[:, child].astype(np.int64)
        for s in range(k):
            post[:, s] *= flat[(base + s * strides[pos]) * kc + xc]
    return post


def predict(bn: DiscreteBN, d: Dataset, target: int) -> Prediction:
    """Posterior and argmax state per row, evidence = all other observed cells.

    Missing cells are simply omitted from the evidence.  Rows whose evidence
    has zero probability are excluded (argmax -1) and counted.
    """
    if not 0 <= target < bn.n:
        raise ValueError("target out of range")
    if d.arities != bn.arities:
        raise ValueError("dataset arities disagree with the model")
    n, k = d.n, bn.arities[target]
    rows = d.rows
    others = [j for j in range(d.m) if j != target]
    complete = ~(rows[:, others] == MISSING).any(axis=1) if others else np.full(n, True)

    post = np.full((n, k), np.nan)
    if complete.any():
        post[complete] = _predict_full_evidence(bn, rows[complete], target)

    # generic path for rows with missing evidence, grouped by pattern
    rest = np.flatnonzero(~complete)
    if rest.size:
        patt = rows[np.ix_(rest, others)]
        _, inverse = np.unique(patt, axis=0, return_inverse=True)
        for gid in np.unique(inverse):
            members = rest[inverse == gid]
            r = rows[members[0]]
            evidence = {
                j: int(r[j]) for j in others if r[j] != MISSING
            }
            try:
                p = eliminate(bn, target, evidence)
            except ZeroEvidenceError:
                continue  # stays NaN
            post[members] = p

    sums = post.sum(axis=1)
    ok = np.isfinite(sums) & (sums > 0)
    post[ok] = post[ok] / sums[ok, None]
    post[~ok] = np.nan
    arg = np.where(ok, np.nanargmax(np.where(np.isfinite(post), post, -1.0), axis=1), -1)
    excluded = int((~ok).sum())
    notes = [f"{excluded} row(s) with zero-probability evidence"] if excluded else []
    return Prediction(target, post, arg.astype(np.int64), excluded, notes)


# -- sampling and likelihood ----------------------------------------------------


def forward_sample(bn: DiscreteBN, n: int, seed: int) -> Dataset:
    """Ancestral sampling in topological order; reproducible per seed."""
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    rows = np.zeros((n, bn.n), dtype=np.int32)
    for node in bn.topo:
        probs = bn.cpts[node].table[_parent_codes(bn, node, rows)]
        u = rng.random(n)
        cum = np.cumsum(probs, axis=1)
        rows[:, node] = np.minimum(
            (u[:, None] > cum).sum(axis=1), bn.arities[node] - 1
        )
    return Dataset(bn.variables, rows)


def loglik(bn: DiscreteBN, d: Dataset) -> float:
    """Complete-data log-likelihood; -inf (with a warning) on zero cells."""
    if not d.is_complete():
        raise ValueError("loglik needs complete data")
    if d.arities != bn.arities:
        raise ValueError("dataset arities disagree with the model")
    total = 0.0
    zero_cells = 0
    for i in range(bn.n):
        p = bn.cpts[i].table[_parent_codes(bn, i, d.rows), d.rows[:, i]]
        zero = p <= 0
        zero_cells += int(zero.sum())
        with np.errstate(divide="ignore"):
            total += float(np.log(p).sum())
    if zero_cells:
        warnings.warn(
            f"loglik: {zero_cells} zero-probability cell(s)", RuntimeWarning, stacklevel=2
        )
    return total


# -- expectation-maximization ----------------------------------------------------


def _init_cpts(g: MixedGraph, arities: list[int], rng: np.random.Generator, eps: float = 0.01):
    cpts = []
    for i in range(g.n):
        parents = tuple(sorted(g.parents(i)))
        k = arities[i]
        q = int(np.prod([arities[p] for p in parents], dtype=np.int64))
        raw = np.full((q, k), 1.0 / k) + eps * rng.random((q, k))
        cpts.append(CPT(i, parents, raw / raw.sum(axis=1, keepdims=True)))
    return cpts


def _row_joint_over_missing(
    bn: DiscreteBN, row: np.ndarray, miss: np.ndarray
) -> np.ndarray:
    """Unnormalized joint over the row's missing variables (axes in miss order)."""
    shape = tuple(bn.arities[v] for v in miss)
    if int(np.prod(shape, dtype=np.int64)) > EM_ENUM_LIMIT:
        raise ValueError("joint over missing variables too large for exact E-step")
    axis_of = {int(v): ax for ax, v in enumerate(miss)}
    joint = np.ones(shape)
    for c in bn.cpts:
        fam = c.parents + (c.node,)
        idx, axes = [], []
        for v in fam:
            if v in axis_of:
                idx.append(slice(None))
                axes.append(axis_of[v])
            else:
                idx.append(int(row[v]))
        shp = [bn.arities[p] for p in c.parents] + [bn.arities[c.node]]
        part = c.table.reshape(shp)[tuple(idx)]
        if not axes:
            joint = joint * float(part)
            continue
        # line part's axes up with the joint's axes, 1s elsewhere, broadcast
        part = np.transpose(part, np.argsort(axes))
        full = [1] * len(shape)
        for ax, t in zip(sorted(axes), part.shape):
            full[ax] = t
        joint = joint * part.reshape(full)
    return joint


def em_fit(
    g: MixedGraph,
    d: Dataset,
    tol: float = 1e-4,
    max_iter: int = 200,
    seed: int = 0,
) -> DiscreteBN:
    """EM over missing-at-random cells with exact per-record E-steps.

    CPTs start uniform with seeded jitter; the observed-data log-likelihood
    is asserted non-decreasing each iteration.  If max_iter is reached the
    last iterate is returned with a note.
    """
    rng = np.random.default_rng(seed)
    arities = d.arities
    cpts = _init_cpts(g, arities, rng)
    bn = DiscreteBN(g, cpts, d.variables)
    uniq, mult = np.unique(d.rows, axis=0, return_counts=True)
    miss_sets = [np.flatnonzero(u == MISSING) for u in uniq]
    prev_ll = -np.inf
    notes: list[str] = []
    converged = False

    for _ in range(max_iter):
        expected = [np.zeros_like(c.table) for c in bn.cpts]
        ll = 0.0
        for u, w, miss in zip(uniq, mult, miss_sets):
            if miss.size == 0:
                logp = 0.0
                for c in bn.cpts:
                    q = 0
                    for p in c.parents:
                        q = q * arities[p] + int(u[p])
                    expected[c.node][q, int(u[c.node])] += w
                    pr = float(c.table[q, int(u[c.node])])
                    logp += math.log(pr) if pr > 0 else -np.inf
                ll += w * logp
                continue
            joint = _row_joint_over_missing(bn, u, miss)
            z = float(joint.sum())
            if z <= 0:
                ll += -np.inf
                continue
            ll += w * math.log(z)
            post = joint / z
            axis_of = {int(v): ax for ax, v in enumerate(miss)}
            for c in bn.cpts:
                fam = c.parents + (c.node,)
                fam_miss = [v for v in fam if v in axis_of]
                if not fam_miss:
                    q = 0
                    for p in c.parents:
                        q = q * arities[p] + int(u[p])
                    expected[c.node][q, int(u[c.node])] += w
                    continue
                drop = tuple(
                    ax for v, ax in axis_of.items() if v not in fam
                )
                marg = post.sum(axis=drop) if drop else post
                kept = [v for v in miss if v in fam]  # axis order of marg
                for states in np.ndindex(marg.shape):
                    assign = dict(zip(kept, states))
                    q = 0
                    for p in c.parents:
                        q = q * arities[p] + int(assign.get(p, u[p]))
                    s = int(assign.get(c.node, u[c.node]))
                    expected[c.node][q, s] += w * float(marg[states])

        if ll < prev_ll - 1e-9 * max(1.0, abs(prev_ll)):
            raise AssertionError(
                f"EM log-likelihood decreased: {prev_ll} -> {ll}"
            )
        new_cpts = []
        delta = 0.0
        for c, exp_cnt in zip(bn.cpts, expected):
            totals = exp_cnt.sum(axis=1, keepdims=True)
            table = np.where(
                totals > 0, exp_cnt / np.where(totals > 0, totals, 1.0), c.table
            )
            delta = max(delta, float(np.abs(table - c.table).max()))
            new_cpts.append(CPT(c.node, c.parents, table))
        bn = DiscreteBN(g, new_cpts, d.variables)
        prev_ll = ll
        if delta < tol:
            converged = True
            break
    if not converged:
        notes.append(f"EM did not converge within {max_iter} iterations")
    fully_missing = [
        d.names[j] for j in range(d.m) if (d.rows[:, j] == MISSING).all()
    ]
    if fully_missing:
        notes.append(f"all-missing column(s) left at initialization: {fully_missing}")
    bn.notes.extend(notes)
    return bn


# -- serialization -----------------------------------------------------------------


def write_bn_text(bn: DiscreteBN) -> str:
    from .graph import write_graph_text

    parts = [write_graph_text(bn.graph), "\n"]
    for c in bn.cpts:
        pnames = ", ".join(bn.names[p] for p in c.parents)
        parts.append(f"CPT {bn.names[c.node]} | {pnames}\n")
        for row in c.table:
            parts.append(" ".join(f"{v:.17g}" for v in row) + "\n")
    return "".join(parts)


def parse_bn_text(text: str) -> DiscreteBN:
    from .graph import parse_graph_text

    lines = text.splitlines()
    first_cpt = next(
        (i for i, ln in enumerate(lines) if ln.startswith("CPT ")), len(lines)
    )
    graph = parse_graph_text("\n".join(lines[:first_cpt]))
    cpts: list[CPT] = []
    i = first_cpt
    while i < len(lines):
        ln = lines[i].strip()
        if not ln:
            i += 1
            continue
        if not ln.startswith("CPT "):
            raise ValueError(f"unexpected line in CPT section: {ln!r}")
        head = ln[4:]
        name, _, ptail = head.partition("|")
        node = graph.index_of(name.strip())
        pnames = [t.strip() for t in ptail.split(",") if t.strip()]
        parents = tuple(sorted(graph.index_of(p) for p in pnames))
        i += 1
        rows = []
        while i < len(lines) and lines[i].strip() and not lines[i].startswith("CPT "):
            rows.append([float(t) for t in lines[i].split()])
            i += 1
        cpts.append(CPT(node, parents, np.array(rows)))
    return DiscreteBN(graph, cpts)
