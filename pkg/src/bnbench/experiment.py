"""Experiment harness: learn -> orient -> fit -> predict -> score.

A single JSON config drives a grid of (dataset or sample size) x algorithm
runs.  Every cell yields a ReportRow holding the model statistics, the arc
comparison against the reference graph (when present) and per-target
prediction reports; failures are captured per row so one broken algorithm
never aborts the batch.  The reference graph itself is fitted and scored as
the row named "KBG".
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .data import MISSING, Dataset, impute_missing_state, load_csv
from .graph import MixedGraph, parse_graph_text, randomize_orientation
from .learn import (
    FciParams,
    FgesParams,
    PcParams,
    fas,
    fci,
    fges,
    gfci,
    images_bdeu,
    pc,
    preset,
)
from .metrics import ArcComparison, PredictionReport, arc_comparison, auc_ovr, cc, ddm
from .model import CPT, DiscreteBN, em_fit, forward_sample, mle_fit, parse_bn_text, predict
from .score import ModelStats, model_stats

ALGORITHMS = (
    "pc",
    "cpc",
    "pc-stable",
    "cpc-stable",
    "pc-max",
    "fas",
    "fges",
    "images-bdeu",
    "fci",
    "rfci",
    "cfci",
    "gfci",
)

POLICY_MLE = "IMPUTE_STATE_MLE"
POLICY_EM = "EM_MAR"
KBG = "KBG"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TargetSpec:
    name: str
    role: str = "PRIMARY"  # PRIMARY or SECONDARY

    def __post_init__(self):
        if self.role not in ("PRIMARY", "SECONDARY"):
            raise ConfigError(f"unknown target role {self.role!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    data: tuple[str, ...] = ()
    reference_graph: str | None = None
    algorithms: tuple[tuple[str, dict], ...] = ()
    missing_policy: tuple[str, ...] = (POLICY_MLE,)
    targets: tuple[TargetSpec, ...] = ()
    sample_sizes: tuple[int, ...] | None = None
    ground_truth_bn: str | None = None
    missing_token: str = ""

    def __post_init__(self):
        if self.sample_sizes is not None and self.ground_truth_bn is None:
            raise ConfigError("synthetic mode (sample_sizes) requires ground_truth_bn")
        if self.ground_truth_bn is None and not self.data:
            raise ConfigError("real mode requires at least one data file")
        for pol in self.missing_policy:
            if pol not in (POLICY_MLE, POLICY_EM):
                raise ConfigError(f"unknown missing policy {pol!r}")
        for name, _ in self.algorithms:
            if name not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {name!r}")


def config_from_json(doc: dict[str, Any] | str, **overrides) -> ExperimentConfig:
    if isinstance(doc, str):
        doc = json.loads(doc)
    doc = dict(doc)
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if "seed" not in doc:
        raise ConfigError("config needs a seed")
    algorithms = []
    for entry in doc.get("algorithms", []):
        if isinstance(entry, str):
            algorithms.append((entry, {}))
        else:
            algorithms.append((entry["name"], dict(entry.get("params", {}))))
    targets = []
    for entry in doc.get("targets", []):
        if isinstance(entry, str):
            targets.append(TargetSpec(entry))
        else:
            targets.append(TargetSpec(entry["name"], entry.get("role", "PRIMARY")))
    policy = doc.get("missing_policy", POLICY_MLE)
    if isinstance(policy, str):
        policy = [policy]
    data = doc.get("data", [])
    if isinstance(data, str):
        data = [data]
    sizes = doc.get("sample_sizes")
    return ExperimentConfig(
        seed=int(doc["seed"]),
        data=tuple(data),
        reference_graph=doc.get("reference_graph"),
        algorithms=tuple(algorithms),
        missing_policy=tuple(policy),
        targets=tuple(targets),
        sample_sizes=tuple(int(s) for s in sizes) if sizes is not None else None,
        ground_truth_bn=doc.get("ground_truth_bn"),
        missing_token=doc.get("missing_token", ""),
    )


@dataclass
class ReportRow:
    dataset_label: str
    policy: str
    algorithm: str
    stats: ModelStats | None = None
    arcs: ArcComparison | None = None
    ddm: float | None = None
    predictions: list[PredictionReport] = field(default_factory=list)
    error: str | None = None
    notes: list[str] = field(default_factory=list)


# -- ground truth generation ----------------------------------------------------


def gen_ground_truth(
    nodes: int = 27,
    arcs: int = 31,
    min_states: int = 2,
    max_states: int = 7,
    seed: int = 0,
) -> DiscreteBN:
    """Seeded random DAG with exactly ``arcs`` edges and Dirichlet(1) CPTs.

    Node pairs are drawn uniformly and oriented along a random topological
    order; arities are uniform on [min_states, max_states].
    """
    if not 2 <= min_states <= max_states:
        raise ValueError("need 2 <= min_states <= max_states")
    max_arcs = nodes * (nodes - 1) // 2
    if not 0 <= arcs <= max_arcs:
        raise ValueError(f"arcs must lie in 0..{max_arcs}")
    rng = np.random.default_rng(seed)
    width = len(str(nodes))
    names = [f"X{i + 1:0{width}d}" for i in range(nodes)]
    order = rng.permutation(nodes)
    pairs = [(i, j) for i in range(nodes) for j in range(i + 1, nodes)]
    chosen = rng.choice(len(pairs), size=arcs, replace=False)
    g = MixedGraph(names)
    for idx in sorted(int(c) for c in chosen):
        i, j = pairs[idx]
        g.add_directed(int(order[i]), int(order[j]))
    arities = [int(rng.integers(min_states, max_states + 1)) for _ in range(nodes)]
    cpts = []
    for node in range(nodes):
        parents = tuple(sorted(g.parents(node)))
        q = int(np.prod([arities[p] for p in parents], dtype=np.int64))
        k = arities[node]
        table = rng.dirichlet(np.ones(k), size=q)
        cpts.append(CPT(node, parents, table))
    return DiscreteBN(g, cpts)


# -- algorithm dispatch -----------------------------------------------------------


def _pc_params(name: str, overrides: dict) -> PcParams:
    return preset(name, **overrides)


def run_algorithm(name: str, d: Dataset, overrides: dict | None = None) -> MixedGraph:
    """Run one named search on one dataset and return its graph."""
    overrides = dict(overrides or {})
    if name in ("pc", "cpc", "pc-stable", "cpc-stable", "pc-max"):
        return pc(d, _pc_params(name, overrides))
    if name == "fas":
        skeleton, _ = fas(d, PcParams(**overrides))
        return skeleton
    if name == "fges":
        return fges(d, FgesParams(**overrides))
    if name == "images-bdeu":
        return images_bdeu([d], FgesParams(**overrides))
    if name in ("fci", "rfci", "cfci"):
        return fci(d, FciParams(**overrides), variant=name)
    if name == "gfci":
        fges_keys = {f.name for f in FgesParams.__dataclass_fields__.values()}
        fp = FgesParams(**{k: v for k, v in overrides.items() if k in fges_keys})
        cp = FciParams(**{k: v for k, v in overrides.items() if k not in fges_keys})
        return gfci(d, fp, cp)
    raise ConfigError(f"unknown algorithm {name!r}")


_NEEDS_COMPLETE = {"fges", "images-bdeu", "gfci"}


# -- the grid ----------------------------------------------------------------------


def _labels_and_datasets(cfg: ExperimentConfig) -> tuple[list[tuple[str, Dataset]], MixedGraph | None]:
    """Resolve config into labeled datasets and the reference graph."""
    if cfg.ground_truth_bn is not None:
        bn = parse_bn_text(Path(cfg.ground_truth_bn).read_text())
        sizes = cfg.sample_sizes or (1000,)
        full = forward_sample(bn, max(sizes), cfg.seed)
        pairs = [(f"N={s}", full.prefix(s)) for s in sizes]
        return pairs, bn.graph
    datasets = [
        (Path(p).name, load_csv(p, cfg.missing_token)) for p in cfg.data
    ]
    reference = None
    if cfg.reference_graph is not None:
        reference = parse_graph_text(Path(cfg.reference_graph).read_text())
    return datasets, reference


def _as_dag(g: MixedGraph, seed: int) -> MixedGraph:
    from .graph import _directed_part_acyclic

    if g.all_edges_directed() and _directed_part_acyclic(g):
        return g
    return randomize_orientation(g, seed)


def _score_row(
    row: ReportRow,
    dag: MixedGraph,
    fit_data: Dataset,
    stats_data: Dataset,
    predict_data: Dataset,
    reference: MixedGraph | None,
    targets: Sequence[TargetSpec],
    policy: str,
    seed: int,
) -> None:
    if policy == POLICY_MLE:
        bn = mle_fit(dag, fit_data)
    else:
        bn = em_fit(dag, fit_data, seed=seed)
    row.notes.extend(bn.notes)
    row.stats = model_stats(bn, stats_data)
    if reference is not None:
        comp = arc_comparison(dag, reference)
        row.arcs = comp
        row.ddm = ddm(comp)
    for t in targets:
        if t.name not in predict_data.names:
            row.notes.append(f"target {t.name!r} not in data; skipped")
            continue
        j = predict_data.names.index(t.name)
        pred = predict(bn, predict_data, j)
        labels = predict_data.rows[:, j]
        argmax = pred.argmax.copy()
        unlabeled = labels == MISSING
        argmax[unlabeled] = -1
        per_state, summary = auc_ovr(pred.posteriors[~unlabeled], labels[~unlabeled])
        row.predictions.append(
            PredictionReport(
                target=t.name,
                per_state_auc=per_state,
                summary_auc=summary,
                cc=cc(argmax, labels),
                excluded_rows=pred.excluded + int(unlabeled.sum()),
            )
        )


def run_experiment(cfg: ExperimentConfig) -> list[ReportRow]:
    """Execute the full grid; per-row failures become error records."""
    labeled, reference = _labels_and_datasets(cfg)
    if reference is not None and not reference.all_edges_directed():
        raise ConfigError("reference graph must be a DAG")
    rows: list[ReportRow] = []
    for label, d in labeled:
        if reference is not None and reference.names != d.names:
            raise ConfigError(
                f"reference graph nodes disagree with dataset {label!r}"
            )
        imputed = impute_missing_state(d)
        for policy in cfg.missing_policy:
            if policy == POLICY_MLE:
                learn_data, fit_data, stats_data, predict_data = (
                    imputed,
                    imputed,
                    imputed,
                    imputed,
                )
            else:
                learn_data, fit_data, predict_data = d, d, d
                stats_data = None  # resolved lazily (listwise-complete subset)
            run_specs = []
            if reference is not None:
                run_specs.append((KBG, None))
            run_specs.extend(cfg.algorithms)
            for name, overrides in run_specs:
                row = ReportRow(label, policy, name)
                rows.append(row)
                try:
                    if policy == POLICY_EM and name in _NEEDS_COMPLETE and not d.is_complete():
                        raise ValueError(
                            f"{name} cannot handle missing values (complete data required)"
                        )
                    if name == KBG:
                        dag = reference
                    else:
                        with warnings.catch_warnings():
                            warnings.simplefilter("ignore")
                            learned = run_algorithm(name, learn_data, overrides)
                        dag = _as_dag(learned, cfg.seed)
                    sd = stats_data if stats_data is not None else fit_data.complete_rows()
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        _score_row(
                            row,
                            dag,
                            fit_data,
                            sd,
                            predict_data,
                            reference,
                            cfg.targets,
                            policy,
                            cfg.seed,
                        )
                except Exception as exc:  # row-level isolation by design
                    row.error = f"{type(exc).__name__}: {exc}"
    return rows


# -- report emission -----------------------------------------------------------------


def _fmt(value, spec: str = "{:.4g}") -> str:
    if value is None:
        return ""
    if isinstance(value, float) and math.isnan(value):
        return ""
    return spec.format(value)


def _row_cells(row: ReportRow, target_names: list[str]) -> list[str]:
    s, a = row.stats, row.arcs
    cells = [
        row.algorithm,
        _fmt(s.chi2) if s else "",
        str(s.df) if s else "",
        _fmt(s.p_value) if s else "",
        _fmt(s.bic) if s else "",
        str(a.a) if a else "",
        str(a.d) if a else "",
        str(a.r) if a else "",
        str(a.m) if a else "",
        _fmt(row.ddm, "{:.3f}") if row.ddm is not None else "",
    ]
    by_name = {p.target: p for p in row.predictions}
    for t in target_names:
        p = by_name.get(t)
        cells.append(_fmt(p.summary_auc) if p else "")
        cells.append(_fmt(p.cc) if p else "")
    cells.append(row.error.replace(",", ";") if row.error else "")
    return cells


def _header(target_names: list[str]) -> list[str]:
    head = ["algorithm", "chi2", "df", "p", "bic", "a", "d", "r", "m", "ddm"]
    for t in target_names:
        head += [f"{t} AUC", f"{t} CC"]
    return head + ["error"]


MARKED_COLUMNS = {"p", "bic", "ddm"}


def _top_flags(table: list[list[str]], header: list[str]) -> set[tuple[int, int]]:
    """Cells holding the column maximum, for the columns the tables underline."""
    flags: set[tuple[int, int]] = set()
    for j, col in enumerate(header):
        if not (col in MARKED_COLUMNS or col.endswith(" AUC") or col.endswith(" CC")):
            continue
        vals = []
        for i, row in enumerate(table):
            try:
                vals.append((float(row[j]), i))
            except (ValueError, IndexError):
                continue
        if not vals:
            continue
        best = max(v for v, _ in vals)
        flags.update((i, j) for v, i in vals if v == best)
    return flags


def _grouped(rows: Sequence[ReportRow]):
    groups: dict[tuple[str, str], list[ReportRow]] = {}
    for row in rows:
        groups.setdefault((row.dataset_label, row.policy), []).append(row)
    return groups


def emit_report(rows: Sequence[ReportRow], fmt: str = "csv") -> str:
    """Render the grid; one table per (dataset, policy) group.

    CSV keeps cells unmarked so the file re-parses to the emitted values;
    markdown bolds the best value of each marked column.
    """
    if fmt not in ("csv", "markdown"):
        raise ValueError(f"unknown report format {fmt!r}")
    target_names = sorted({p.target for r in rows for p in r.predictions})
    header = _header(target_names)
    out: list[str] = []
    for (label, policy), group in _grouped(rows).items():
        table = [_row_cells(r, target_names) for r in group]
        if fmt == "csv":
            out.append(f"# dataset={label} policy={policy}")
            out.append(",".join(header))
            for cells in table:
                out.append(",".join(cells))
        else:
            out.append(f"## {label} ({policy})")
            out.append("")
            flags = _top_flags(table, header)
            out.append("| " + " | ".join(header) + " |")
            out.append("|" + "|".join("---" for _ in header) + "|")
            for i, cells in enumerate(table):
                shown = [
                    f"**{c}**" if (i, j) in flags and c else c
                    for j, c in enumerate(cells)
                ]
                out.append("| " + " | ".join(shown) + " |")
        out.append("")
    return "\n".join(out)


def parse_report_csv(text: str) -> list[dict[str, str]]:
    """Re-read an emitted CSV report into one dict per row."""
    rows: list[dict[str, str]] = []
    label = policy = ""
    header: list[str] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = dict(
                kv.split("=", 1) for kv in line[1:].strip().split(" ") if "=" in kv
            )
            label = parts.get("dataset", "")
            policy = parts.get("policy", "")
            header = []
            continue
        cells = line.split(",")
        if not header:
            header = cells
            continue
        rec = dict(zip(header, cells))
        rec["dataset"] = label
        rec["policy"] = policy
        rows.append(rec)
    return rows


def rank_report(rows: Sequence[ReportRow], k: int = 3) -> dict[str, dict[str, float]]:
    """Top-k frequencies per metric, with ties at the k-th value included.

    BIC and DDM count one test per (dataset, policy); AUC and CC count one
    test per (dataset, policy, target).
    """
    from .metrics import rank_summary

    by_group = _grouped(rows)
    bic_tests, ddm_tests, auc_tests, cc_tests = [], [], [], []
    for group in by_group.values():
        bic = [(r.algorithm, r.stats.bic) for r in group if r.stats is not None]
        if bic:
            bic_tests.append(bic)
        dd = [(r.algorithm, r.ddm) for r in group if r.ddm is not None]
        if dd:
            ddm_tests.append(dd)
        targets = sorted({p.target for r in group for p in r.predictions})
        for t in targets:
            auc = [
                (r.algorithm, p.summary_auc)
                for r in group
                for p in r.predictions
                if p.target == t
            ]
            ccs = [
                (r.algorithm, p.cc)
                for r in group
                for p in r.predictions
                if p.target == t
            ]
            if auc:
                auc_tests.append(auc)
            if ccs:
                cc_tests.append(ccs)
    return {
        "BIC": rank_summary(bic_tests, k),
        "DDM": rank_summary(ddm_tests, k),
        "AUC": rank_summary(auc_tests, k),
        "CC": rank_summary(cc_tests, k),
    }


def emit_rank_report(ranks: dict[str, dict[str, float]]) -> str:
    lines = ["metric,model,top_share_pct"]
    for metric in ("BIC", "DDM", "AUC", "CC"):
        for model, pct in sorted(ranks.get(metric, {}).items()):
            lines.append(f"{metric},{model},{pct:.2f}")
    return "\n".join(lines) + "\n"
