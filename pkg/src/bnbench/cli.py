"""Command-line front end.

Subcommands cover the single steps (learn / fit / predict / sample /
compare / stats / gen) and the batch drivers (bench / ranks).  ``bench``
exits 0 only when every requested row succeeded, 2 when any row carries an
error record (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import impute_missing_state, load_csv, write_csv
from .experiment import (
    ALGORITHMS,
    config_from_json,
    emit_rank_report,
    emit_report,
    gen_ground_truth,
    parse_report_csv,
    rank_report,
    run_algorithm,
    run_experiment,
)
from .graph import parse_graph_text, randomize_orientation, write_graph_text
from .metrics import arc_comparison, ddm, rank_summary
from .model import em_fit, forward_sample, mle_fit, parse_bn_text, predict, write_bn_text
from .score import model_stats


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs:
        key, _, value = pair.partition("=")
        if not value:
            raise SystemExit(f"--param expects key=value, got {pair!r}")
        out[key] = _parse_value(value)
    return out


def _load_bn(path: str):
    return parse_bn_text(Path(path).read_text())


def _load_graph(path: str):
    return parse_graph_text(Path(path).read_text())


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_learn(args) -> int:
    d = load_csv(args.data, args.missing_token)
    if args.impute:
        d = impute_missing_state(d)
    g = run_algorithm(args.algorithm, d, _parse_overrides(args.param))
    _write(args.out, write_graph_text(g))
    return 0


def cmd_fit(args) -> int:
    d = load_csv(args.data, args.missing_token)
    g = _load_graph(args.graph)
    if not g.all_edges_directed():
        g = randomize_orientation(g, args.seed)
    if args.policy == "mle":
        bn = mle_fit(g, impute_missing_state(d), args.pseudocount)
    else:
        bn = em_fit(g, d, seed=args.seed)
    _write(args.out, write_bn_text(bn))
    return 0


def cmd_predict(args) -> int:
    bn = _load_bn(args.bn)
    d = load_csv(args.data, args.missing_token)
    if args.policy == "mle":
        d = impute_missing_state(d)
    from .data import MISSING
    from .metrics import auc_ovr, cc

    j = d.names.index(args.target)
    pred = predict(bn, d, j)
    labels = d.rows[:, j]
    argmax = pred.argmax.copy()
    argmax[labels == MISSING] = -1
    per_state, summary = auc_ovr(pred.posteriors, labels)
    lines = [f"target,{args.target}"]
    lines.append(f"cc,{cc(argmax, labels):.4g}")
    lines.append(f"auc,{summary:.4g}")
    for s, v in enumerate(per_state):
        lines.append(f"auc[{d.variables[j].states[s]}],{v:.4g}")
    lines.append(f"excluded_rows,{pred.excluded + int((labels == MISSING).sum())}")
    _write(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_sample(args) -> int:
    bn = _load_bn(args.bn)
    d = forward_sample(bn, args.n, args.seed)
    write_csv(d, args.out)
    return 0


def cmd_compare(args) -> int:
    learned = _load_graph(args.learned)
    reference = _load_graph(args.reference)
    if not learned.all_edges_directed():
        learned = randomize_orientation(learned, args.seed)
    comp = arc_comparison(learned, reference)
    score = ddm(comp)
    _write(
        args.out,
        "a,d,r,m,t,ddm\n"
        f"{comp.a},{comp.d},{comp.r},{comp.m},{comp.t},{score:.3f}\n",
    )
    return 0


def cmd_stats(args) -> int:
    bn = _load_bn(args.bn)
    d = load_csv(args.data, args.missing_token)
    if not d.is_complete():
        d = impute_missing_state(d)
    s = model_stats(bn, d)
    _write(
        args.out,
        "chi2,df,p,bic,n,skipped_cells\n"
        f"{s.chi2:.4g},{s.df},{s.p_value:.4g},{s.bic:.4g},{s.n},{s.skipped_cells}\n",
    )
    return 0


def cmd_gen(args) -> int:
    bn = gen_ground_truth(args.nodes, args.arcs, args.min_states, args.max_states, args.seed)
    _write(args.out, write_bn_text(bn))
    return 0


def cmd_bench(args) -> int:
    doc = json.loads(Path(args.config).read_text())
    cfg = config_from_json(doc, seed=args.seed)
    rows = run_experiment(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(emit_report(rows, "csv"))
    (out_dir / "report.md").write_text(emit_report(rows, "markdown"))
    (out_dir / "ranks.csv").write_text(emit_rank_report(rank_report(rows, args.k)))
    failed = [r for r in rows if r.error]
    for r in failed:
        print(
            f"row error: {r.dataset_label}/{r.policy}/{r.algorithm}: {r.error}",
            file=sys.stderr,
        )
    return 2 if failed else 0


def cmd_ranks(args) -> int:
    metric_cols = {"BIC": "bic", "DDM": "ddm"}
    tests: dict[str, dict[tuple, list[tuple[str, float]]]] = {
        m: {} for m in ("BIC", "DDM", "AUC", "CC")
    }
    for path in args.reports:
        recs = parse_report_csv(Path(path).read_text())
        for rec in recs:
            group = (path, rec["dataset"], rec["policy"])
            for metric, col in metric_cols.items():
                if rec.get(col):
                    tests[metric].setdefault(group, []).append(
                        (rec["algorithm"], float(rec[col]))
                    )
            for col, value in rec.items():
                for metric, suffix in (("AUC", " AUC"), ("CC", " CC")):
                    if col.endswith(suffix) and value:
                        tests[metric].setdefault(group + (col,), []).append(
                            (rec["algorithm"], float(value))
                        )
    ranks = {
        metric: rank_summary(list(groups.values()), args.k)
        for metric, groups in tests.items()
    }
    _write(args.out, emit_rank_report(ranks))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bnbench", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common_data(p):
        p.add_argument("--data", required=True, help="CSV dataset")
        p.add_argument("--missing-token", default="", help="token treated as a missing cell")
        p.add_argument("--out", default=None, help="output file (default stdout)")

    p = sub.add_parser("learn", help="run one structure-learning algorithm")
    common_data(p)
    p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--impute", action="store_true", help="impute missing-as-state first")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("fit", help="fit CPTs for a graph on a dataset")
    common_data(p)
    p.add_argument("--graph", required=True)
    p.add_argument("--policy", choices=("mle", "em"), default="mle")
    p.add_argument("--pseudocount", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="per-target prediction report")
    common_data(p)
    p.add_argument("--bn", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--policy", choices=("mle", "em"), default="mle")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sample", help="forward-sample a BN to CSV")
    p.add_argument("--bn", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("compare", help="arc stats + DDM of two graphs")
    p.add_argument("--learned", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stats", help="model statistics of a BN on data")
    common_data(p)
    p.add_argument("--bn", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen", help="generate a seeded random ground-truth BN")
    p.add_argument("--nodes", type=int, default=27)
    p.add_argument("--arcs", type=int, default=31)
    p.add_argument("--min-states", type=int, default=2)
    p.add_argument("--max-states", type=int, default=7)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="run a full experiment config")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--k", type=int, default=3)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ranks", help="top-k summaries from emitted CSV reports")
    p.add_argument("reports", nargs="+")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_ranks)

    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
