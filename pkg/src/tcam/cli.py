"""Command-line interface: ``tcam discover | simulate | evaluate | export-dot | benchmark | merge``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import dataprep, metrics, semgen
from .errors import InputError, NodeMismatchError, NumericalError
from .graph_core import Dag, PriorKnowledge
from .pipeline import DiscoverySettings, discover
from .results import build_document, dumps, graph_from_document, read_json, to_dot
from .smoothers import SmootherConfig

EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _settings(args) -> DiscoverySettings:
    return DiscoverySettings(
        mode=args.mode,
        seed=args.seed,
        pns_threshold=args.pns_threshold,
        k_folds=args.k_folds,
        use_pns=not args.no_pns,
        max_neighbors=args.max_neighbors,
        prune_alpha=args.prune_alpha,
        early_stop=None if args.no_early_stop else 1e-6,
        max_parents=args.max_parents,
        threads=args.threads,
        smoother=SmootherConfig(
            n_basis=args.n_basis,
            gcv_gamma=args.gcv_gamma,
            tol=args.backfit_tol,
            max_iter=args.backfit_max_iter,
        ),
    )


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def cmd_discover(args) -> int:
    raw = dataprep.read_csv(args.data, exclude=[args.id_column] if args.id_column else ())
    data = dataprep.preprocess(raw)
    if data.n_cols == 0:
        raise InputError("no usable columns after preprocessing")
    dropped = data.provenance["dropped"]
    prior_doc = read_json(args.prior) if args.prior else {}
    prior = PriorKnowledge.from_names(data.columns, prior_doc, ignore=dropped)
    settings = _settings(args)
    result = discover(data, prior, settings)
    provenance = {
        "source": Path(args.data).name,
        "n_rows": data.n_rows,
        "n_columns_raw": raw.n_cols,
        "imputed": data.provenance["imputed"],
        "dropped": dropped,
    }
    doc = build_document(data.columns, result, prior, settings, provenance, include_timings=args.timings)
    _write(dumps(doc), args.out)
    if args.dot:
        Path(args.dot).write_text(to_dot(doc), encoding="utf-8")
    return 0


def cmd_simulate(args) -> int:
    if args.p < 1 or args.n < 1:
        raise InputError("p and n must be positive")
    if not 0.0 <= args.edge_prob <= 1.0:
        raise InputError("edge-prob must lie in [0, 1]")
    if not 1 <= args.tiers <= args.p:
        raise InputError("tiers must lie in [1, p]")
    spec = semgen.random_sem(args.p, args.edge_prob, args.tiers, seed=args.seed)
    data = semgen.sample(spec, args.n, seed=args.seed)
    out = Path(args.out)
    dataprep.write_csv(data, out)
    truth = Path(args.truth) if args.truth else out.with_suffix(".truth.json")
    truth.write_text(dumps(spec.truth_document()), encoding="utf-8")
    return 0


def _aligned(columns, dag, ref_columns):
    if set(columns) != set(ref_columns) or len(columns) != len(ref_columns):
        raise NodeMismatchError("estimated and reference graphs have different nodes")
    if list(columns) == list(ref_columns):
        return dag
    index = {c: i for i, c in enumerate(ref_columns)}
    return Dag(len(ref_columns), [(index[columns[k]], index[columns[l]]) for k, l in dag.edges])


def _summary(values) -> dict:
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "sd": sd}


def evaluate_documents(estimated: list[dict], truths: list[dict] | None = None, expert: dict | None = None) -> dict:
    """Per-run metrics and, for several runs, mean/sd aggregates."""
    runs = []
    for i, est_doc in enumerate(estimated):
        cols, dag = graph_from_document(est_doc)
        row = {"n_edges": dag.n_edges()}
        if expert is not None:
            ref_cols = list(expert.get("columns") or cols)
            aligned = _aligned(cols, dag, ref_cols)
            row["ashd"] = metrics.ashd(aligned, metrics.ExpertGraph.from_document(ref_cols, expert))
        else:
            ref_cols, truth = graph_from_document(truths[i])
            aligned = _aligned(cols, dag, ref_cols)
            precision, recall = metrics.precision_recall(aligned, truth)
            row.update(shd=metrics.shd(aligned, truth), precision=precision, recall=recall,
                       ashd=metrics.ashd(aligned, metrics.ExpertGraph(truth.node_count, truth.edges)))
        timings = est_doc.get("timings") or {}
        if "total" in timings:
            row["time"] = timings["total"]
        runs.append(row)
    report = {"runs": runs}
    if len(runs) > 1:
        keys = [k for k in runs[0] if all(k in r for r in runs)]
        report["aggregate"] = {k: _summary([r[k] for r in runs]) for k in keys}
    return report


def cmd_evaluate(args) -> int:
    estimated = [read_json(p) for p in args.estimated]
    if args.expert:
        report = evaluate_documents(estimated, expert=read_json(args.expert))
    else:
        truths = [read_json(p) for p in args.truth]
        if len(truths) == 1 and len(estimated) > 1:
            truths = truths * len(estimated)
        if len(truths) != len(estimated):
            raise InputError("give one truth file, or one per estimated file")
        report = evaluate_documents(estimated, truths=truths)
    _write(dumps(report), args.out)
    return 0


def cmd_export_dot(args) -> int:
    doc = read_json(args.results)
    _write(to_dot(doc), args.out)
    return 0


def run_benchmark(runs: int, p: int, tiers: int, n: int, edge_prob: float, seed: int,
                  settings: DiscoverySettings) -> dict:
    """Simulate, learn with CAM and TCAM, and score against the truth, ``runs`` times."""
    rows = {"cam": [], "tcam": []}
    for r in range(runs):
        spec = semgen.random_sem(p, edge_prob, tiers, seed=seed + r)
        data = dataprep.preprocess(semgen.sample(spec, n, seed=seed + 10_000 + r))
        expert = metrics.ExpertGraph(p, spec.dag.edges)
        tiered = PriorKnowledge.build(p, spec.tiers if spec.tiers is not None else None)
        for mode, prior in (("cam", PriorKnowledge.trivial(p)), ("tcam", tiered)):
            s = DiscoverySettings(**{**settings.__dict__, "mode": mode, "seed": seed + r})
            t0 = time.perf_counter()
            res = discover(data, prior, s)
            elapsed = time.perf_counter() - t0
            rows[mode].append({
                "ashd": metrics.ashd(res.dag, expert),
                "n_edges": res.dag.n_edges(),
                "time": elapsed,
                "iterations": res.ordering.iterations,
                "violations": len(prior.violations(res.dag)),
            })
    table = {}
    for mode, rs in rows.items():
        table[mode] = {k: _summary([x[k] for x in rs]) for k in ("ashd", "n_edges", "time", "iterations")}
        table[mode]["violations"] = int(sum(x["violations"] for x in rs))
    return {"settings": {"runs": runs, "p": p, "tiers": tiers, "n": n, "edge_prob": edge_prob, "seed": seed},
            "table": table, "runs": rows}


def format_table(report: dict) -> str:
    head = f"{'':6}{'mean aSHD':>11}{'sd aSHD':>9}{'mean #edges':>13}{'sd #edges':>11}{'mean time (s)':>15}{'mean iter':>11}"
    lines = [head]
    for mode, t in report["table"].items():
        lines.append(
            f"{mode.upper():6}{t['ashd']['mean']:11.3f}{t['ashd']['sd']:9.3f}{t['n_edges']['mean']:13.3f}"
            f"{t['n_edges']['sd']:11.3f}{t['time']['mean']:15.3f}{t['iterations']['mean']:11.2f}"
        )
    return "\n".join(lines) + "\n"


def cmd_benchmark(args) -> int:
    if args.runs < 1 or not 1 <= args.tiers <= args.p:
        raise InputError("need runs >= 1 and 1 <= tiers <= p")
    report = run_benchmark(args.runs, args.p, args.tiers, args.n, args.edge_prob, args.seed, _settings(args))
    sys.stdout.write(format_table(report))
    if args.out:
        Path(args.out).write_text(dumps(report), encoding="utf-8")
    return 0


def cmd_merge(args) -> int:
    mother = dataprep.read_part_table(args.mother, args.id_column)
    children = [dataprep.read_part_table(c, args.id_column) for c in args.child]
    merged = dataprep.merge_bom(mother, children, dataprep.read_bom(args.bom))
    dataprep.write_part_table(merged, args.out, args.id_column)
    return 0


def _add_discovery_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="seed for CV folds (and simulation in benchmark)")
    p.add_argument("--threads", type=int, default=1, help="concurrent regression fits")
    p.add_argument("--prune-alpha", type=float, default=1e-3)
    p.add_argument("--pns-threshold", type=float, default=1e-2)
    p.add_argument("--mode", choices=("cam", "tcam"), default=None,
                   help="default: tcam if the prior has tiers, forbidden edges or roots")
    p.add_argument("--no-pns", action="store_true", help="skip LASSO screening")
    p.add_argument("--max-neighbors", type=int, default=None)
    p.add_argument("--max-parents", type=int, default=20)
    p.add_argument("--no-early-stop", action="store_true", help="run the ordering loop to exhaustion")
    p.add_argument("--k-folds", type=int, default=10, help="LASSO cross-validation folds")
    p.add_argument("--n-basis", type=int, default=10, help="spline basis functions per term")
    p.add_argument("--gcv-gamma", type=float, default=1.4, help="edf inflation in the GCV criterion")
    p.add_argument("--backfit-tol", type=float, default=1e-6)
    p.add_argument("--backfit-max-iter", type=int, default=50)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcam", description="Causal additive structure learning with prior knowledge")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("discover", help="learn a DAG from a CSV file")
    d.add_argument("data")
    d.add_argument("--prior", help="JSON with tiers / forbidden / roots")
    d.add_argument("--out", help="results JSON (default stdout)")
    d.add_argument("--dot", help="also write a DOT rendering here")
    d.add_argument("--timings", action="store_true", help="record wall-clock timings in the results")
    d.add_argument("--id-column", help="identifier column to ignore (e.g. from `tcam merge`)")
    _add_discovery_flags(d)
    d.set_defaults(func=cmd_discover)

    s = sub.add_parser("simulate", help="sample a random additive SEM")
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--edge-prob", type=float, default=0.3)
    s.add_argument("--tiers", type=int, default=1)
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="CSV path")
    s.add_argument("--truth", help="truth JSON path (default: <out>.truth.json)")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="compare estimated graphs with a truth or expert graph")
    e.add_argument("--estimated", nargs="+", required=True)
    ref = e.add_mutually_exclusive_group(required=True)
    ref.add_argument("--truth", nargs="+")
    ref.add_argument("--expert")
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    x = sub.add_parser("export-dot", help="render a results document as DOT")
    x.add_argument("results")
    x.add_argument("--out")
    x.set_defaults(func=cmd_export_dot)

    b = sub.add_parser("benchmark", help="CAM vs TCAM on simulated tiered SEMs")
    b.add_argument("--runs", type=int, default=20)
    b.add_argument("--p", type=int, default=10)
    b.add_argument("--tiers", type=int, default=3)
    b.add_argument("--n", type=int, default=500)
    b.add_argument("--edge-prob", type=float, default=0.3)
    b.add_argument("--out")
    _add_discovery_flags(b)
    b.set_defaults(func=cmd_benchmark)

    m = sub.add_parser("merge", help="merge child part tables into their mother table via a BoM")
    m.add_argument("--mother", required=True)
    m.add_argument("--child", action="append", required=True)
    m.add_argument("--bom", required=True)
    m.add_argument("--id-column", default="id")
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_merge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (InputError, OSError, json.JSONDecodeError) as exc:
        print(f"tcam: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"tcam: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
