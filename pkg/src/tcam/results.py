"""Results documents (JSON) and their Graphviz DOT rendering."""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .errors import InputError
from .graph_core import Dag, PriorKnowledge
from .pipeline import DiscoveryResult, DiscoverySettings

SCHEMA_VERSION = "1.0"
TIER_PALETTE = (
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
    "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a",
)
DEFAULT_COLOR = "#9ecae1"


def load_schema() -> dict:
    text = resources.files("tcam").joinpath("schemas/results.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def build_document(
    columns: Sequence[str],
    result: DiscoveryResult,
    prior: PriorKnowledge,
    settings: DiscoverySettings,
    provenance: Mapping,
    include_timings: bool = False,
) -> dict:
    gains = result.gains()
    edges = []
    for k, l in result.dag.sorted_edges():
        pv = result.pvalues.get((k, l))
        edges.append({
            "source": columns[k],
            "target": columns[l],
            "gain": gains.get((k, l)),
            "p_value": pv,
        })
    ordered = result.ordering
    tiers = None
    if prior.n_tiers > 1:
        tiers = {c: int(t) for c, t in zip(columns, prior.tiers)}
    return {
        "version": SCHEMA_VERSION,
        "mode": result.mode,
        "columns": list(columns),
        "tiers": tiers,
        "roots": [columns[r] for r in sorted(prior.roots)],
        "edges": edges,
        "ordering": [columns[k] for k in ordered.ordering.order],
        "scores": {"initial": ordered.initial_score, "final": ordered.final_score},
        "ordered_graph": {
            "n_edges": ordered.dag_no.n_edges(),
            "initial_edges": [[columns[k], columns[l]] for k, l in ordered.initial_edges],
            "p_values": [
                {"source": columns[k], "target": columns[l], "p_value": pv}
                for (k, l), pv in sorted(result.pvalues.items(), key=lambda kv: (kv[0][1], kv[0][0]))
            ],
        },
        "trace": [
            {"source": columns[s.source], "target": columns[s.target], "gain": s.gain, "score": s.score}
            for s in ordered.trace
        ],
        "iterations": ordered.iterations,
        "stopped_early": ordered.stopped_early,
        "pns": {
            "threshold": settings.pns_threshold if settings.use_pns else None,
            "candidates": {c: n for c, n in zip(columns, result.neighbors.counts())},
        },
        "provenance": dict(provenance),
        "settings": settings.to_dict(),
        "timings": dict(result.timings) if include_timings else None,
    }


def dumps(doc: Mapping) -> str:
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def read_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None


def graph_from_document(doc: Mapping) -> tuple[list[str], Dag]:
    """Columns and DAG of a results or truth document.

    Edges may be ``{"source": .., "target": ..}`` objects (results) or
    ``[source, target]`` pairs (truth files).
    """
    try:
        columns = list(doc["columns"])
        raw = doc["edges"]
    except (KeyError, TypeError):
        raise InputError("graph document needs 'columns' and 'edges'") from None
    index = {c: i for i, c in enumerate(columns)}
    dag = Dag(len(columns))
    for e in raw:
        s, t = (e["source"], e["target"]) if isinstance(e, Mapping) else (e[0], e[1])
        if s not in index or t not in index:
            raise InputError(f"edge ({s!r}, {t!r}) names an unknown column")
        dag.add_edge(index[s], index[t])
    return columns, dag


def to_dot(doc: Mapping, name: str = "tcam") -> str:
    """DOT source: nodes filled by tier, edges colored by their source's tier."""
    columns, dag = graph_from_document(doc)
    tiers = doc.get("tiers") or {}
    levels = sorted(set(tiers.values()))

    def color(col):
        if col not in tiers:
            return DEFAULT_COLOR
        return TIER_PALETTE[levels.index(tiers[col]) % len(TIER_PALETTE)]

    def q(s):
        return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'

    lines = [f"digraph {q(name)} {{", "  node [style=filled];"]
    for c in columns:
        attrs = f'fillcolor="{color(c)}"'
        if c in tiers:
            attrs += f', tier="{tiers[c]}"'
        lines.append(f"  {q(c)} [{attrs}];")
    for k, l in dag.sorted_edges():
        lines.append(f'  {q(columns[k])} -> {q(columns[l])} [color="{color(columns[k])}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
