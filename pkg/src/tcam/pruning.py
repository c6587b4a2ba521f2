"""Edge pruning: refit every node on its ordered-graph parents and keep the
parents whose smooth term is significant."""
from __future__ import annotations

from .errors import InputError
from .graph_core import Dag, Edge
from .ordering import MAX_PARENTS, FitCache, _map
from .smoothers import DEFAULT_CONFIG, SmootherConfig, term_pvalue

DEFAULT_ALPHA = 1e-3


def _target_pvalues(cache: FitCache, l: int, parents: list[int], max_parents: int | None):
    """p-values of the parents of ``l``; parents beyond the cap get ``None``.

    Above the cap the weakest term (largest p-value) is dropped and the
    model refitted until the cap is met.
    """
    y = cache.X[:, l]
    dropped: dict[int, None] = {}
    parents = sorted(parents)
    while True:
        if not parents:
            return dropped
        fit = cache.fit(l, parents)
        preds = [cache.X[:, k] for k in parents]
        pv = [term_pvalue(fit, y, preds, j, cache.config) for j in range(len(parents))]
        if max_parents is None or len(parents) <= max_parents:
            return {**dropped, **dict(zip(parents, pv))}
        worst = max(range(len(parents)), key=lambda j: (pv[j], -j))
        dropped[parents.pop(worst)] = None


def edge_pvalues(data, dag_no: Dag, config: SmootherConfig = DEFAULT_CONFIG, *,
                 max_parents: int | None = MAX_PARENTS, threads: int = 1,
                 cache: FitCache | None = None) -> dict[Edge, float | None]:
    cache = cache or FitCache(data, config)
    targets = list(range(dag_no.node_count))
    per_target = _map(lambda l: _target_pvalues(cache, l, dag_no.parents(l), max_parents), targets, threads)
    return {(k, l): pv for l, res in zip(targets, per_target) for k, pv in res.items()}


def prune_from_pvalues(dag_no: Dag, pvalues: dict[Edge, float | None], alpha: float) -> Dag:
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    keep = [e for e in dag_no.sorted_edges() if pvalues.get(e) is not None and pvalues[e] < alpha]
    return Dag(dag_no.node_count, keep)


def prune(data, dag_no: Dag, alpha: float = DEFAULT_ALPHA, config: SmootherConfig = DEFAULT_CONFIG, *,
          max_parents: int | None = MAX_PARENTS, threads: int = 1, cache: FitCache | None = None) -> Dag:
    """Subgraph of ``dag_no`` keeping edges whose term p-value is below ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must lie in (0, 1)")
    pv = edge_pvalues(data, dag_no, config, max_parents=max_parents, threads=threads, cache=cache)
    return prune_from_pvalues(dag_no, pv, alpha)
