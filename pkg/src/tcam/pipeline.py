"""End-to-end structure learning: screen, order, prune."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .dataprep import Dataset
from .errors import InputError
from .graph_core import Dag, Edge, PriorKnowledge
from .ordering import EARLY_STOP, MAX_PARENTS, FitCache, OrderingResult, greedy_order
from .pns import DEFAULT_THRESHOLD, NeighborSets, full_neighbors, select_neighbors
from .pruning import DEFAULT_ALPHA, edge_pvalues, prune_from_pvalues
from .smoothers import DEFAULT_CONFIG, SmootherConfig


@dataclass
class DiscoverySettings:
    mode: str | None = None  # None: tcam when the prior says anything, else cam
    seed: int = 0
    pns_threshold: float = DEFAULT_THRESHOLD
    use_pns: bool = True
    k_folds: int = 10
    max_neighbors: int | None = None
    prune_alpha: float = DEFAULT_ALPHA
    early_stop: float | None = EARLY_STOP
    max_parents: int | None = MAX_PARENTS
    threads: int = 1
    smoother: SmootherConfig = DEFAULT_CONFIG

    def resolve_mode(self, prior: PriorKnowledge) -> str:
        if self.mode is not None:
            return self.mode
        return "cam" if prior.is_trivial() else "tcam"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "pns_threshold": self.pns_threshold,
            "use_pns": self.use_pns,
            "k_folds": self.k_folds,
            "max_neighbors": self.max_neighbors,
            "prune_alpha": self.prune_alpha,
            "early_stop": self.early_stop,
            "max_parents": self.max_parents,
            "smoother": self.smoother.to_dict(),
        }


@dataclass
class DiscoveryResult:
    mode: str
    dag: Dag
    neighbors: NeighborSets
    ordering: OrderingResult
    pvalues: dict[Edge, float | None]
    timings: dict[str, float] = field(default_factory=dict)

    def gains(self) -> dict[Edge, float]:
        return {(s.source, s.target): s.gain for s in self.ordering.trace}


def discover(data: Dataset, prior: PriorKnowledge | None = None,
             settings: DiscoverySettings | None = None) -> DiscoveryResult:
    """Learn a DAG from standardized data under ``prior``."""
    settings = settings or DiscoverySettings()
    if data.stage != "standardized":
        raise InputError("discover expects standardized data; run dataprep.preprocess first")
    prior = prior or PriorKnowledge.trivial(data.n_cols)
    if prior.p != data.n_cols:
        raise InputError(f"prior covers {prior.p} variables, data has {data.n_cols}")
    mode = settings.resolve_mode(prior)
    timings = {}

    t0 = time.perf_counter()
    if settings.use_pns:
        neighbors = select_neighbors(data, prior, settings.pns_threshold, settings.seed,
                                     settings.k_folds, settings.max_neighbors, settings.threads)
    else:
        neighbors = full_neighbors(prior)
    t1 = time.perf_counter()
    cache = FitCache(data, settings.smoother)
    ordered = greedy_order(data, neighbors, prior, mode, settings.smoother, early_stop=settings.early_stop,
                           max_parents=settings.max_parents, threads=settings.threads, cache=cache)
    t2 = time.perf_counter()
    pv = edge_pvalues(data, ordered.dag_no, settings.smoother, max_parents=settings.max_parents,
                      threads=settings.threads, cache=cache)
    dag = prune_from_pvalues(ordered.dag_no, pv, settings.prune_alpha)
    t3 = time.perf_counter()
    timings.update(pns=t1 - t0, ordering=t2 - t1, pruning=t3 - t2, total=t3 - t0)
    return DiscoveryResult(mode, dag, neighbors, ordered, pv, timings)
