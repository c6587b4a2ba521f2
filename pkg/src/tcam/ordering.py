"""Greedy node-ordering search (CAM) and its tier-initialized variant (TCAM).

Edges are added one at a time, always the one with the largest reduction in
the target's mean squared residual. In TCAM mode every screened edge that
crosses tiers is placed up front, so only within-tier pairs are searched.
"""
from __future__ import annotations

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataprep import Dataset
from .errors import InputError
from .graph_core import Dag, Edge, Ordering, PriorKnowledge, topological_order
from .pns import NeighborSets, full_neighbors
from .smoothers import DEFAULT_CONFIG, AdditiveFit, SmootherConfig, SplineBasis, fit_additive

MODES = ("cam", "tcam")
EARLY_STOP = 1e-6
MAX_PARENTS = 20


class FitCache:
    """Shared per-dataset state for additive fits.

    Holds one spline basis per column and one GCV penalty weight per
    (predictor, target) pair, so a term is smoothed identically in every
    model it appears in. Safe to use from several threads.
    """

    def __init__(self, data, config: SmootherConfig = DEFAULT_CONFIG):
        self.X = data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)
        self.config = config
        self._bases: dict[int, SplineBasis] = {}
        self._penalty: dict[tuple[int, int], float] = {}
        self._lock = threading.Lock()
        self.n_fits = 0

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def basis(self, k: int) -> SplineBasis:
        b = self._bases.get(k)
        if b is None:
            b = SplineBasis(self.X[:, k], self.config.n_basis, self.config.degree)
            with self._lock:
                b = self._bases.setdefault(k, b)
        return b

    def penalty(self, k: int, l: int) -> float:
        lam = self._penalty.get((k, l))
        if lam is None:
            lam = self.basis(k).select_penalty(self.X[:, l], self.config.gcv_grid, self.config.gcv_gamma)
            with self._lock:
                lam = self._penalty.setdefault((k, l), lam)
        return lam

    def fit(self, l: int, parents: Sequence[int]) -> AdditiveFit:
        parents = sorted(parents)
        with self._lock:
            self.n_fits += 1
        return fit_additive(
            self.X[:, l],
            [self.X[:, k] for k in parents],
            self.config,
            bases=[self.basis(k) for k in parents],
            penalty_weights=[self.penalty(k, l) for k in parents],
            predictor_indices=parents,
        )

    def rss(self, l: int, parents: Sequence[int]) -> float:
        return self.fit(l, parents).rss_mean


@dataclass
class TraceStep:
    source: int
    target: int
    gain: float
    score: float


@dataclass
class ScoreMatrix:
    """Gain matrix with ``-inf`` for every pair that cannot be added."""

    M: np.ndarray
    rss: np.ndarray  # current mean squared residual per target
    rss_with: np.ndarray = field(repr=False)  # rss of target l after adding k, per finite entry

    def best(self) -> tuple[int, int, float]:
        idx = int(np.argmax(self.M))  # first maximum = lexicographically smallest pair
        k, l = divmod(idx, self.M.shape[1])
        return k, l, float(self.M[k, l])

    def exhausted(self) -> bool:
        return not np.isfinite(self.M).any()


@dataclass
class OrderingResult:
    dag_no: Dag
    ordering: Ordering
    initial_score: float
    final_score: float
    trace: list[TraceStep]
    iterations: int
    n_fits: int
    stopped_early: bool = False
    initial_edges: list[Edge] = field(default_factory=list)


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def order_score(data, ordering: Ordering, neighbors: NeighborSets | None = None,
                config: SmootherConfig = DEFAULT_CONFIG, cache: FitCache | None = None) -> float:
    """Sum over targets of the residual score given all earlier candidate parents."""
    cache = cache or FitCache(data, config)
    pos = ordering.positions()
    total = 0.0
    for l in range(cache.p):
        allowed = range(cache.p) if neighbors is None else neighbors.candidates[l]
        total += cache.rss(l, [k for k in allowed if pos[k] < pos[l]])
    return total


def graph_score(data, dag: Dag, config: SmootherConfig = DEFAULT_CONFIG, cache: FitCache | None = None) -> float:
    cache = cache or FitCache(data, config)
    return sum(cache.rss(l, dag.parents(l)) for l in range(dag.node_count))


def score_gain(data, dag: Dag, k: int, l: int, config: SmootherConfig = DEFAULT_CONFIG,
               cache: FitCache | None = None) -> float:
    """Drop in the target's residual score when ``k`` joins the parents of ``l``."""
    cache = cache or FitCache(data, config)
    parents = dag.parents(l)
    if k in parents:
        raise InputError(f"edge ({k}, {l}) already present")
    return cache.rss(l, parents) - cache.rss(l, parents + [k])


def _eligible(dag: Dag, forbidden: np.ndarray, k: int, l: int, max_parents: int | None) -> bool:
    if forbidden[k, l] or dag.has_edge(k, l) or dag.creates_cycle(k, l):
        return False
    return max_parents is None or len(dag._parents[l]) < max_parents


def _fill(score: ScoreMatrix, cache: FitCache, dag: Dag, pairs: list[Edge], threads: int) -> None:
    def gain(pair):
        k, l = pair
        return cache.rss(l, dag.parents(l) + [k])

    for (k, l), rss in zip(pairs, _map(gain, pairs, threads)):
        score.rss_with[k, l] = rss
        score.M[k, l] = score.rss[l] - rss


def init_tcam(data, neighbors: NeighborSets, prior: PriorKnowledge, *, cache: FitCache | None = None,
              mode: str = "tcam", max_parents: int | None = MAX_PARENTS, threads: int = 1) -> tuple[Dag, ScoreMatrix]:
    """Starting graph and gain matrix.

    In ``tcam`` mode the start graph holds every screened edge that goes from
    an earlier tier to a later one; in ``cam`` mode it is empty. Gains are
    computed for the remaining admissible pairs; all others are ``-inf``.
    """
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}")
    cache = cache or FitCache(data)
    p = cache.p
    F = neighbors.forbidden | prior.forbidden
    dag = Dag(p)
    if mode == "tcam":
        for l in range(p):
            for k in neighbors.candidates[l]:
                if prior.tiers[k] < prior.tiers[l] and not F[k, l]:
                    dag.add_edge(k, l)
    rss = np.array(_map(lambda l: cache.rss(l, dag.parents(l)), list(range(p)), threads))
    score = ScoreMatrix(np.full((p, p), -np.inf), rss, np.full((p, p), np.nan))
    pairs = [(k, l) for k in range(p) for l in range(p) if _eligible(dag, F, k, l, max_parents)]
    _fill(score, cache, dag, pairs, threads)
    return dag, score


def greedy_order(
    data,
    neighbors: NeighborSets | None,
    prior: PriorKnowledge,
    mode: str = "tcam",
    config: SmootherConfig = DEFAULT_CONFIG,
    *,
    early_stop: float | None = EARLY_STOP,
    max_parents: int | None = MAX_PARENTS,
    threads: int = 1,
    cache: FitCache | None = None,
) -> OrderingResult:
    """Greedy edge addition until no admissible pair is left.

    After an edge into ``l0`` is accepted only column ``l0`` of the gain
    matrix is refitted; pairs that would now close a cycle are set to
    ``-inf``. With ``early_stop`` set, the search also ends once the best
    gain falls below it.
    """
    cache = cache or FitCache(data, config)
    if neighbors is None:
        neighbors = full_neighbors(prior)
    F = neighbors.forbidden | prior.forbidden
    dag, score = init_tcam(data, neighbors, prior, cache=cache, mode=mode, max_parents=max_parents, threads=threads)
    initial_edges = dag.sorted_edges()
    initial_score = float(score.rss.sum())
    trace: list[TraceStep] = []
    stopped_early = False

    while not score.exhausted():
        k0, l0, gain = score.best()
        if early_stop is not None and gain < early_stop:
            stopped_early = True
            break
        dag.add_edge(k0, l0)
        score.rss[l0] = score.rss_with[k0, l0]
        score.M[k0, l0] = -np.inf
        trace.append(TraceStep(k0, l0, gain, float(score.rss.sum())))

        finite = np.argwhere(np.isfinite(score.M))
        for k, l in finite:
            if dag.reaches(l, k):
                score.M[k, l] = -np.inf
        if max_parents is not None and len(dag._parents[l0]) >= max_parents:
            score.M[:, l0] = -np.inf
        column = [(int(k), l0) for k in np.flatnonzero(np.isfinite(score.M[:, l0]))]
        _fill(score, cache, dag, column, threads)

    return OrderingResult(
        dag_no=dag,
        ordering=topological_order(dag),
        initial_score=initial_score,
        final_score=float(score.rss.sum()),
        trace=trace,
        iterations=len(trace),
        n_fits=cache.n_fits,
        stopped_early=stopped_early,
        initial_edges=initial_edges,
    )
