"""Preliminary neighborhood selection.

For every target the admissible predecessors (allowed by the prior, not in a
later tier) are screened with a cross-validated LASSO; the survivors are the
only parents the ordering search will consider. Everything else becomes
forbidden.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataprep import Dataset
from .graph_core import PriorKnowledge
from .smoothers import fit_lasso_cv

DEFAULT_THRESHOLD = 1e-2


@dataclass
class NeighborSets:
    candidates: list[list[int]]
    forbidden: np.ndarray
    coefficients: list[dict[int, float]] | None = None

    @property
    def p(self) -> int:
        return len(self.candidates)

    def counts(self) -> list[int]:
        return [len(c) for c in self.candidates]


def _values(data) -> np.ndarray:
    return data.values if isinstance(data, Dataset) else np.asarray(data, dtype=float)


def admissible(prior: PriorKnowledge, target: int) -> list[int]:
    return [int(k) for k in np.flatnonzero(~prior.forbidden[:, target])]


def full_neighbors(prior: PriorKnowledge) -> NeighborSets:
    """No screening: every pair the prior allows stays a candidate."""
    cands = [admissible(prior, l) for l in range(prior.p)]
    return NeighborSets(cands, prior.forbidden.copy())


def from_candidates(prior: PriorKnowledge, candidates) -> NeighborSets:
    p = prior.p
    F = np.ones((p, p), dtype=bool)
    cands = []
    for l in range(p):
        keep = sorted(k for k in candidates[l] if not prior.forbidden[k, l])
        F[keep, l] = False
        cands.append(keep)
    return NeighborSets(cands, F)


def _screen(X, prior, l, coef_threshold, seed, k_folds, max_neighbors):
    I = admissible(prior, l)
    if not I:
        return [], {}
    fit = fit_lasso_cv(X[:, l], X[:, I], k_folds=k_folds, seed=seed)
    coefs = {k: float(c) for k, c in zip(I, fit.coefficients)}
    chosen = [k for k in I if abs(coefs[k]) > coef_threshold]
    if max_neighbors is not None and len(chosen) > max_neighbors:
        chosen = sorted(chosen, key=lambda k: (-abs(coefs[k]), k))[:max_neighbors]
    return sorted(chosen), coefs


def select_neighbors(
    data,
    prior: PriorKnowledge,
    coef_threshold: float = DEFAULT_THRESHOLD,
    seed: int = 0,
    k_folds: int = 10,
    max_neighbors: int | None = None,
    threads: int = 1,
) -> NeighborSets:
    """Candidate parent sets from a LASSO screen at the one-standard-error penalty.

    ``data`` should be standardized. Targets are screened independently (in
    parallel when ``threads > 1``) with the same fold assignment.
    """
    X = _values(data)
    p = X.shape[1]
    k_folds = min(k_folds, X.shape[0])

    def work(l):
        return _screen(X, prior, l, coef_threshold, seed, k_folds, max_neighbors)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, range(p)))
    else:
        results = [work(l) for l in range(p)]

    F = np.ones((p, p), dtype=bool)
    for l, (chosen, _) in enumerate(results):
        F[chosen, l] = False
    return NeighborSets([r[0] for r in results], F | prior.forbidden, [r[1] for r in results])
