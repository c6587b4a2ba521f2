"""Synthetic additive structural equation models with known graphs.

Every edge carries one smooth nonlinear function from a small dictionary;
sampling is ancestral, and each edge contribution is centered on the
realized sample so the generated columns have mean zero.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataprep import Dataset
from .errors import InputError
from .graph_core import Dag, Edge, topological_order

FUNCTION_KINDS = ("sin", "tanh", "xgauss")
AMPLITUDE_RANGE = (0.8, 1.5)
FREQUENCY_RANGE = (0.8, 2.0)
NOISE_RANGE = (0.2, 0.5)


@dataclass(frozen=True)
class EdgeFunction:
    """``a*sin(b*x)``, ``a*tanh(b*x)`` or ``a*x*exp(-x**2/2)`` (``b`` unused)."""

    kind: str
    a: float
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in FUNCTION_KINDS:
            raise InputError(f"unknown edge function {self.kind!r}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "sin":
            return self.a * np.sin(self.b * x)
        if self.kind == "tanh":
            return self.a * np.tanh(self.b * x)
        return self.a * x * np.exp(-0.5 * x * x)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a": self.a, "b": self.b}


@dataclass
class SemSpec:
    dag: Dag
    functions: dict[Edge, EdgeFunction]
    noise_sd: np.ndarray
    intercepts: np.ndarray
    tiers: np.ndarray | None = None
    columns: list[str] = field(default_factory=list)

    def __post_init__(self):
        p = self.dag.node_count
        if not self.columns:
            self.columns = [f"X{i + 1}" for i in range(p)]
        self.noise_sd = np.asarray(self.noise_sd, dtype=float)
        self.intercepts = np.asarray(self.intercepts, dtype=float)
        if set(self.functions) != self.dag.edges:
            raise InputError("functions must be given for exactly the edges of the dag")
        if np.any(self.noise_sd <= 0):
            raise InputError("noise_sd must be positive")
        if self.tiers is not None:
            self.tiers = np.asarray(self.tiers, dtype=int)
            bad = [(k, l) for k, l in self.dag.edges if self.tiers[k] > self.tiers[l]]
            if bad:
                raise InputError(f"edges run against the tier order: {sorted(bad)}")

    @property
    def p(self) -> int:
        return self.dag.node_count

    def truth_document(self) -> dict:
        doc = {
            "version": 1,
            "columns": list(self.columns),
            "edges": [[self.columns[k], self.columns[l]] for k, l in self.dag.sorted_edges()],
            "functions": [
                {"source": self.columns[k], "target": self.columns[l], **self.functions[(k, l)].to_dict()}
                for k, l in self.dag.sorted_edges()
            ],
            "noise_sd": {c: float(s) for c, s in zip(self.columns, self.noise_sd)},
        }
        if self.tiers is not None and len(np.unique(self.tiers)) > 1:
            doc["tiers"] = {c: int(t) for c, t in zip(self.columns, self.tiers)}
        return doc


def split_tiers(p: int, tier_count: int) -> np.ndarray:
    """Contiguous, as-even-as-possible tier labels ``1..tier_count``."""
    if not 1 <= tier_count <= p:
        raise InputError(f"tier_count must lie in [1, {p}]")
    tiers = np.empty(p, dtype=int)
    for t, block in enumerate(np.array_split(np.arange(p), tier_count), start=1):
        tiers[block] = t
    return tiers


def _draw_function(rng: np.random.Generator) -> EdgeFunction:
    kind = FUNCTION_KINDS[int(rng.integers(len(FUNCTION_KINDS)))]
    a = float(rng.uniform(*AMPLITUDE_RANGE))
    b = float(rng.uniform(*FREQUENCY_RANGE))
    return EdgeFunction(kind, a, b if kind != "xgauss" else 1.0)


def _noise(rng, p, noise_sd, source_sd, dag) -> np.ndarray:
    sd = np.empty(p)
    for l in range(p):
        spec = source_sd if (source_sd is not None and not dag.parents(l)) else noise_sd
        sd[l] = rng.uniform(*spec) if isinstance(spec, tuple) else float(spec)
    return sd


def sem_from_edges(
    p: int,
    edges: Iterable[Edge],
    seed: int = 0,
    tiers: Sequence[int] | None = None,
    noise_sd: float | tuple[float, float] = NOISE_RANGE,
    source_sd: float | tuple[float, float] | None = None,
) -> SemSpec:
    """SEM on a fixed edge set with randomly drawn edge functions and noise scales.

    ``source_sd``, when given, overrides the noise scale of parentless nodes.
    """
    rng = np.random.default_rng(seed)
    dag = Dag(p, sorted(edges))
    functions = {e: _draw_function(rng) for e in dag.sorted_edges()}
    sd = _noise(rng, p, noise_sd, source_sd, dag)
    return SemSpec(dag, functions, sd, np.zeros(p), None if tiers is None else np.asarray(tiers))


def random_sem(
    p: int,
    edge_prob: float,
    tier_count: int = 1,
    seed: int = 0,
    noise_sd: float | tuple[float, float] = NOISE_RANGE,
    source_sd: float | tuple[float, float] | None = None,
) -> SemSpec:
    """Random tier-respecting SEM.

    Nodes are split evenly into contiguous tiers. A random causal order is
    drawn inside each tier; every pair consistent with tiers and that order
    becomes an edge with probability ``edge_prob``.
    """
    if p < 1:
        raise InputError("p must be at least 1")
    if not 0.0 <= edge_prob <= 1.0:
        raise InputError("edge_prob must lie in [0, 1]")
    tiers = split_tiers(p, tier_count)
    rng = np.random.default_rng(seed)
    rank = np.empty(p, dtype=int)
    for t in range(1, tier_count + 1):
        members = np.flatnonzero(tiers == t)
        rank[members] = members[0] + rng.permutation(members.size)
    dag = Dag(p)
    for k in range(p):
        for l in range(p):
            if rank[k] < rank[l] and rng.random() < edge_prob:
                dag.add_edge(k, l)
    functions = {e: _draw_function(rng) for e in dag.sorted_edges()}
    sd = _noise(rng, p, noise_sd, source_sd, dag)
    return SemSpec(dag, functions, sd, np.zeros(p), tiers if tier_count > 1 else None)


def chain_sem(p: int, tier_count: int = 1, seed: int = 0, noise_sd=NOISE_RANGE, source_sd=None) -> SemSpec:
    """``X1 -> X2 -> ... -> Xp``."""
    tiers = split_tiers(p, tier_count)
    return sem_from_edges(p, [(i, i + 1) for i in range(p - 1)], seed, tiers if tier_count > 1 else None,
                          noise_sd, source_sd)


def fork_sem(p: int, tier_count: int = 1, seed: int = 0, noise_sd=NOISE_RANGE, source_sd=None) -> SemSpec:
    """``X1`` is a common cause of every other node."""
    tiers = split_tiers(p, tier_count)
    return sem_from_edges(p, [(0, i) for i in range(1, p)], seed, tiers if tier_count > 1 else None,
                          noise_sd, source_sd)


def sample(spec: SemSpec, n: int, seed: int = 0) -> Dataset:
    """Draw ``n`` rows by ancestral sampling (not standardized)."""
    if n < 1:
        raise InputError("n must be at least 1")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((n, spec.p))
    X = np.zeros((n, spec.p))
    for l in topological_order(spec.dag).order:
        col = spec.intercepts[l] + spec.noise_sd[l] * eps[:, l]
        for k in spec.dag.parents(l):
            contrib = spec.functions[(k, l)](X[:, k])
            col = col + (contrib - contrib.mean())
        X[:, l] = col
    return Dataset(X, list(spec.columns))
