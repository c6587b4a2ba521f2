"""Directed acyclic graphs, prior knowledge and node orderings.

Nodes are the integers ``0 .. p-1`` (column indices of the data matrix).
Reachability is kept incrementally as one bitset per node (a Python int), so
the cycle test for a candidate edge is a single bit lookup.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CycleError, DuplicateEdgeError, GraphError, InputError, UnknownColumnError

Edge = tuple[int, int]


class Dag:
    """Mutable DAG with a cached descendant/ancestor closure.

    ``descendants(k)`` and ``ancestors(k)`` are exact after every call to
    :meth:`add_edge` or :meth:`remove_edge`.
    """

    def __init__(self, node_count: int, edges: Iterable[Edge] = ()):
        if node_count < 1:
            raise GraphError("node_count must be positive")
        self.node_count = int(node_count)
        self._parents: list[set[int]] = [set() for _ in range(node_count)]
        self._children: list[set[int]] = [set() for _ in range(node_count)]
        self._desc = [0] * node_count
        self._anc = [0] * node_count
        for k, l in edges:
            self.add_edge(k, l)

    # -- queries -----------------------------------------------------------
    @property
    def edges(self) -> set[Edge]:
        return {(k, l) for l in range(self.node_count) for k in self._parents[l]}

    def sorted_edges(self) -> list[Edge]:
        return sorted(self.edges)

    def n_edges(self) -> int:
        return sum(len(s) for s in self._parents)

    def has_edge(self, k: int, l: int) -> bool:
        return k in self._parents[l]

    def parents(self, l: int) -> list[int]:
        return sorted(self._parents[l])

    def children(self, k: int) -> list[int]:
        return sorted(self._children[k])

    def reaches(self, a: int, b: int) -> bool:
        """True if there is a directed path of length >= 1 from ``a`` to ``b``."""
        return bool(self._desc[a] >> b & 1)

    def descendants(self, k: int) -> set[int]:
        return _bits_to_set(self._desc[k])

    def ancestors(self, k: int) -> set[int]:
        return _bits_to_set(self._anc[k])

    def creates_cycle(self, k: int, l: int) -> bool:
        return k == l or self.reaches(l, k)

    # -- mutation ----------------------------------------------------------
    def add_edge(self, k: int, l: int) -> "Dag":
        self._check_node(k)
        self._check_node(l)
        if k == l:
            raise CycleError(f"self-loop on node {k}")
        if l in self._children[k]:
            raise DuplicateEdgeError(f"edge ({k}, {l}) already present")
        if self.reaches(l, k):
            raise CycleError(f"edge ({k}, {l}) closes a directed cycle")
        self._parents[l].add(k)
        self._children[k].add(l)
        up = self._anc[k] | (1 << k)
        down = self._desc[l] | (1 << l)
        for a in _iter_bits(up):
            self._desc[a] |= down
        for d in _iter_bits(down):
            self._anc[d] |= up
        return self

    def remove_edge(self, k: int, l: int) -> "Dag":
        if l not in self._children[k]:
            raise GraphError(f"edge ({k}, {l}) not present")
        self._parents[l].discard(k)
        self._children[k].discard(l)
        self._rebuild_closure()
        return self

    def copy(self) -> "Dag":
        out = Dag(self.node_count)
        out._parents = [set(s) for s in self._parents]
        out._children = [set(s) for s in self._children]
        out._desc = list(self._desc)
        out._anc = list(self._anc)
        return out

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.node_count, self.node_count), dtype=bool)
        for k, l in self.edges:
            A[k, l] = True
        return A

    def _rebuild_closure(self) -> None:
        p = self.node_count
        self._desc = [0] * p
        self._anc = [0] * p
        for node in reversed(topological_order(self).order):
            bits = 0
            for c in self._children[node]:
                bits |= (1 << c) | self._desc[c]
            self._desc[node] = bits
        for a in range(p):
            for d in _iter_bits(self._desc[a]):
                self._anc[d] |= 1 << a

    def _check_node(self, k: int) -> None:
        if not 0 <= k < self.node_count:
            raise GraphError(f"node {k} out of range for {self.node_count} nodes")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dag):
            return NotImplemented
        return self.node_count == other.node_count and self.edges == other.edges

    def __repr__(self) -> str:
        return f"Dag(node_count={self.node_count}, edges={self.sorted_edges()})"


def _iter_bits(bits: int):
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


def _bits_to_set(bits: int) -> set[int]:
    return set(_iter_bits(bits))


def add_edge_checked(dag: Dag, k: int, l: int) -> Dag:
    return dag.add_edge(k, l)


@dataclass(frozen=True)
class Ordering:
    """A permutation of the nodes; ``order[i]`` is the node at position ``i``."""

    order: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise GraphError(f"not a permutation: {self.order}")

    def position(self, k: int) -> int:
        return self.order.index(k)

    def positions(self) -> np.ndarray:
        pos = np.empty(len(self.order), dtype=int)
        pos[list(self.order)] = np.arange(len(self.order))
        return pos

    def predecessors(self, k: int) -> list[int]:
        return sorted(self.order[: self.position(k)])


def topological_order(dag: Dag) -> Ordering:
    """Kahn's algorithm; among ready nodes the smallest index goes first."""
    indegree = [len(dag._parents[l]) for l in range(dag.node_count)]
    ready = [l for l, d in enumerate(indegree) if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        k = heapq.heappop(ready)
        order.append(k)
        for c in dag._children[k]:
            indegree[c] -= 1
            if indegree[c] == 0:
                heapq.heappush(ready, c)
    if len(order) != dag.node_count:
        raise CycleError("graph contains a cycle")
    return Ordering(tuple(order))


@dataclass
class PriorKnowledge:
    """Tier map, forbidden-edge matrix and root nodes, always kept normalized.

    ``forbidden[k, l]`` is True when the edge ``k -> l`` is ruled out. After
    normalization the matrix already encodes the diagonal, the tier rule
    (no edge from a later tier into an earlier one) and the root rule (no
    edge into a root), so downstream code only consults ``forbidden``.
    """

    tiers: np.ndarray
    forbidden: np.ndarray
    roots: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        self.tiers = np.asarray(self.tiers, dtype=int).copy()
        p = self.tiers.shape[0]
        F = np.asarray(self.forbidden, dtype=bool).copy()
        if F.shape != (p, p):
            raise InputError(f"forbidden matrix must be {p}x{p}, got {F.shape}")
        self.roots = frozenset(int(r) for r in self.roots)
        for r in self.roots:
            if not 0 <= r < p:
                raise InputError(f"root {r} out of range")
        np.fill_diagonal(F, True)
        F |= self.tiers[:, None] > self.tiers[None, :]
        if self.roots:
            F[:, sorted(self.roots)] = True
        self.forbidden = F

    @classmethod
    def trivial(cls, p: int) -> "PriorKnowledge":
        return cls(np.ones(p, dtype=int), np.zeros((p, p), dtype=bool))

    @classmethod
    def build(
        cls,
        p: int,
        tiers: Sequence[int] | None = None,
        forbidden: Iterable[Edge] = (),
        roots: Iterable[int] = (),
    ) -> "PriorKnowledge":
        t = np.ones(p, dtype=int) if tiers is None else np.asarray(tiers, dtype=int)
        if t.shape != (p,):
            raise InputError(f"tiers must have length {p}")
        F = np.zeros((p, p), dtype=bool)
        for k, l in forbidden:
            F[k, l] = True
        return cls(t, F, frozenset(roots))

    @classmethod
    def from_names(cls, columns: Sequence[str], doc: Mapping, ignore: Iterable[str] = ()) -> "PriorKnowledge":
        """Build from the JSON prior document (keys ``tiers``, ``forbidden``, ``roots``).

        Names listed in ``ignore`` (e.g. columns dropped during preprocessing)
        are skipped silently; any other unknown name is an error.
        """
        index = {name: i for i, name in enumerate(columns)}
        ignore = set(ignore)
        unknown_keys = set(doc) - {"tiers", "forbidden", "roots"}
        if unknown_keys:
            raise InputError(f"unknown prior keys: {sorted(unknown_keys)}")

        def lookup(name):
            if name in index:
                return index[name]
            if name in ignore:
                return None
            raise UnknownColumnError(f"prior refers to unknown column {name!r}")

        p = len(columns)
        tier_doc = doc.get("tiers") or {}
        tiers = np.ones(p, dtype=int)
        if tier_doc:
            seen = set()
            for name, tier in tier_doc.items():
                if not isinstance(tier, int) or isinstance(tier, bool):
                    raise InputError(f"tier of {name!r} must be an integer")
                i = lookup(name)
                if i is not None:
                    tiers[i] = tier
                    seen.add(i)
            missing = [columns[i] for i in range(p) if i not in seen]
            if missing:
                raise InputError(f"tiers missing for columns: {missing}")
        forbidden = []
        for pair in doc.get("forbidden") or []:
            if len(pair) != 2:
                raise InputError(f"forbidden entry must be [source, target]: {pair!r}")
            k, l = lookup(pair[0]), lookup(pair[1])
            if k is not None and l is not None:
                forbidden.append((k, l))
        roots = [r for r in (lookup(n) for n in doc.get("roots") or []) if r is not None]
        return cls.build(p, tiers, forbidden, roots)

    @property
    def p(self) -> int:
        return int(self.tiers.shape[0])

    @property
    def n_tiers(self) -> int:
        return len(np.unique(self.tiers))

    def is_trivial(self) -> bool:
        off_diag = self.forbidden & ~np.eye(self.p, dtype=bool)
        return self.n_tiers == 1 and not off_diag.any()

    def allows(self, k: int, l: int) -> bool:
        return not self.forbidden[k, l]

    def with_forbidden(self, forbidden: np.ndarray) -> "PriorKnowledge":
        return PriorKnowledge(self.tiers, forbidden | self.forbidden, self.roots)

    def violations(self, dag: Dag) -> list[Edge]:
        """Edges of ``dag`` that the prior rules out."""
        return [(k, l) for k, l in dag.sorted_edges() if self.forbidden[k, l]]


def addable_edges(dag: Dag, prior: PriorKnowledge) -> set[Edge]:
    """Pairs whose addition keeps ``dag`` acyclic and that the prior allows."""
    p = dag.node_count
    out = set()
    for k in range(p):
        for l in range(p):
            if prior.forbidden[k, l] or dag.has_edge(k, l) or dag.creates_cycle(k, l):
                continue
            out.add((k, l))
    return out
