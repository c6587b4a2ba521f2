"""Graph comparison metrics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import InputError, NodeMismatchError
from .graph_core import Dag, Edge


@dataclass
class ExpertGraph:
    """Partially known reference graph: ``sure`` edges exist, ``possible`` may exist.

    Any edge in neither set is known to be absent.
    """

    node_count: int
    sure: set[Edge] = field(default_factory=set)
    possible: set[Edge] = field(default_factory=set)

    def __post_init__(self):
        self.sure = {(int(k), int(l)) for k, l in self.sure}
        self.possible = {(int(k), int(l)) for k, l in self.possible}
        if self.sure & self.possible:
            raise InputError(f"edges both sure and possible: {sorted(self.sure & self.possible)}")
        for k, l in self.sure | self.possible:
            if k == l or not (0 <= k < self.node_count and 0 <= l < self.node_count):
                raise InputError(f"malformed expert edge ({k}, {l})")

    @classmethod
    def from_document(cls, columns: Sequence[str], doc: Mapping) -> "ExpertGraph":
        index = {c: i for i, c in enumerate(columns)}

        def edges(key):
            out = set()
            for pair in doc.get(key) or []:
                try:
                    out.add((index[pair[0]], index[pair[1]]))
                except KeyError as exc:
                    raise NodeMismatchError(f"expert graph names unknown node {exc.args[0]!r}") from None
            return out

        return cls(len(columns), edges("sure"), edges("possible"))


def _edge_set(g) -> tuple[int | None, set[Edge]]:
    if isinstance(g, Dag):
        return g.node_count, g.edges
    return None, set(g)


def ashd(estimated: Dag, expert: ExpertGraph) -> int:
    """Missing sure edges plus estimated edges that are neither sure nor possible.

    A sure edge estimated in the reverse direction costs 2: it is missing,
    and the reversed edge is not depicted.
    """
    if estimated.node_count != expert.node_count:
        raise NodeMismatchError(f"{estimated.node_count} vs {expert.node_count} nodes")
    est = estimated.edges
    return len(expert.sure - est) + len(est - expert.sure - expert.possible)


def shd(a: Dag, b: Dag) -> int:
    """Insertions + deletions + reversals turning ``a`` into ``b`` (a reversal counts once)."""
    if a.node_count != b.node_count:
        raise NodeMismatchError(f"{a.node_count} vs {b.node_count} nodes")
    ea, eb = a.edges, b.edges
    pairs = {frozenset(e) for e in ea | eb}
    dist = 0
    for pair in pairs:
        i, j = sorted(pair)
        if ((i, j) in ea, (j, i) in ea) != ((i, j) in eb, (j, i) in eb):
            dist += 1
    return dist


def precision_recall(estimated: Dag, truth: Dag) -> tuple[float, float]:
    """Directed-edge precision and recall; an empty denominator counts as 1."""
    if estimated.node_count != truth.node_count:
        raise NodeMismatchError(f"{estimated.node_count} vs {truth.node_count} nodes")
    est, true = estimated.edges, truth.edges
    hit = len(est & true)
    precision = hit / len(est) if est else 1.0
    recall = hit / len(true) if true else 1.0
    return precision, recall


def edge_list(columns: Sequence[str], edges: Iterable[Edge]) -> list[list[str]]:
    return [[columns[k], columns[l]] for k, l in sorted(edges)]
