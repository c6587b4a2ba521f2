import pytest
from hypothesis import given, settings, strategies as st

from tcam.errors import InputError, NodeMismatchError
from tcam.graph_core import Dag
from tcam.metrics import ExpertGraph, ashd, precision_recall, shd

A, B, C = 0, 1, 2


def test_ashd_examples():
    sure, possible = {(A, B)}, {(B, C)}
    assert ashd(Dag(3, sure), ExpertGraph(3, sure)) == 0
    assert ashd(Dag(3, [(B, C), (C, A)]), ExpertGraph(3, sure, possible)) == 2
    assert ashd(Dag(3, sure | possible), ExpertGraph(3, sure, possible)) == 0


def test_reversed_sure_edge_costs_two():
    assert ashd(Dag(2, [(1, 0)]), ExpertGraph(2, {(0, 1)})) == 2


def test_shd_examples():
    g = Dag(3, [(0, 1), (1, 2)])
    assert shd(g, g.copy()) == 0
    assert shd(Dag(2, [(0, 1)]), Dag(2, [(1, 0)])) == 1
    assert shd(Dag(3), g) == 2


def test_mismatched_nodes():
    with pytest.raises(NodeMismatchError):
        shd(Dag(2), Dag(3))
    with pytest.raises(NodeMismatchError):
        ashd(Dag(2), ExpertGraph(3))
    with pytest.raises(NodeMismatchError):
        ExpertGraph.from_document(["a", "b"], {"sure": [["a", "z"]]})


def test_expert_graph_validation():
    with pytest.raises(InputError):
        ExpertGraph(2, {(0, 1)}, {(0, 1)})
    with pytest.raises(InputError):
        ExpertGraph(2, {(0, 0)})
    g = ExpertGraph.from_document(["a", "b", "c"], {"sure": [["a", "b"]], "possible": [["b", "c"]]})
    assert g.sure == {(0, 1)} and g.possible == {(1, 2)}


def test_precision_recall():
    truth = Dag(3, [(0, 1), (1, 2)])
    assert precision_recall(truth, truth) == (1.0, 1.0)
    assert precision_recall(Dag(3), truth) == (1.0, 0.0)
    assert precision_recall(Dag(3, [(0, 1), (0, 2)]), truth) == (0.5, 0.5)


def dags(p):
    pairs = [(k, l) for k in range(p) for l in range(p) if k < l]
    return st.tuples(
        st.lists(st.sampled_from(pairs), unique=True),
        st.permutations(list(range(p))),
    ).map(lambda t: Dag(p, [(t[1][k], t[1][l]) for k, l in t[0]]))


@settings(max_examples=100, deadline=None)
@given(dags(5), dags(5))
def test_shd_is_a_metric(a, b):
    assert shd(a, b) == shd(b, a)
    assert shd(a, a) == 0
    assert (shd(a, b) == 0) == (a == b)
    assert shd(a, b) <= a.n_edges() + b.n_edges()


@settings(max_examples=100, deadline=None)
@given(dags(5), st.data())
def test_ashd_zero_iff_between_sure_and_possible(est, data):
    pairs = [(k, l) for k in range(5) for l in range(5) if k != l]
    sure = set(data.draw(st.lists(st.sampled_from(pairs), max_size=5)))
    possible = set(data.draw(st.lists(st.sampled_from(pairs), max_size=5))) - sure
    expert = ExpertGraph(5, sure, possible)
    assert (ashd(est, expert) == 0) == (sure <= est.edges <= sure | possible)
    extra = [e for e in pairs if e not in sure | possible and not est.has_edge(*e) and not est.creates_cycle(*e)]
    if extra:
        bigger = est.copy().add_edge(*extra[0])
        assert ashd(bigger, expert) == ashd(est, expert) + 1
