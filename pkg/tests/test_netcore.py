import numpy as np
import pytest
from hypothesis import given, strategies as st

from fannet.netcore import (
    CIRCLE,
    EMPTY,
    LINE,
    ZERO,
    And,
    AsyncNetwork,
    At,
    CircDistLt,
    Cmp,
    ConflictingAssignment,
    ConnectionStructure,
    Constant,
    EvalContext,
    EventClause,
    Kuramoto,
    NetworkError,
    Not,
    Or,
    evaluate_event_map,
    linked_nodes,
    network_field,
    stop_edges,
)
from fannet.library import term_deadlock, three_trains

edges = st.frozensets(
    st.tuples(st.integers(0, 4), st.integers(1, 4)).filter(lambda e: e[0] != e[1]), max_size=8
)
structures = edges.map(ConnectionStructure)


@given(structures, structures, structures)
def test_join_is_a_semilattice(a, b, c):
    assert a | b == b | a
    assert (a | b) | c == a | (b | c)
    assert a | a == a
    assert a | EMPTY == a


def test_self_edges_rejected():
    with pytest.raises(NetworkError):
        ConnectionStructure(frozenset({(2, 2)}))


def test_linked_nodes_skip_constraining_node():
    assert linked_nodes(stop_edges([1, 3])) == {1, 3}
    assert linked_nodes(ConnectionStructure(frozenset({(1, 3)}))) == {1, 3}


def test_assigns_must_match_linked_nodes():
    with pytest.raises(NetworkError, match="linked nodes"):
        EventClause("bad", stop_edges([1]), Cmp("lt", 1, 0.0), {2: ZERO})


def test_event_map_three_trains_rows():
    net = three_trains().fan.net
    alpha, ids = evaluate_event_map(net, [0.0, -1.0, 4.0], {1: 0.0})
    assert ids == ("a1",)
    assert alpha == stop_edges([1])
    alpha, ids = evaluate_event_map(net, [0.0, -1.0, 2.0], {1: 0.0, 3: 2.0})
    assert alpha == stop_edges([1, 3])
    assert set(ids) == {"a1", "a3", "a1a3"}
    alpha, _ = evaluate_event_map(net, [1.0, 1.0, 1.0], {})
    assert alpha == EMPTY


def test_unlinked_nodes_keep_default_field():
    net = three_trains().fan.net
    v = network_field(net, np.array([0.0, -1.0, 4.0]), {1: 0.0})
    assert v.tolist() == [0.0, 1.0, -0.5]


def test_conflicting_assignment_raises():
    net = AsyncNetwork(
        (LINE,),
        (Constant(1.0),),
        (
            EventClause("a", stop_edges([1]), Cmp("ge", 1, 0.0), {1: Constant(2.0)}),
            EventClause("b", stop_edges([1]), Cmp("le", 1, 1.0), {1: Constant(3.0)}),
        ),
    )
    with pytest.raises(ConflictingAssignment):
        network_field(net, np.array([0.5]))


def test_override_clause_wins():
    net = AsyncNetwork(
        (LINE,),
        (Constant(1.0),),
        (
            EventClause("a", stop_edges([1]), Cmp("ge", 1, 0.0), {1: Constant(2.0)}),
            EventClause("stop", stop_edges([1]), At(1, 0.5), {1: ZERO}, override=True),
        ),
    )
    assert network_field(net, np.array([0.5]), {1: 0.5})[0] == 0.0
    assert network_field(net, np.array([0.4]))[0] == 2.0


def test_boundary_takes_sign_of_motion():
    atom = Cmp("lt", 1, 0.0)
    on = np.array([0.0])
    assert not atom.evaluate(EvalContext(on))
    assert atom.evaluate(EvalContext(on, velocity=np.array([-1.0])))
    assert not atom.evaluate(EvalContext(on, velocity=np.array([1.0])))


def test_at_atom_reads_latch_not_coordinate():
    a = At(1, 1.0)
    assert not a.evaluate(EvalContext(np.array([1.0])))
    assert a.evaluate(EvalContext(np.array([1.0]), {1: 1.0}))
    assert not a.evaluate(EvalContext(np.array([1.0]), {1: 1.0}, frozenset({1})))


def test_logical_connectives():
    ctx = EvalContext(np.array([0.2, 0.7]))
    p, q = Cmp("lt", 1, 0.5), Cmp("lt", 2, 0.5)
    assert Or((p, q)).evaluate(ctx) and not And((p, q)).evaluate(ctx)
    assert Not(q).evaluate(ctx)


def test_circle_distance_wraps():
    ctx = EvalContext(np.array([0.95, 0.02]))
    assert CircDistLt(1, 2, 0.1).evaluate(ctx)
    with pytest.raises(NetworkError):
        CircDistLt(1, 2, 0.5)


def test_kuramoto_antiphase_is_exactly_uniform():
    f = Kuramoto(1.0, 0.25, 2, owner=1)
    assert f.rate(np.array([0.0, 0.5])) == 1.0
    assert f.rate(np.array([0.3, 0.8])) == 1.0


def test_network_validation():
    with pytest.raises(NetworkError, match="line coordinates"):
        AsyncNetwork((CIRCLE,), (Constant(1.0),), (EventClause("c", stop_edges([1]), Cmp("lt", 1, 0.0), {1: ZERO}),))
    with pytest.raises(NetworkError, match="outside"):
        AsyncNetwork((LINE,), (Constant(1.0),), (EventClause("c", stop_edges([1]), Cmp("lt", 2, 0.0), {1: ZERO}),))
    with pytest.raises(NetworkError, match="kuramoto"):
        AsyncNetwork((LINE, CIRCLE), (Kuramoto(1, 1, 2), Constant(1.0)))


def test_generalized_structure_contains_every_join():
    net = term_deadlock().fan.net
    A = net.generalized_structure()
    assert EMPTY in A and len(A) == 4
