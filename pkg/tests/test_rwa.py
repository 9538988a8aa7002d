import pytest
from hypothesis import given, strategies as st

from wdmsim.rwa import (
    AlreadyOccupied, ControlWavelengthMisuse, LinkState, NoControlWavelength, NoPath,
    assign_data_wavelength, feasible, release, reserve, shortest_path,
)
from wdmsim.topology import DirectedLink, build_graph


def state(W=4, control=(0,), busy=()):
    ls = LinkState(DirectedLink(0, 0, 1), W, set(control))
    for w in busy:
        ls.occupancy[w] = 100 + w
    return ls


def test_ring_path(ring):
    a, c = ring.node("A").id, ring.node("C").id
    path = shortest_path(ring, a, c)
    assert path.link_ids == (0, 4)
    assert [ring.label(n) for n in path.nodes()] == ["A", "B", "C"]


def test_single_hop_and_no_path():
    g = build_graph(list("ABC"), [("A", "B")])
    assert len(shortest_path(g, 0, 1)) == 1
    with pytest.raises(NoPath):
        shortest_path(g, 0, 2)


def test_first_fit():
    assert assign_data_wavelength(state()) == 1
    assert assign_data_wavelength(state(busy=(1, 2, 3))) is None
    assert assign_data_wavelength(state(busy=(1,))) == 2


def test_reserve_and_errors():
    ls = reserve(state(), 1, 7)
    assert ls.occupant(1) == 7
    with pytest.raises(AlreadyOccupied):
        reserve(ls, 1, 8)
    with pytest.raises(ControlWavelengthMisuse):
        reserve(ls, 0, 7)


def test_release_restores():
    ls = state(busy=(3,))
    before = ls.snapshot()
    reserve(ls, 1, 7)
    assert release(ls, 7).snapshot() == before
    assert release(ls, 7).snapshot() == before
    assert release(ls, 999).snapshot() == before


def test_control_wavelength_choice():
    assert state(control=(0, 1)).control_wavelength() == 0
    with pytest.raises(NoControlWavelength):
        state(control=()).control_wavelength()


def test_feasible_examples():
    g = build_graph(list("ABC"), [("A", "B"), ("B", "C")])
    path = shortest_path(g, 0, 2)
    links = {l.id: LinkState(l, 2, {0}) for l in g.links}
    assert feasible(path, links) == [1, 1]
    links[path.link_ids[1]].occupancy[1] = 5
    assert feasible(path, links) is None


ops = st.lists(st.tuples(st.booleans(), st.integers(1, 5), st.integers(0, 5)), max_size=40)


@given(ops)
def test_exclusivity_under_reserve_release(seq):
    ls = state(W=6)
    owners: dict[int, int] = {}
    for is_reserve, w, cid in seq:
        if is_reserve:
            try:
                reserve(ls, w, cid)
                owners[w] = cid
            except AlreadyOccupied:
                assert w in owners
        else:
            release(ls, cid)
            owners = {k: v for k, v in owners.items() if v != cid}
        assert ls.occupancy == owners
        assert not set(ls.occupancy) & ls.control_set
