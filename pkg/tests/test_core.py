import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpia.core import (
    ContractError,
    Dominance,
    Individual,
    PartyScheme,
    Population,
    constrained_dominates,
    dominates,
    dominates_in_party,
    party_view,
)

vec3 = st.lists(st.integers(-3, 3), min_size=3, max_size=3)


def test_dominates_examples():
    assert dominates([1, 2], [2, 3]) is Dominance.FIRST_DOMINATES
    assert dominates([1, 2], [1, 2]) is Dominance.INCOMPARABLE
    assert dominates([1, 3], [2, 1]) is Dominance.INCOMPARABLE
    assert dominates([2, 3], [1, 2]) is Dominance.SECOND_DOMINATES


def test_dominates_rejects_bad_input():
    with pytest.raises(ContractError):
        dominates([1, 2], [1, 2, 3])
    with pytest.raises(ContractError):
        dominates([np.nan, 1], [0, 0])


def test_dominates_in_party_examples():
    scheme = PartyScheme([(0, 1), (2,)])
    a = Individual(np.zeros(1), np.array([1.0, 2.0, 9.0]))
    b = Individual(np.zeros(1), np.array([2.0, 3.0, 0.0]))
    assert dominates_in_party(a, b, 0, scheme) is Dominance.FIRST_DOMINATES
    assert dominates_in_party(a, b, 1, scheme) is Dominance.SECOND_DOMINATES
    c = Individual(np.zeros(1), np.array([1.0, 2.0, 0.0]))
    assert dominates_in_party(a, c, 0, scheme) is Dominance.INCOMPARABLE


def test_dominates_in_party_needs_evaluated():
    scheme = PartyScheme([(0,)])
    with pytest.raises(ContractError):
        dominates_in_party(Individual(np.zeros(1)), Individual(np.zeros(1), np.zeros(1)), 0, scheme)


def test_party_view_order_and_overlap():
    assert party_view([5, 6, 7], 1, PartyScheme([(0, 1), (2, 0)])).tolist() == [7, 5]
    assert party_view([5, 6, 7], 0, PartyScheme([(0, 1, 2)])).tolist() == [5, 6, 7]
    ov = PartyScheme([(0, 1), (1, 2)])
    assert 6 in party_view([5, 6, 7], 0, ov) and 6 in party_view([5, 6, 7], 1, ov)
    assert party_view(np.arange(6).reshape(2, 3), 1, ov).tolist() == [[1, 2], [4, 5]]


@pytest.mark.parametrize(
    "parties, m",
    [([], 2), ([(0,), ()], 1), ([(0, 0)], 1), ([(0, 3)], 2), ([(0,)], 2)],
)
def test_scheme_validation(parties, m):
    with pytest.raises(ContractError):
        PartyScheme(parties, m)


def test_scheme_helpers():
    s = PartyScheme([(0, 1), (2, 3)])
    assert s.total_objectives == 4 and s.n_parties == 2 and s.is_multiparty()
    assert not PartyScheme.single(3).is_multiparty()
    assert not PartyScheme([(0,), (1,)]).is_multiparty()
    with pytest.raises(ContractError):
        s.index(2)
    assert s.to_dict() == {"parties": [[0, 1], [2, 3]], "total_objectives": 4}


def test_population_roundtrip_and_validation():
    pop = Population(np.zeros((3, 2)), np.arange(6.0).reshape(3, 2))
    assert len(pop) == 3 and pop.cv.tolist() == [0, 0, 0]
    back = Population.from_individuals(pop.members)
    assert np.array_equal(back.F, pop.F)
    both = Population.concat(pop, pop.take([0]))
    assert len(both) == 4
    with pytest.raises(ContractError):
        Population(np.zeros((2, 2)), np.zeros((3, 2)))
    with pytest.raises(ContractError):
        Population(np.zeros((1, 2)), np.array([[np.nan, 1.0]]))
    with pytest.raises(ContractError):
        Population.from_individuals([Individual(np.zeros(2))])


def test_constrained_dominance_rules():
    assert constrained_dominates([9, 9], [0, 0], 0.0, 1.0) is Dominance.FIRST_DOMINATES
    assert constrained_dominates([0, 0], [9, 9], 2.0, 1.0) is Dominance.SECOND_DOMINATES
    assert constrained_dominates([0, 0], [9, 9], 1.0, 1.0) is Dominance.INCOMPARABLE
    assert constrained_dominates([0, 0], [9, 9], 1.0, 0.0) is Dominance.SECOND_DOMINATES
    assert constrained_dominates([0, 1], [1, 2], 0.0, 0.0) is Dominance.FIRST_DOMINATES


@given(vec3, vec3)
def test_antisymmetry(a, b):
    assert dominates(a, b) is dominates(b, a).flip()


@given(vec3, vec3, vec3)
def test_transitivity(a, b, c):
    if dominates(a, b) is Dominance.FIRST_DOMINATES and dominates(b, c) is Dominance.FIRST_DOMINATES:
        assert dominates(a, c) is Dominance.FIRST_DOMINATES


@settings(max_examples=200)
@given(vec3, vec3, st.sampled_from([[(0, 1), (1, 2)], [(0,), (1, 2)], [(2, 0), (1,)], [(0, 1, 2)]]))
def test_global_dominance_implies_party_dominance_or_equal_slice(a, b, parties):
    scheme = PartyScheme(parties, 3)
    if dominates(a, b) is Dominance.FIRST_DOMINATES:
        for k in range(scheme.n_parties):
            sa, sb = party_view(a, k, scheme), party_view(b, k, scheme)
            rel = dominates(sa, sb)
            assert rel is Dominance.FIRST_DOMINATES or (rel is Dominance.INCOMPARABLE and np.array_equal(sa, sb))


@given(st.lists(st.lists(st.integers(0, 4), min_size=1, max_size=3, unique=True), min_size=1, max_size=3))
def test_union_of_views_covers_all(parties):
    m = 1 + max(max(p) for p in parties)
    covered = set().union(*parties)
    if covered != set(range(m)):
        with pytest.raises(ContractError):
            PartyScheme(parties, m)
        return
    scheme = PartyScheme(parties, m)
    touched = set()
    for k in range(scheme.n_parties):
        touched.update(scheme.index(k).tolist())
    assert touched == set(range(m))
