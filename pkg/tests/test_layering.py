import numpy as np
import pytest

from gaplab import models
from gaplab.layering import commutator_norm, greedy_layers, noncommutation_graph
from gaplab.operators import LatticeHamiltonian, LocalTerm


def test_chain_edges_and_degree():
    lattice = models.heisenberg_chain(6)
    adj = noncommutation_graph(lattice)
    # terms: 0=(1,2), 1=(2,3), 2=(3,4), ...
    assert 1 in adj[0]  # overlapping singlet projectors do not commute
    assert 2 not in adj[0]  # disjoint supports
    assignment = greedy_layers(lattice, adj)
    assert assignment.max_noncommuting == 2
    assert assignment.num_layers == 2
    assert assignment.layers[0] == [0, 2, 4]
    assert assignment.layers[1] == [1, 3]


def test_explicit_commutator_value():
    lattice = models.heisenberg_chain(3)
    assert commutator_norm(lattice, 0, 1) > 0.1
    lattice5 = models.heisenberg_chain(5)
    assert commutator_norm(lattice5, 0, 2) <= 1e-14


def test_overlapping_diagonal_terms_commute():
    lattice = LatticeHamiltonian.uniform((3,), 2)
    d1 = np.diag([0.0, 0.0, 0.0, 1.0]).astype(complex)
    d2 = np.diag([0.0, 1.0, 0.0, 1.0]).astype(complex)
    lattice.add_term(LocalTerm(((1,), (2,)), d1, is_projector=True))
    lattice.add_term(LocalTerm(((2,), (3,)), d2))
    adj = noncommutation_graph(lattice)
    assert adj[0] == set() and adj[1] == set()
    assignment = greedy_layers(lattice, adj)
    assert assignment.num_layers == 1
    assert assignment.max_noncommuting == 0


def test_single_term_model():
    lattice = models.heisenberg_chain(2)
    assignment = greedy_layers(lattice)
    assert assignment.num_layers == 1
    assert assignment.max_noncommuting == 0


def test_greedy_bound_num_layers_le_degree_plus_one():
    cases = [
        models.heisenberg_chain(7),
        models.mixed_chain(8, 4),
        models.random_frustration_free((3, 3), seed=1),
        models.random_frustration_free((9,), seed=2),
    ]
    for lattice in cases:
        assignment = greedy_layers(lattice)
        assert assignment.num_layers <= assignment.max_noncommuting + 1


def test_plaquette_lattice_within_dimension_bound():
    lattice = models.random_frustration_free((3, 3), seed=7)
    assignment = greedy_layers(lattice)
    bound = (3 * 2) ** 2
    assert assignment.num_layers <= 4
    assert assignment.max_noncommuting <= 8
    assert assignment.num_layers <= bound and assignment.max_noncommuting <= bound


def test_reversed_order_recoloring_stays_valid():
    lattice = models.heisenberg_chain(6)
    adj = noncommutation_graph(lattice)
    reversed_order = list(range(len(lattice.terms)))[::-1]
    assignment = greedy_layers(lattice, adj, order=reversed_order)
    # within-layer commutation is re-verified inside greedy_layers; check partition
    flat = sorted(i for layer in assignment.layers for i in layer)
    assert flat == list(range(len(lattice.terms)))


def test_mixed_chain_is_two_layers():
    assignment = greedy_layers(models.mixed_chain(10, 4))
    assert assignment.num_layers == 2
    assert assignment.max_noncommuting == 2


def test_zero_terms_are_excluded_from_layers():
    lattice = LatticeHamiltonian.uniform((2,), 2)
    lattice.add_term(LocalTerm(((1,),), np.zeros((2, 2))))
    lattice.add_term(LocalTerm(((1,),), np.diag([0.0, 1.0]).astype(complex), is_projector=True))
    assignment = greedy_layers(lattice)
    assert assignment.layers == [[1]]


def test_layer_assignment_serializes():
    d = greedy_layers(models.heisenberg_chain(4)).to_dict()
    assert set(d) == {"layers", "num_layers", "max_noncommuting"}
