"""Non-commutation structure of a model: the degree bound g and a layer decomposition.

Two terms interfere only if their supports overlap AND the commutator of
their embeddings on the joint support is nonzero; support overlap alone is
not enough (diagonal terms commute).  Layers come from greedy coloring in
deterministic term order, so the layer count feeds reproducible thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GaplabError
from .operators import LatticeHamiltonian, embed_dense

COMMUTATOR_TOL = 1e-10


@dataclass
class LayerAssignment:
    """Partition of term indices into mutually commuting layers."""

    layers: list[list[int]]
    num_layers: int
    max_noncommuting: int  # largest number of non-commuting partners of any term

    def to_dict(self) -> dict:
        return {
            "layers": [list(map(int, layer)) for layer in self.layers],
            "num_layers": int(self.num_layers),
            "max_noncommuting": int(self.max_noncommuting),
        }


def commutator_norm(lattice: LatticeHamiltonian, i: int, j: int) -> float:
    """Spectral norm of [term_i, term_j] embedded on their joint support."""
    ti, tj = lattice.terms[i], lattice.terms[j]
    pos_i = lattice.term_positions(ti)
    pos_j = lattice.term_positions(tj)
    joint = sorted(set(pos_i) | set(pos_j))
    remap = {p: q for q, p in enumerate(joint)}
    dims = tuple(lattice.site_dims[p] for p in joint)
    a = embed_dense(ti.matrix, [remap[p] for p in pos_i], dims)
    b = embed_dense(tj.matrix, [remap[p] for p in pos_j], dims)
    c = a @ b - b @ a
    return float(np.linalg.norm(c, 2))


def noncommutation_graph(lattice: LatticeHamiltonian) -> list[set[int]]:
    """Adjacency sets over term indices; zero-norm terms are isolated."""
    n = len(lattice.terms)
    adjacency: list[set[int]] = [set() for _ in range(n)]
    positions = [set(lattice.term_positions(t)) for t in lattice.terms]
    nonzero = [bool(np.any(t.matrix)) for t in lattice.terms]
    for i in range(n):
        if not nonzero[i]:
            continue
        for j in range(i + 1, n):
            if not nonzero[j] or not (positions[i] & positions[j]):
                continue
            if commutator_norm(lattice, i, j) > COMMUTATOR_TOL:
                adjacency[i].add(j)
                adjacency[j].add(i)
    return adjacency


def greedy_layers(
    lattice: LatticeHamiltonian,
    adjacency: list[set[int]] | None = None,
    order: list[int] | None = None,
) -> LayerAssignment:
    """Greedy coloring of the non-commutation graph in term order.

    The per-layer commutation is re-verified post hoc; a failure there means
    the coloring (or the graph) is buggy, so it raises loudly.
    """
    if adjacency is None:
        adjacency = noncommutation_graph(lattice)
    nonzero = [bool(np.any(t.matrix)) for t in lattice.terms]
    vertices = [i for i in (order if order is not None else range(len(lattice.terms))) if nonzero[i]]
    color: dict[int, int] = {}
    for i in vertices:
        used = {color[j] for j in adjacency[i] if j in color}
        c = 0
        while c in used:
            c += 1
        color[i] = c
    num_layers = max(color.values()) + 1 if color else 0
    layers = [sorted(i for i, c in color.items() if c == layer) for layer in range(num_layers)]
    for layer in layers:
        for a_idx, i in enumerate(layer):
            for j in layer[a_idx + 1 :]:
                if j in adjacency[i]:
                    raise GaplabError(f"coloring bug: terms {i} and {j} share a layer but do not commute")
                # adjacency already encodes the commutator test; double-check
                # overlapping pairs directly since a wrong graph would poison
                # every downstream threshold.
                if set(lattice.term_positions(lattice.terms[i])) & set(
                    lattice.term_positions(lattice.terms[j])
                ):
                    if commutator_norm(lattice, i, j) > COMMUTATOR_TOL:
                        raise GaplabError(f"layer verification failed for terms {i}, {j}")
    g = max((len(adjacency[i]) for i in vertices), default=0)
    return LayerAssignment(layers=layers, num_layers=num_layers, max_noncommuting=g)
