"""Bundled frustration-free models and the exact one-magnon gap oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, SchemaError
from .operators import LatticeHamiltonian, LocalTerm

#: Nearest-neighbour ferromagnet interaction: projector onto the two-qubit
#: singlet (|01> - |10>)/sqrt(2), written in the (00, 01, 10, 11) basis.
SINGLET_PROJECTOR = 0.5 * np.array(
    [
        [0, 0, 0, 0],
        [0, 1, -1, 0],
        [0, -1, 1, 0],
        [0, 0, 0, 0],
    ],
    dtype=np.complex128,
)

#: Single-qubit projector |1><1|.
EXCITED_PROJECTOR = np.diag([0.0, 1.0]).astype(np.complex128)


def heisenberg_chain(n: int, boundary: str = "open") -> LatticeHamiltonian:
    """Spin-1/2 ferromagnet: a singlet projector on every nearest-neighbour pair."""
    if n < 2:
        raise PreconditionError(f"chain needs at least 2 qubits, got n={n}")
    lattice = LatticeHamiltonian.uniform((n,), 2, boundary)
    last = n if boundary == "periodic" else n - 1
    for i in range(1, last + 1):
        lattice.add_term(LocalTerm(((i,), (i + 1,)), SINGLET_PROJECTOR, is_projector=True))
    return lattice


def magnon_gap_oracle(n: int) -> float:
    """Exact gap of the open ferromagnetic chain from its one-magnon block.

    The Hamiltonian restricted to the single-spin-flip sector is half the
    path-graph Laplacian (n x n); its smallest nonzero eigenvalue is the full
    chain's gap.  Independent of the operator-embedding machinery.
    """
    if n < 2:
        raise PreconditionError(f"need n >= 2, got {n}")
    block = np.zeros((n, n))
    for i in range(n - 1):
        block[i, i] += 0.5
        block[i + 1, i + 1] += 0.5
        block[i, i + 1] -= 0.5
        block[i + 1, i] -= 0.5
    evals = np.linalg.eigvalsh(block)
    nonzero = evals[evals > 1e-12]
    return float(nonzero[0])


def decoupled_ferro_lattice(axis_lengths: tuple[int, ...] | list[int]) -> LatticeHamiltonian:
    """Independent ferromagnetic chains along axis 1, one per transverse site."""
    axis_lengths = tuple(int(n) for n in axis_lengths)
    if axis_lengths[0] < 2:
        raise PreconditionError("axis 1 must hold chains of length >= 2")
    lattice = LatticeHamiltonian.uniform(axis_lengths, 2, "open")
    transverse = [range(1, n + 1) for n in axis_lengths[1:]]
    for rest in np.ndindex(*[len(r) for r in transverse]) if transverse else [()]:
        tail = tuple(transverse[a][i] for a, i in enumerate(rest))
        for i in range(1, axis_lengths[0]):
            support = ((i,) + tail, (i + 1,) + tail)
            lattice.add_term(LocalTerm(support, SINGLET_PROJECTOR, is_projector=True))
    return lattice


def mixed_chain(n: int, k: int) -> LatticeHamiltonian:
    """Ferromagnet on the first k qubits, |1><1| pinning on qubits k+1..n.

    Qubit k is deliberately left uncoupled from qubit k+1, so the two parts
    are exactly decoupled.
    """
    if not 1 <= k <= n:
        raise PreconditionError(f"need 1 <= k <= n, got k={k}, n={n}")
    lattice = LatticeHamiltonian.uniform((n,), 2, "open")
    for i in range(1, k):
        lattice.add_term(LocalTerm(((i,), (i + 1,)), SINGLET_PROJECTOR, is_projector=True))
    for i in range(k + 1, n + 1):
        lattice.add_term(LocalTerm(((i,),), EXCITED_PROJECTOR, is_projector=True))
    return lattice


def random_frustration_free(
    axis_lengths: tuple[int, ...] | list[int],
    interaction_range: int = 2,
    excluded_rank: int = 1,
    seed: int | None = None,
    boundary: str = "open",
) -> LatticeHamiltonian:
    """Random frustration-free model with a known product ground state.

    Draws a product state ``|Omega> = (x)_i |phi_i>`` and, on every
    axis-aligned hypercube window of side ``interaction_range``, a rank-
    ``excluded_rank`` projector onto a random subspace orthogonal to the
    window's factor of ``|Omega>``.  Every term annihilates ``|Omega>`` by
    construction, so the model is frustration-free with ``|Omega>`` in the
    kernel.

    Randomness comes from numpy's ``Generator`` over the PCG64 bit stream, so
    a seed pins the model bit for bit.
    """
    if seed is None:
        raise PreconditionError("random_frustration_free requires an explicit seed")
    axis_lengths = tuple(int(n) for n in axis_lengths)
    w = int(interaction_range)
    if w < 1 or any(n < w for n in axis_lengths):
        raise PreconditionError(f"interaction range {w} does not fit axis lengths {axis_lengths}")
    lattice = LatticeHamiltonian.uniform(axis_lengths, 2, boundary)
    rng = np.random.default_rng(seed)

    local_states = []
    for _ in range(lattice.n_sites):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        local_states.append(v / np.linalg.norm(v))

    window_sites = w ** len(axis_lengths)
    local_dim = 2 ** window_sites
    if not 1 <= excluded_rank <= local_dim - 1:
        raise PreconditionError(
            f"excluded rank must lie in [1, {local_dim - 1}] for {window_sites}-site windows"
        )

    starts_per_axis = [
        range(1, n + 1) if b == "periodic" else range(1, n - w + 2)
        for n, b in zip(axis_lengths, lattice.boundary)
    ]
    for start_idx in np.ndindex(*[len(s) for s in starts_per_axis]):
        start = tuple(starts_per_axis[a][i] for a, i in enumerate(start_idx))
        support = tuple(
            tuple(start[a] + off[a] for a in range(len(axis_lengths)))
            for off in np.ndindex(*(w,) * len(axis_lengths))
        )
        support = tuple(lattice.wrap(site) for site in support)
        omega = np.ones(1, dtype=np.complex128)
        for site in support:
            omega = np.kron(omega, local_states[lattice.site_number(site)])
        raw = rng.standard_normal((local_dim, excluded_rank)) + 1j * rng.standard_normal(
            (local_dim, excluded_rank)
        )
        raw -= np.outer(omega, omega.conj() @ raw)
        basis, _ = np.linalg.qr(raw)
        basis -= np.outer(omega, omega.conj() @ basis)  # second pass for orthogonality
        basis, _ = np.linalg.qr(basis)
        projector = basis @ basis.conj().T
        lattice.add_term(LocalTerm(support, projector, is_projector=True))
    return lattice


def product_state(lattice: LatticeHamiltonian, seed: int) -> np.ndarray:
    """The product state a seeded :func:`random_frustration_free` call excluded."""
    rng = np.random.default_rng(seed)
    state = np.ones(1, dtype=np.complex128)
    for _ in range(lattice.n_sites):
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        state = np.kron(state, v / np.linalg.norm(v))
    return state


# -- model registry ------------------------------------------------------------


@dataclass
class ModelSpec:
    """Named model constructor plus its parameters, as used by CLI and configs."""

    kind: str
    params: dict = field(default_factory=dict)

    def build(self) -> LatticeHamiltonian:
        return build_model(self)


_KIND_PARAMS = {
    "heisenberg_chain": {"n", "boundary"},
    "decoupled_ferro_lattice": {"axis_lengths"},
    "mixed_chain": {"n", "k"},
    "random_ff": {"axis_lengths", "interaction_range", "excluded_rank", "seed", "boundary"},
    "file": {"path"},
}


def build_model(spec: ModelSpec | dict) -> LatticeHamiltonian:
    if isinstance(spec, dict):
        unknown = set(spec) - {"kind", "params"}
        if unknown:
            raise SchemaError(f"unknown model keys: {sorted(unknown)}")
        spec = ModelSpec(spec["kind"], dict(spec.get("params", {})))
    if spec.kind not in _KIND_PARAMS:
        raise SchemaError(f"unknown model kind {spec.kind!r}; known: {sorted(_KIND_PARAMS)}")
    unknown = set(spec.params) - _KIND_PARAMS[spec.kind]
    if unknown:
        raise SchemaError(f"model kind {spec.kind!r} got unknown parameters {sorted(unknown)}")
    p = spec.params
    if spec.kind == "heisenberg_chain":
        return heisenberg_chain(int(p["n"]), p.get("boundary", "open"))
    if spec.kind == "decoupled_ferro_lattice":
        return decoupled_ferro_lattice(p["axis_lengths"])
    if spec.kind == "mixed_chain":
        return mixed_chain(int(p["n"]), int(p["k"]))
    if spec.kind == "random_ff":
        return random_frustration_free(
            p["axis_lengths"],
            int(p.get("interaction_range", 2)),
            int(p.get("excluded_rank", 1)),
            p.get("seed"),
            p.get("boundary", "open"),
        )
    return LatticeHamiltonian.load(p["path"])
