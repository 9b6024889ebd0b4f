"""Tensor-embedding algebra for local Hamiltonians on finite lattices.

Sites live on a D-dimensional grid with 1-based coordinates and are ordered
row-major (axis 1 slowest), so every operator built from the same model file
is reproducible entry for entry.  Local terms are small dense Hermitian
matrices on a few sites; they are embedded into the full Hilbert space either
as a global sparse matrix (CSR) or as a lazy tensor application that never
materializes anything larger than the local block.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.sparse as sp

from .errors import (
    DimensionMismatchError,
    NonHermitianError,
    SchemaError,
    SupportError,
)

HERMITICITY_RTOL = 1e-12
PROJECTOR_RTOL = 1e-12

#: Refuse to materialize a global CSR matrix with more stored entries than this.
MATERIALIZE_NNZ_LIMIT = 80_000_000

MODEL_SCHEMA = "gaplab-model/1"

Coords = tuple[int, ...]


def _frob(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


@dataclass(frozen=True)
class LocalTerm:
    """A Hermitian matrix acting on an ordered tuple of lattice sites.

    The matrix is indexed row-major over the support sites in the order they
    are listed, so ``support=((2,), (1,))`` and the site-swapped matrix denote
    the same physical operator.
    """

    support: tuple[Coords, ...]
    matrix: np.ndarray
    is_projector: bool = False

    def __post_init__(self) -> None:
        support = tuple(tuple(int(c) for c in site) for site in self.support)
        object.__setattr__(self, "support", support)
        if len(set(support)) != len(support):
            raise SupportError(f"support sites must be distinct, got {support}")
        m = np.array(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"term matrix must be square, got shape {m.shape}")
        scale = _frob(m)
        if _frob(m - m.conj().T) > HERMITICITY_RTOL * max(scale, 1.0):
            raise NonHermitianError("term matrix is not Hermitian within 1e-12 relative")
        if self.is_projector and _frob(m @ m - m) > PROJECTOR_RTOL * max(scale, 1.0):
            raise NonHermitianError("term flagged as projector but M^2 != M within 1e-12 relative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_sites(self) -> int:
        return len(self.support)


@dataclass
class LatticeHamiltonian:
    """A sum of local terms on a finite lattice of qudits.

    ``site_dims`` is per site, in row-major site order; ``boundary`` is per
    axis ("open" or "periodic").  Frustration-freeness is not assumed here;
    the spectral module checks it where needed.
    """

    axis_lengths: tuple[int, ...]
    site_dims: tuple[int, ...]
    boundary: tuple[str, ...]
    terms: list[LocalTerm] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.axis_lengths = tuple(int(n) for n in self.axis_lengths)
        if not self.axis_lengths or any(n < 1 for n in self.axis_lengths):
            raise SchemaError(f"axis lengths must be positive, got {self.axis_lengths}")
        self.site_dims = tuple(int(d) for d in self.site_dims)
        if len(self.site_dims) != self.n_sites:
            raise SchemaError(
                f"need one site dimension per site ({self.n_sites}), got {len(self.site_dims)}"
            )
        if any(d < 2 for d in self.site_dims):
            raise SchemaError("every site dimension must be >= 2")
        self.boundary = tuple(str(b) for b in self.boundary)
        if len(self.boundary) != len(self.axis_lengths):
            raise SchemaError("need one boundary condition per axis")
        if any(b not in ("open", "periodic") for b in self.boundary):
            raise SchemaError(f"boundary must be 'open' or 'periodic', got {self.boundary}")
        terms = list(self.terms)
        self.terms = []
        for term in terms:
            self.add_term(term)

    # -- geometry -----------------------------------------------------------

    @classmethod
    def uniform(
        cls,
        axis_lengths: tuple[int, ...] | list[int],
        site_dim: int = 2,
        boundary: str | tuple[str, ...] = "open",
        terms: list[LocalTerm] | None = None,
    ) -> "LatticeHamiltonian":
        axis_lengths = tuple(int(n) for n in axis_lengths)
        n_sites = int(np.prod(axis_lengths))
        if isinstance(boundary, str):
            boundary = (boundary,) * len(axis_lengths)
        return cls(axis_lengths, (site_dim,) * n_sites, tuple(boundary), list(terms or []))

    @property
    def n_axes(self) -> int:
        return len(self.axis_lengths)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.axis_lengths))

    @property
    def dim(self) -> int:
        return int(np.prod([int(d) for d in self.site_dims], dtype=object))

    def wrap(self, coords: Coords) -> Coords:
        """Canonicalize coordinates, wrapping periodic axes into range.

        Wrap arithmetic happens here, at model construction; embedded
        operators only ever see in-range coordinates.
        """
        if len(coords) != self.n_axes:
            raise SupportError(f"site {coords} has {len(coords)} coordinates, lattice has {self.n_axes} axes")
        out = []
        for c, n, b in zip(coords, self.axis_lengths, self.boundary):
            c = int(c)
            if b == "periodic":
                c = (c - 1) % n + 1
            elif not 1 <= c <= n:
                raise SupportError(f"coordinate {c} outside [1:{n}] on an open axis")
            out.append(c)
        return tuple(out)

    def site_number(self, coords: Coords) -> int:
        """0-based linear site index, row-major with axis 1 slowest."""
        coords = self.wrap(coords)
        idx = 0
        for c, n in zip(coords, self.axis_lengths):
            idx = idx * n + (c - 1)
        return idx

    def coords_of(self, site: int) -> Coords:
        out = []
        for n in reversed(self.axis_lengths):
            out.append(site % n + 1)
            site //= n
        return tuple(reversed(out))

    def hilbert_strides(self) -> list[int]:
        """Stride of each site's index in the global row-major basis."""
        strides = [1] * self.n_sites
        for i in range(self.n_sites - 2, -1, -1):
            strides[i] = strides[i + 1] * self.site_dims[i + 1]
        return strides

    # -- terms ---------------------------------------------------------------

    def add_term(self, term: LocalTerm) -> None:
        support = tuple(self.wrap(site) for site in term.support)
        positions = [self.site_number(site) for site in support]
        if len(set(positions)) != len(positions):
            raise SupportError(f"support {term.support} repeats a site after boundary wrapping")
        local_dim = int(np.prod([self.site_dims[p] for p in positions]))
        if term.matrix.shape[0] != local_dim:
            raise DimensionMismatchError(
                f"term matrix has dimension {term.matrix.shape[0]}, support dims multiply to {local_dim}"
            )
        if support != term.support:
            term = LocalTerm(support, term.matrix, term.is_projector)
        self.terms.append(term)

    def term_positions(self, term: LocalTerm) -> list[int]:
        return [self.site_number(site) for site in term.support]

    # -- model file I/O ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "axis_lengths": list(self.axis_lengths),
            "site_dims": list(self.site_dims),
            "boundary": list(self.boundary),
            "terms": [
                {
                    "support": [list(site) for site in t.support],
                    "matrix": [[float(z.real), float(z.imag)] for z in t.matrix.ravel()],
                    "projector": bool(t.is_projector),
                }
                for t in self.terms
            ],
        }

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_dict(cls, data: dict) -> "LatticeHamiltonian":
        if not isinstance(data, dict):
            raise SchemaError("model file must contain a JSON object")
        if data.get("schema") != MODEL_SCHEMA:
            raise SchemaError(f"unsupported model schema {data.get('schema')!r}, expected {MODEL_SCHEMA!r}")
        allowed = {"schema", "axis_lengths", "site_dims", "boundary", "terms"}
        unknown = set(data) - allowed
        if unknown:
            raise SchemaError(f"unknown model keys: {sorted(unknown)}")
        try:
            axis_lengths = tuple(data["axis_lengths"])
            site_dims = data["site_dims"]
            boundary = tuple(data["boundary"])
            raw_terms = data["terms"]
        except KeyError as exc:
            raise SchemaError(f"model file missing key {exc}") from exc
        if isinstance(site_dims, int):
            site_dims = (site_dims,) * int(np.prod(axis_lengths))
        lattice = cls(axis_lengths, tuple(site_dims), boundary, [])
        for i, raw in enumerate(raw_terms):
            unknown = set(raw) - {"support", "matrix", "projector"}
            if unknown:
                raise SchemaError(f"term {i}: unknown keys {sorted(unknown)}")
            support = tuple(tuple(site) for site in raw["support"])
            pairs = np.asarray(raw["matrix"], dtype=float)
            if pairs.ndim != 2 or pairs.shape[1] != 2:
                raise SchemaError(f"term {i}: matrix must be a list of [re, im] pairs")
            flat = pairs[:, 0] + 1j * pairs[:, 1]
            d = math.isqrt(flat.size)
            if d * d != flat.size:
                raise SchemaError(f"term {i}: matrix length {flat.size} is not a perfect square")
            try:
                term = LocalTerm(support, flat.reshape(d, d), bool(raw.get("projector", False)))
            except NonHermitianError as exc:
                raise SchemaError(f"term {i}: {exc}") from exc
            lattice.add_term(term)
        return lattice

    @classmethod
    def load(cls, path: str) -> "LatticeHamiltonian":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- global operators ---------------------------------------------------------


class SparseHermitianOperator:
    """Global sparse operator with an exact CSR matvec."""

    def __init__(self, matrix: sp.spmatrix, hermitian: bool = True, verify: bool = True):
        m = sp.csr_matrix(matrix, dtype=np.complex128)
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatchError(f"operator must be square, got {m.shape}")
        if hermitian and verify and m.nnz:
            diff = (m - m.getH()).tocsr()
            scale = max(float(np.abs(m.data).max()), 1.0)
            if diff.nnz and float(np.abs(diff.data).max()) > HERMITICITY_RTOL * scale:
                raise NonHermitianError("stored entries violate A = A^dagger within 1e-12 relative")
        self.matrix = m
        self.hermitian = hermitian
        self._norm_bound: float | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if v.shape[0] != self.dim:
            raise DimensionMismatchError(f"vector length {v.shape[0]} != operator dimension {self.dim}")
        return self.matrix @ v

    def norm_bound(self) -> float:
        """Upper bound on the spectral norm (exact 1-norm; valid since Hermitian)."""
        if self._norm_bound is None:
            if self.matrix.nnz == 0:
                self._norm_bound = 0.0
            else:
                self._norm_bound = float(np.abs(self.matrix).sum(axis=0).max())
        return self._norm_bound

    def diag_scale(self) -> float:
        d = self.matrix.diagonal()
        return float(np.abs(d).max()) if d.size else 0.0

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


class EmbeddedOperator:
    """Lazy ``identity (x) M (x) identity`` application on chosen sites.

    Applies the local matrix by reshaping the state into its site tensor;
    nothing of global size is ever stored beyond one state vector.
    """

    def __init__(self, site_dims: tuple[int, ...], positions: list[int], matrix: np.ndarray,
                 hermitian: bool = True):
        self.site_dims = tuple(site_dims)
        self.positions = list(positions)
        self.matrix = np.asarray(matrix, dtype=np.complex128)
        self.hermitian = hermitian
        local_dim = int(np.prod([self.site_dims[p] for p in self.positions]))
        if self.matrix.shape != (local_dim, local_dim):
            raise DimensionMismatchError(
                f"local matrix shape {self.matrix.shape} does not match support dims {local_dim}"
            )
        self._local_dim = local_dim
        self._dim = int(np.prod(self.site_dims))
        self._norm: float | None = None

    @property
    def dim(self) -> int:
        return self._dim

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if v.shape[0] != self._dim:
            raise DimensionMismatchError(f"vector length {v.shape[0]} != operator dimension {self._dim}")
        k = len(self.positions)
        psi = np.asarray(v, dtype=np.complex128).reshape(self.site_dims)
        psi = np.moveaxis(psi, self.positions, range(k))
        shape = psi.shape
        psi = self.matrix @ psi.reshape(self._local_dim, -1)
        psi = np.moveaxis(psi.reshape(shape), range(k), self.positions)
        return np.ascontiguousarray(psi).reshape(-1)

    def norm_bound(self) -> float:
        if self._norm is None:
            self._norm = float(np.linalg.norm(self.matrix, 2))
        return self._norm

    def to_dense(self) -> np.ndarray:
        return embed_dense(self.matrix, self.positions, self.site_dims)


def _strides(site_dims: tuple[int, ...]) -> list[int]:
    strides = [1] * len(site_dims)
    for i in range(len(site_dims) - 2, -1, -1):
        strides[i] = strides[i + 1] * site_dims[i + 1]
    return strides


def _offset_grid(dims_and_strides: list[tuple[int, int]]) -> np.ndarray:
    """All index offsets generated by the given (dimension, stride) digits."""
    if not dims_and_strides:
        return np.zeros(1, dtype=np.int64)
    arrays = [np.arange(d, dtype=np.int64) * s for d, s in dims_and_strides]
    return reduce(lambda a, b: np.add.outer(a, b).ravel(), arrays)


def embed_local_term(term: LocalTerm, lattice: LatticeHamiltonian) -> SparseHermitianOperator:
    """Embed ``term.matrix`` into the full Hilbert space as a global CSR matrix.

    The result equals M tensored with identity on the complement, in the
    global row-major site ordering.
    """
    positions = lattice.term_positions(term)
    strides = lattice.hilbert_strides()
    dims = lattice.site_dims
    support_set = set(positions)
    complement = [p for p in range(lattice.n_sites) if p not in support_set]

    comp_size = int(np.prod([dims[p] for p in complement])) if complement else 1
    i_idx, j_idx = np.nonzero(term.matrix)
    est_nnz = len(i_idx) * comp_size
    if est_nnz > MATERIALIZE_NNZ_LIMIT:
        raise MemoryError(
            f"embedding would store ~{est_nnz} entries; use embedded_operator() for lazy application"
        )

    sup_off = _offset_grid([(dims[p], strides[p]) for p in positions])
    comp_off = _offset_grid([(dims[p], strides[p]) for p in complement])
    vals = term.matrix[i_idx, j_idx]

    rows = (sup_off[i_idx][:, None] + comp_off[None, :]).ravel()
    cols = (sup_off[j_idx][:, None] + comp_off[None, :]).ravel()
    data = np.broadcast_to(vals[:, None], (len(vals), comp_size)).ravel()
    dim = lattice.dim
    matrix = sp.csr_matrix((data, (rows, cols)), shape=(dim, dim))
    return SparseHermitianOperator(matrix, hermitian=True, verify=False)


def embedded_operator(term: LocalTerm, lattice: LatticeHamiltonian) -> EmbeddedOperator:
    """Lazy counterpart of :func:`embed_local_term` for large lattices."""
    return EmbeddedOperator(lattice.site_dims, lattice.term_positions(term), term.matrix)


def assemble(lattice: LatticeHamiltonian, term_filter=None) -> SparseHermitianOperator:
    """Sum of embedded terms passing ``term_filter`` (all terms if None)."""
    dim = lattice.dim
    total = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for term in lattice.terms:
        if term_filter is not None and not term_filter(term):
            continue
        if not np.any(term.matrix):
            continue
        total = total + embed_local_term(term, lattice).matrix
    return SparseHermitianOperator(total, hermitian=True, verify=False)


def apply(op, v: np.ndarray) -> np.ndarray:
    """Exact matvec; the single entry point used by solvers and probes."""
    v = np.asarray(v, dtype=np.complex128)
    return op.matvec(v)


def apply_product(ops, v: np.ndarray) -> np.ndarray:
    """Apply ``ops[0] @ ops[1] @ ... @ ops[-1]`` to ``v`` right to left.

    The product matrix is never materialized.
    """
    v = np.asarray(v, dtype=np.complex128)
    for op in reversed(list(ops)):
        v = apply(op, v)
    return v


def embed_dense(matrix: np.ndarray, positions: list[int], dims: tuple[int, ...]) -> np.ndarray:
    """Dense embedding of a local matrix on sites ``positions`` of a dim list.

    Small helper for joint-support commutators and tests; quadratic in the
    total dimension, so keep that below a few thousand.
    """
    matrix = np.asarray(matrix, dtype=np.complex128)
    strides = _strides(tuple(dims))
    support_set = set(positions)
    complement = [p for p in range(len(dims)) if p not in support_set]
    sup_off = _offset_grid([(dims[p], strides[p]) for p in positions])
    comp_off = _offset_grid([(dims[p], strides[p]) for p in complement])
    dim = int(np.prod(dims))
    out = np.zeros((dim, dim), dtype=np.complex128)
    rows = sup_off[:, None] + comp_off[None, :]
    cols = sup_off[:, None] + comp_off[None, :]
    for a in range(matrix.shape[0]):
        for b in range(matrix.shape[1]):
            if matrix[a, b] != 0:
                out[rows[a], cols[b]] = matrix[a, b]
    return out


def restrict_sites(lattice: LatticeHamiltonian, positions: list[int]):
    """Restriction of the model to a subset of sites, as a synthetic 1D chain.

    Returns ``(sub_lattice, kept_term_indices)``.  Only terms entirely
    supported on ``positions`` survive; their site order inside each support
    is preserved.
    """
    pos_to_new = {p: i for i, p in enumerate(positions)}
    dims = tuple(lattice.site_dims[p] for p in positions)
    sub = LatticeHamiltonian((len(positions),), dims, ("open",), [])
    kept = []
    for idx, term in enumerate(lattice.terms):
        tpos = lattice.term_positions(term)
        if all(p in pos_to_new for p in tpos):
            new_support = tuple((pos_to_new[p] + 1,) for p in tpos)
            sub.add_term(LocalTerm(new_support, term.matrix, term.is_projector))
            kept.append(idx)
    return sub, kept
