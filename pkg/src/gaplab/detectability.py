"""Detectability operator, its contraction and converse bounds, and the
two-projector block machinery behind the converse proof."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NonHermitianError, PreconditionError
from .layering import LayerAssignment, greedy_layers
from .operators import (
    EmbeddedOperator,
    LatticeHamiltonian,
    SparseHermitianOperator,
    apply_product,
    assemble,
    embed_local_term,
)
from .spectral import (
    DominanceReport,
    KernelProjector,
    kernel_projector,
    operator_dominates,
    restricted_top_norm,
    spectrum,
    vector_hash,
)

#: Above this dimension DL factors stay lazy; the product is never materialized.
MATERIALIZE_DIM = 4096

PAIR_BOUND_NU_MAX = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass
class DetectabilityOperator:
    """Layer-ordered product of complement projectors (1 - P), leftmost first.

    ``factors[i]`` belongs to layer ``factor_layers[i]``; layers appear in
    ascending order and within a layer the factors commute, so the
    within-layer order is irrelevant (asserted by tests, not trusted).
    """

    lattice: LatticeHamiltonian
    assignment: LayerAssignment
    factors: list = field(default_factory=list)
    factor_layers: list[int] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.lattice.dim

    @property
    def hermitian(self) -> bool:
        return False

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return apply_product(self.factors, v)

    def adjoint_matvec(self, v: np.ndarray) -> np.ndarray:
        return apply_product(list(reversed(self.factors)), v)

    def norm_bound(self) -> float:
        return 1.0


class ComposedGram:
    """DL^dagger DL as a composed Hermitian map; nothing materialized."""

    def __init__(self, dl: DetectabilityOperator):
        self.dl = dl
        self.hermitian = True

    @property
    def dim(self) -> int:
        return self.dl.dim

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.dl.adjoint_matvec(self.dl.matvec(v))

    def norm_bound(self) -> float:
        return 1.0


def build_dl(
    lattice: LatticeHamiltonian,
    assignment: LayerAssignment | None = None,
    materialize: bool | None = None,
) -> DetectabilityOperator:
    """Detectability operator: factors (1 - P) grouped layer by layer."""
    if assignment is None:
        assignment = greedy_layers(lattice)
    if materialize is None:
        materialize = lattice.dim <= MATERIALIZE_DIM
    factors = []
    factor_layers = []
    for layer_index, layer in enumerate(assignment.layers):
        for term_index in layer:
            term = lattice.terms[term_index]
            if not term.is_projector:
                raise PreconditionError("detectability factors require projector terms")
            if materialize:
                emb = embed_local_term(term, lattice)
                factor = SparseHermitianOperator(
                    sp.identity(lattice.dim, dtype=np.complex128, format="csr") - emb.matrix,
                    verify=False,
                )
            else:
                local = np.eye(term.matrix.shape[0], dtype=np.complex128) - term.matrix
                factor = EmbeddedOperator(lattice.site_dims, lattice.term_positions(term), local)
            factors.append(factor)
            factor_layers.append(layer_index)
    return DetectabilityOperator(lattice, assignment, factors, factor_layers)


def verify_detectability(
    lattice: LatticeHamiltonian,
    method: str = "auto",
    seed: int = 0,
    tol: float = 1e-9,
) -> dict:
    """Check the contraction bound max over the excited space of ||DL psi||^2.

    The bound is 1/(1 + gap/g^2); for a fully commuting model (g = 0) the
    product annihilates the excited space exactly, so the bound degenerates
    to 0 and is checked as such.
    """
    assignment = greedy_layers(lattice)
    hamiltonian = assemble(lattice)
    report = spectrum(hamiltonian, method=method, seed=seed)
    kernel = kernel_projector(hamiltonian, method=method, seed=seed)
    dl = build_dl(lattice, assignment)
    lhs, witness = restricted_top_norm(dl.factors, kernel, method=method, seed=seed, return_vector=True)
    g = assignment.max_noncommuting
    rhs = 0.0 if g == 0 else 1.0 / (1.0 + report.gap / g**2)
    passed = lhs <= rhs + tol
    out = {
        "check": "detectability_contraction",
        "lhs": float(lhs),
        "rhs": float(rhs),
        "margin": float(rhs - lhs),
        "gap": float(report.gap),
        "max_noncommuting": int(g),
        "num_layers": int(assignment.num_layers),
        "kernel_dim": int(report.kernel_dim),
        "tol": tol,
        "passed": bool(passed),
    }
    if not passed and witness is not None:
        out["witness_hash"] = vector_hash(witness)
    return out


def verify_converse(
    lattice: LatticeHamiltonian,
    constant: int = 4,
    method: str = "auto",
    seed: int = 0,
    tol: float = 1e-9,
) -> dict:
    """Check DL^dagger DL >= 1 - constant * H in the PSD order.

    ``constant=3`` is the sharpened two-layer version and is only accepted
    when the model really has two layers; ``constant=4`` holds for any layer
    count.
    """
    if constant not in (3, 4):
        raise PreconditionError(f"constant must be 3 or 4, got {constant}")
    assignment = greedy_layers(lattice)
    if constant == 3 and assignment.num_layers > 2:
        raise PreconditionError(
            f"constant 3 requires a two-layer model, this one has {assignment.num_layers}"
        )
    dl = build_dl(lattice, assignment)
    gram = ComposedGram(dl)
    hamiltonian = assemble(lattice)
    rhs = SparseHermitianOperator(
        sp.identity(lattice.dim, dtype=np.complex128, format="csr") - constant * hamiltonian.matrix,
        verify=False,
    )
    dom: DominanceReport = operator_dominates(gram, rhs, tol=tol, method=method, seed=seed)
    out = {
        "check": f"detectability_converse_c{constant}",
        "constant": constant,
        "min_eigenvalue": dom.min_eigenvalue,
        "tol": tol,
        "num_layers": int(assignment.num_layers),
        "passed": bool(dom.holds),
    }
    if dom.witness is not None:
        out["witness_hash"] = vector_hash(dom.witness)
    return out


# -- two-projector block machinery ----------------------------------------------


@dataclass
class JordanBlock:
    """One invariant block of a projector pair: dim <= 2, one vector per projector."""

    basis: np.ndarray  # (dim, 1 or 2) orthonormal columns spanning the block
    v1: np.ndarray | None
    v2: np.ndarray | None
    overlap: float  # |<v1|v2>|^2, 0.0 when either vector is null

    @property
    def block_dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T


@dataclass
class JordanDecomposition:
    blocks: list[JordanBlock]
    degenerate_angles: bool
    residuals: dict

    def overlaps(self) -> list[float]:
        return [b.overlap for b in self.blocks]


def _projector_range(p: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    scale = max(float(np.linalg.norm(p)), 1.0)
    if np.linalg.norm(p - p.conj().T) > 1e-10 * scale or np.linalg.norm(p @ p - p) > 1e-8 * scale:
        raise NonHermitianError("input is not a Hermitian projector within tolerance")
    evals, evecs = np.linalg.eigh(p)
    return np.ascontiguousarray(evecs[:, evals > 0.5]).astype(np.complex128)


def jordan_decompose(p1: np.ndarray, p2: np.ndarray, angle_tol: float = 1e-8) -> JordanDecomposition:
    """Simultaneous block diagonalization of two projectors into blocks of dim <= 2.

    Principal pairs come from the SVD of the cross-Gram of the two ranges;
    each singular value is the absolute overlap of the paired vectors.  When
    two principal angles coincide within ``angle_tol`` the pairing is not
    unique; the decomposition is still valid and gets flagged.
    """
    p1 = np.asarray(p1, dtype=np.complex128)
    p2 = np.asarray(p2, dtype=np.complex128)
    x = _projector_range(p1)
    y = _projector_range(p2)
    k1, k2 = x.shape[1], y.shape[1]
    blocks: list[JordanBlock] = []
    if min(k1, k2) > 0:
        u, s, wh = np.linalg.svd(x.conj().T @ y, full_matrices=True)
        xs = x @ u
        ys = y @ wh.conj().T
    else:
        s = np.zeros(0)
        xs = x
        ys = y
    npair = min(k1, k2)
    for beta in range(npair):
        sigma = float(s[beta])
        vx = xs[:, beta]
        vy = ys[:, beta]
        if sigma >= 1.0 - angle_tol:
            blocks.append(JordanBlock(vx[:, None], vx, vy, sigma**2))
        elif sigma <= angle_tol:
            blocks.append(JordanBlock(vx[:, None], vx, None, 0.0))
            blocks.append(JordanBlock(vy[:, None], None, vy, 0.0))
        else:
            perp = vy - vx * (vx.conj() @ vy)
            perp = perp / np.linalg.norm(perp)
            blocks.append(JordanBlock(np.stack([vx, perp], axis=1), vx, vy, sigma**2))
    for beta in range(npair, k1):
        blocks.append(JordanBlock(xs[:, beta][:, None], xs[:, beta], None, 0.0))
    for beta in range(npair, k2):
        blocks.append(JordanBlock(ys[:, beta][:, None], None, ys[:, beta], 0.0))

    interior = [v for v in s[:npair] if angle_tol < v < 1.0 - angle_tol]
    degenerate = any(
        abs(a - b) < angle_tol for i, a in enumerate(interior) for b in interior[i + 1 :]
    )

    # Residuals for the reconstruction and the two block identities.
    recon1 = sum(b.projector() @ p1 @ b.projector() for b in blocks)
    recon2 = sum(b.projector() @ p2 @ b.projector() for b in blocks)
    product_lhs = p2 @ p1 @ p2
    product_rhs = np.zeros_like(p1)
    sum_rhs = np.zeros_like(p1)
    for b in blocks:
        if b.v2 is not None:
            product_rhs += b.overlap * np.outer(b.v2, b.v2.conj())
            sum_rhs += np.outer(b.v2, b.v2.conj())
        if b.v1 is not None:
            sum_rhs += np.outer(b.v1, b.v1.conj())
    residuals = {
        "reconstruction_1": float(np.linalg.norm(recon1 - p1, 2)),
        "reconstruction_2": float(np.linalg.norm(recon2 - p2, 2)),
        "product_identity": float(np.linalg.norm(product_lhs - product_rhs, 2)),
        "sum_identity": float(np.linalg.norm(p1 + p2 - sum_rhs, 2)),
    }
    return JordanDecomposition(blocks=blocks, degenerate_angles=degenerate, residuals=residuals)


def verify_pair_overlap_bound(samples: int, nu: float, seed: int | None = None, tol: float = 1e-12) -> dict:
    """Check the single-block inequality behind the sharpened converse bound.

    For unit (a, b) and the 2x2 matrices it induces, the inequality
    ``|v1><v1| + |v2><v2| <= nu |a|^2 |v2><v2| + (2 - nu) I`` holds exactly
    when ``nu <= (3 - sqrt(5))/2``.  Above that threshold the check still
    runs but reports violations instead of asserting; the determinant factor
    ``(1 - nu)^2 - nu |a|^2`` witnesses tightness at |a| = 1.
    """
    if nu < 0:
        raise PreconditionError(f"nu must be nonnegative, got {nu}")
    if seed is None:
        raise PreconditionError("sampled check requires an explicit seed")
    in_regime = nu <= PAIR_BOUND_NU_MAX + 1e-15
    rng = np.random.default_rng(seed)
    pairs = [(1.0 + 0.0j, 0.0j), (0.0j, 1.0 + 0.0j)]
    # Near-boundary sample: |a|^2 close to 1 exposes the failure just past the
    # threshold, where the |a| = 1 limit itself is masked by |b|^2 = 0.
    eps = 1e-6
    pairs.append((complex(np.sqrt(1 - eps)), complex(np.sqrt(eps))))
    while len(pairs) < samples:
        z = rng.standard_normal(4)
        a = z[0] + 1j * z[1]
        b = z[2] + 1j * z[3]
        norm = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
        pairs.append((a / norm, b / norm))

    violations = 0
    min_eig = np.inf
    det_mismatch = 0.0
    for a, b in pairs:
        aa, bb = abs(a) ** 2, abs(b) ** 2
        lhs = np.array([[1.0 + aa, a * np.conj(b)], [np.conj(a) * b, bb]], dtype=np.complex128)
        rhs = np.diag([2.0 - nu * bb, 2.0 - nu]).astype(np.complex128)
        w = np.linalg.eigvalsh(rhs - lhs)
        min_eig = min(min_eig, float(w[0]))
        if w[0] < -tol:
            violations += 1
        det_direct = float(np.real(np.linalg.det(rhs - lhs)))
        det_formula = bb * ((1.0 - nu) ** 2 - nu * aa)
        det_mismatch = max(det_mismatch, abs(det_direct - det_formula))
    boundary_factor = (1.0 - nu) ** 2 - nu  # the |a| = 1 determinant factor
    return {
        "check": "pair_overlap_bound",
        "nu": float(nu),
        "nu_max": PAIR_BOUND_NU_MAX,
        "in_regime": bool(in_regime),
        "samples": len(pairs),
        "violations": int(violations),
        "min_eigenvalue": float(min_eig),
        "boundary_determinant_factor": float(boundary_factor),
        "determinant_formula_mismatch": float(det_mismatch),
        "tol": tol,
        "passed": bool(violations == 0) if in_regime else None,
    }
