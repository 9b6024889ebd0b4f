"""Ground-space detection, spectral gaps, and operator-inequality checks.

Two solver paths: dense (exact, dimension <= 4096) and Krylov (ARPACK with a
deflated second solve for the gap).  Every Krylov eigenpair carries a residual
certificate; non-convergence raises instead of silently truncating.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConvergenceError,
    DimensionMismatchError,
    GapUndefinedError,
    IllSeparatedKernelError,
    NotPositiveSemidefiniteError,
    PreconditionError,
)
from .operators import SparseHermitianOperator, apply_product, embed_local_term

DENSE_CUTOFF = 1024
DENSE_LIMIT = 4096
ZERO_THRESHOLD_FACTOR = 1e-10
PSD_TOL = 1e-9
RESIDUAL_TOL = 1e-8
KRYLOV_MIN_DIM = 16
_KRYLOV_MAX_KERNEL = 96


@dataclass
class SpectralReport:
    """Ground energy, kernel dimension and gap, with solver provenance."""

    ground_energy: float
    kernel_dim: int
    gap: float
    zero_threshold: float
    method: str
    residuals: list[float]
    dimension: int
    eigenvalues: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {
            "ground_energy": float(self.ground_energy),
            "kernel_dim": int(self.kernel_dim),
            "gap": float(self.gap),
            "zero_threshold": float(self.zero_threshold),
            "method": self.method,
            "residuals": [float(r) for r in self.residuals],
            "dimension": int(self.dimension),
        }
        if self.eigenvalues is not None:
            out["eigenvalues"] = [float(x) for x in self.eigenvalues]
        return out


@dataclass
class KernelProjector:
    """Orthonormal basis of the numerical kernel; the complement is implicit."""

    basis: np.ndarray  # (dim, kernel_dim), orthonormal columns
    zero_threshold: float

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def kernel_dim(self) -> int:
        return self.basis.shape[1]

    def project(self, v: np.ndarray) -> np.ndarray:
        if self.kernel_dim == 0:
            return np.zeros_like(v)
        return self.basis @ (self.basis.conj().T @ v)

    def project_complement(self, v: np.ndarray) -> np.ndarray:
        return v - self.project(v)

    def complement_basis(self) -> np.ndarray:
        """Orthonormal basis of the orthogonal complement (dense; small dims)."""
        if self.kernel_dim == 0:
            return np.eye(self.dim, dtype=np.complex128)
        return scipy.linalg.null_space(self.basis.conj().T)


def vector_hash(v: np.ndarray) -> str:
    """Stable short hash of a counterexample vector for reports."""
    data = np.round(np.asarray(v, dtype=np.complex128), 12).tobytes()
    return hashlib.sha256(data).hexdigest()[:16]


# -- internals -----------------------------------------------------------------


def _dense_array(op: SparseHermitianOperator) -> np.ndarray:
    a = op.to_dense()
    if np.all(a.imag == 0.0):
        return np.ascontiguousarray(a.real)
    return a


def _zero_threshold(op: SparseHermitianOperator, zero_threshold: float | None) -> float:
    if zero_threshold is not None:
        return float(zero_threshold)
    return ZERO_THRESHOLD_FACTOR * op.diag_scale()


def _seeded_vector(dim: int, seed: int, tag: int = 0) -> np.ndarray:
    rng = np.random.default_rng([seed, tag, dim])
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _pick_method(op, method: str) -> str:
    if method == "auto":
        return "dense" if op.dim <= DENSE_CUTOFF else "krylov"
    if method not in ("dense", "krylov"):
        raise ValueError(f"unknown method {method!r}")
    return method


def _orthonormalize(columns: np.ndarray) -> np.ndarray:
    if columns.shape[1] == 0:
        return columns
    q, _ = np.linalg.qr(columns)
    return q


def _real_if_possible(matrix):
    if matrix.nnz and np.any(matrix.data.imag):
        return matrix
    return matrix.real


def _bulk_kernel_shift_invert(op: SparseHermitianOperator, threshold: float, seed: int):
    """Shift-inverted ARPACK pass: resolves degenerate kernels reliably.

    A small negative shift keeps the factorized matrix positive definite for
    PSD input and strongly separates the kernel from the first excited level.
    """
    dim = op.dim
    mat = _real_if_possible(op.matrix)
    sigma = -max(1e-3 * op.diag_scale(), 1e-9)
    v0 = _seeded_vector(dim, seed, tag=1)
    if not np.iscomplexobj(mat):
        v0 = np.real(v0)
        v0 /= np.linalg.norm(v0)
    k = 16
    while True:
        k = min(k, dim - 2)
        vals, vecs = spla.eigsh(mat, k=k, sigma=sigma, which="LM", v0=v0, maxiter=100 * dim)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        if vals[-1] > threshold or k == dim - 2:
            break
        if k >= _KRYLOV_MAX_KERNEL:
            raise ConvergenceError(
                f"kernel dimension exceeds {_KRYLOV_MAX_KERNEL}; refusing to chase the gap"
            )
        k *= 2
    below = vals <= threshold
    basis = _orthonormalize(vecs[:, below].astype(np.complex128))
    return float(vals[0]), basis


def _deflated_solve(op: SparseHermitianOperator, basis: np.ndarray, k: int, seed: int, tag: int):
    """Smallest eigenpairs of op with the span of ``basis`` shifted far up."""
    dim = op.dim
    shift = 2.0 * op.norm_bound() + 1.0

    def matvec(x):
        y = op.matvec(x)
        if basis.shape[1]:
            y = y + shift * (basis @ (basis.conj().T @ x))
        return y

    lin = spla.LinearOperator((dim, dim), matvec=matvec, dtype=np.complex128)
    v0 = _seeded_vector(dim, seed, tag=tag)
    if basis.shape[1]:
        v0 = v0 - basis @ (basis.conj().T @ v0)
        v0 /= np.linalg.norm(v0)
    k = min(k, dim - 2)
    vals, vecs = spla.eigsh(
        lin, k=k, which="SA", v0=v0, ncv=min(dim, max(4 * k, 40)), maxiter=100 * dim, tol=1e-12
    )
    order = np.argsort(vals)
    return vals[order], vecs[:, order]


def _krylov_kernel_and_gap(op: SparseHermitianOperator, threshold: float, seed: int):
    """Kernel block first (shift-invert), then certified deflation probes.

    ARPACK can drop members of a highly degenerate kernel, so after the bulk
    pass the kernel is confirmed by deflated probe solves: a probe either
    contributes genuinely new kernel vectors (residual-checked on the
    original operator) or certifies the gap.  Two consecutive clean probes
    are required before the gap is accepted.
    """
    dim = op.dim
    if dim < KRYLOV_MIN_DIM:
        raise PreconditionError(f"Krylov path needs dimension >= {KRYLOV_MIN_DIM}, got {dim}")
    scale = op.norm_bound()
    try:
        ground, basis = _bulk_kernel_shift_invert(op, threshold, seed)
    except (MemoryError, RuntimeError):
        ground, basis = None, np.zeros((dim, 0), dtype=np.complex128)

    gap_val = None
    gap_vec = None
    clean_rounds = 0
    for round_index in range(64):
        vals, vecs = _deflated_solve(op, basis, 8, seed, tag=20 + round_index)
        if ground is None:
            ground = float(vals[0])
        accepted = 0
        for j, lam in enumerate(vals):
            if lam > threshold:
                continue
            w = vecs[:, j]
            if basis.shape[1]:
                w = w - basis @ (basis.conj().T @ w)
            nw = np.linalg.norm(w)
            if nw < 1e-6:
                continue  # duplicate of an already-deflated direction
            w = w / nw
            if np.linalg.norm(op.matvec(w)) > RESIDUAL_TOL * max(scale, 1.0):
                continue  # Ritz leak, not a kernel vector
            if basis.shape[1] + 1 > _KRYLOV_MAX_KERNEL:
                raise ConvergenceError(
                    f"kernel dimension exceeds {_KRYLOV_MAX_KERNEL}; refusing to chase the gap"
                )
            basis = _orthonormalize(np.hstack([basis, w[:, None]]))
            accepted += 1
        if accepted:
            clean_rounds = 0
            continue
        above = vals[vals > threshold]
        if above.size == 0:
            raise ConvergenceError("deflated probe produced only uncertifiable near-zero values")
        clean_rounds += 1
        if clean_rounds >= 2:
            gap_val = float(above[0])
            gap_vec = vecs[:, int(np.argmax(vals > threshold))]
            break
    if gap_val is None:
        raise ConvergenceError("deflation probes did not settle on a gap")
    kernel_residual = float(np.linalg.norm(op.matrix @ basis)) if basis.shape[1] else 0.0
    gap_residual = float(np.linalg.norm(op.matvec(gap_vec) - gap_val * gap_vec))
    if kernel_residual > RESIDUAL_TOL * max(scale, 1.0) * max(basis.shape[1], 1):
        raise ConvergenceError(f"kernel residual {kernel_residual:.2e} exceeds certificate")
    if gap_residual > RESIDUAL_TOL * max(scale, 1.0):
        raise ConvergenceError(f"gap residual {gap_residual:.2e} exceeds certificate")
    return ground, basis, gap_val, gap_vec, [kernel_residual, gap_residual]


# -- public operations ----------------------------------------------------------


def spectrum(
    op: SparseHermitianOperator,
    method: str = "auto",
    zero_threshold: float | None = None,
    seed: int = 0,
) -> SpectralReport:
    """Ground energy, kernel dimension, and first eigenvalue above the kernel.

    Raises :class:`GapUndefinedError` for the zero operator and
    :class:`NotPositiveSemidefiniteError` when the smallest Ritz value is
    negative beyond tolerance.
    """
    threshold = _zero_threshold(op, zero_threshold)
    scale = op.norm_bound()
    if scale == 0.0:
        raise GapUndefinedError("zero operator has no nonzero eigenvalue; gap undefined")
    method = _pick_method(op, method)
    if method == "dense":
        if op.dim > DENSE_LIMIT:
            raise PreconditionError(f"dense path capped at dimension {DENSE_LIMIT}, got {op.dim}")
        evals = np.linalg.eigvalsh(_dense_array(op))
        if evals[0] < -PSD_TOL * max(scale, 1.0):
            raise NotPositiveSemidefiniteError(f"smallest eigenvalue {evals[0]:.3e} is negative")
        kernel_dim = int(np.count_nonzero(evals <= threshold))
        above = evals[evals > threshold]
        if above.size == 0:
            raise GapUndefinedError("no eigenvalue above the zero threshold; gap undefined")
        return SpectralReport(
            ground_energy=float(evals[0]),
            kernel_dim=kernel_dim,
            gap=float(above[0]),
            zero_threshold=threshold,
            method="dense",
            residuals=[],
            dimension=op.dim,
            eigenvalues=evals,
        )
    ground, basis, gap, _, residuals = _krylov_kernel_and_gap(op, threshold, seed)
    if ground < -PSD_TOL * max(scale, 1.0):
        raise NotPositiveSemidefiniteError(f"smallest Ritz value {ground:.3e} is negative")
    return SpectralReport(
        ground_energy=ground,
        kernel_dim=basis.shape[1],
        gap=gap,
        zero_threshold=threshold,
        method="krylov",
        residuals=residuals,
        dimension=op.dim,
    )


def kernel_projector(
    op: SparseHermitianOperator,
    method: str = "auto",
    zero_threshold: float | None = None,
    seed: int = 0,
) -> KernelProjector:
    """Orthonormal basis of all eigenvectors at or below the zero threshold."""
    threshold = _zero_threshold(op, zero_threshold)
    scale = op.norm_bound()
    if scale == 0.0:
        return KernelProjector(np.eye(op.dim, dtype=np.complex128), threshold)
    method = _pick_method(op, method)
    if method == "dense":
        if op.dim > DENSE_LIMIT:
            raise PreconditionError(f"dense path capped at dimension {DENSE_LIMIT}, got {op.dim}")
        evals, evecs = np.linalg.eigh(_dense_array(op))
        if evals[0] < -PSD_TOL * max(scale, 1.0):
            raise NotPositiveSemidefiniteError(f"smallest eigenvalue {evals[0]:.3e} is negative")
        below = evals <= threshold
        nonzero = evals[~below]
        if nonzero.size and nonzero[0] < 10.0 * threshold:
            raise IllSeparatedKernelError(
                f"smallest nonzero eigenvalue {nonzero[0]:.3e} is within 10x of threshold {threshold:.3e}"
            )
        basis = np.ascontiguousarray(evecs[:, below]).astype(np.complex128)
        return KernelProjector(basis, threshold)
    ground, basis, gap, _, _ = _krylov_kernel_and_gap(op, threshold, seed)
    if ground < -PSD_TOL * max(scale, 1.0):
        raise NotPositiveSemidefiniteError(f"smallest Ritz value {ground:.3e} is negative")
    if gap < 10.0 * threshold:
        raise IllSeparatedKernelError(
            f"smallest nonzero eigenvalue {gap:.3e} is within 10x of threshold {threshold:.3e}"
        )
    return KernelProjector(basis.astype(np.complex128), threshold)


def frustration_residuals(lattice, kernel: KernelProjector) -> list[float]:
    """Per-term norms of (embedded term) applied to the kernel basis.

    Frustration-freeness means every residual is numerically zero.
    """
    out = []
    for term in lattice.terms:
        emb = embed_local_term(term, lattice)
        out.append(float(np.linalg.norm(emb.matrix @ kernel.basis)))
    return out


@dataclass
class DominanceReport:
    """Result of a PSD check of A - B."""

    holds: bool
    min_eigenvalue: float
    tol: float
    scale: float
    witness: np.ndarray | None = None

    def to_dict(self) -> dict:
        out = {
            "holds": bool(self.holds),
            "min_eigenvalue": float(self.min_eigenvalue),
            "tol": float(self.tol),
            "scale": float(self.scale),
        }
        if self.witness is not None:
            out["witness_hash"] = vector_hash(self.witness)
        return out


def _dense_from_ops(ops, dim: int) -> np.ndarray:
    """Materialize a composed operator by applying it to identity columns."""
    out = np.eye(dim, dtype=np.complex128)
    for op in reversed(list(ops)):
        out = _op_matmat(op, out)
    return out


def _op_matmat(op, block: np.ndarray) -> np.ndarray:
    if isinstance(op, SparseHermitianOperator):
        return op.matrix @ block
    out = np.empty_like(block)
    for j in range(block.shape[1]):
        out[:, j] = op.matvec(block[:, j])
    return out


def operator_dominates(a, b, tol: float = 1e-9, method: str = "auto", seed: int = 0) -> DominanceReport:
    """Check A >= B in the PSD order; returns the minimizing Ritz pair if not.

    ``a`` and ``b`` may be sparse operators or anything with dim/matvec;
    dense verification below ``DENSE_CUTOFF``, Krylov above.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"dimension mismatch {a.dim} != {b.dim}")
    dim = a.dim
    scale = max(a.norm_bound(), b.norm_bound(), 1.0)
    both_sparse = isinstance(a, SparseHermitianOperator) and isinstance(b, SparseHermitianOperator)
    use_dense = method == "dense" or (method == "auto" and dim <= 2 * DENSE_CUTOFF)
    if use_dense:
        if both_sparse:
            diff = (a.matrix - b.matrix).toarray()
        else:
            diff = _dense_from_ops([a], dim) - _dense_from_ops([b], dim)
        if np.all(diff.imag == 0.0):
            diff = diff.real
        evals, evecs = np.linalg.eigh(diff)
        min_eig = float(evals[0])
        holds = min_eig >= -tol * scale
        witness = None if holds else evecs[:, 0].astype(np.complex128)
        return DominanceReport(holds, min_eig, tol, scale, witness)

    # Krylov: largest eigenvalue of (U - (A - B)) is well-separated and PSD.
    upper = scale * 2.0

    def matvec(x):
        return upper * x - (a.matvec(x) - b.matvec(x))

    lin = spla.LinearOperator((dim, dim), matvec=matvec, dtype=np.complex128)
    vals, vecs = spla.eigsh(
        lin, k=1, which="LA", v0=_seeded_vector(dim, seed, tag=3), ncv=min(dim, 60),
        maxiter=100 * dim, tol=1e-12,
    )
    lam, vec = float(vals[0]), vecs[:, 0]
    residual = float(np.linalg.norm(matvec(vec) - lam * vec))
    if residual > RESIDUAL_TOL * max(upper, 1.0):
        raise ConvergenceError(f"dominance solve residual {residual:.2e} exceeds certificate")
    min_eig = upper - lam
    holds = min_eig >= -tol * scale
    return DominanceReport(holds, min_eig, tol, scale, None if holds else vec)


def restricted_top_norm(
    ops,
    kernel: KernelProjector,
    method: str = "auto",
    seed: int = 0,
    return_vector: bool = False,
):
    """Maximum of ||(ops[0] ... ops[-1]) psi||^2 over unit psi in the kernel complement.

    All factors must be Hermitian (true for the projector products used here),
    so the adjoint product is the reversed list.  The Krylov path certifies
    its residual at 1e-8; the dense path is exact.
    """
    ops = list(ops)
    dim = kernel.dim
    for op in ops:
        if op.dim != dim:
            raise DimensionMismatchError("factor dimension does not match subspace dimension")
        if not getattr(op, "hermitian", False):
            raise PreconditionError("restricted_top_norm expects Hermitian factors")
    comp_dim = dim - kernel.kernel_dim
    if comp_dim == 0:
        return (0.0, None) if return_vector else 0.0
    if not ops:
        return (1.0, None) if return_vector else 1.0

    use_dense = method == "dense" or (method == "auto" and dim <= 2 * DENSE_CUTOFF)
    if use_dense:
        comp = kernel.complement_basis()
        block = comp
        for op in reversed(ops):
            block = _op_matmat(op, block)
        gram = block.conj().T @ block
        evals, evecs = np.linalg.eigh(gram)
        value = float(max(evals[-1], 0.0))
        vec = comp @ evecs[:, -1]
        return (value, vec) if return_vector else value

    def matvec(x):
        y = kernel.project_complement(x)
        y = apply_product(ops, y)
        for op in ops:  # adjoint: Hermitian factors in reverse
            y = op.matvec(y)
        return kernel.project_complement(y)

    lin = spla.LinearOperator((dim, dim), matvec=matvec, dtype=np.complex128)
    v0 = kernel.project_complement(_seeded_vector(dim, seed, tag=4))
    v0 /= np.linalg.norm(v0)
    vals, vecs = spla.eigsh(lin, k=1, which="LA", v0=v0, ncv=min(dim, 60), maxiter=100 * dim, tol=1e-12)
    lam, vec = float(vals[0]), vecs[:, 0]
    residual = float(np.linalg.norm(matvec(vec) - lam * vec))
    bound = 1.0
    for op in ops:
        bound *= op.norm_bound() ** 2
    if residual > RESIDUAL_TOL * max(bound, 1.0):
        raise ConvergenceError(f"restricted norm residual {residual:.2e} exceeds certificate")
    value = float(max(lam, 0.0))
    return (value, vec) if return_vector else value
