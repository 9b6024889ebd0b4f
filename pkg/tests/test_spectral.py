import numpy as np
import pytest
import scipy.sparse as sp

from gaplab import models
from gaplab.errors import (
    GapUndefinedError,
    IllSeparatedKernelError,
    NotPositiveSemidefiniteError,
)
from gaplab.operators import SparseHermitianOperator, assemble, embed_local_term
from gaplab.spectral import (
    kernel_projector,
    operator_dominates,
    restricted_top_norm,
    spectrum,
)


def heisenberg_op(n, boundary="open"):
    return assemble(models.heisenberg_chain(n, boundary))


def test_single_projector_spectrum():
    lattice = models.heisenberg_chain(2)
    rep = spectrum(assemble(lattice), method="dense")
    assert rep.gap == pytest.approx(1.0, abs=1e-12)
    assert rep.kernel_dim == 3
    assert rep.ground_energy == pytest.approx(0.0, abs=1e-12)


def test_zero_operator_gap_is_an_error():
    op = SparseHermitianOperator(sp.csr_matrix((8, 8), dtype=complex))
    with pytest.raises(GapUndefinedError):
        spectrum(op, method="dense")


def test_zero_operator_kernel_is_everything():
    op = SparseHermitianOperator(sp.csr_matrix((8, 8), dtype=complex))
    kern = kernel_projector(op, method="dense")
    assert kern.kernel_dim == 8


def test_non_psd_input_rejected():
    op = SparseHermitianOperator(sp.csr_matrix(np.diag([-1.0, 0.0, 1.0]).astype(complex)))
    with pytest.raises(NotPositiveSemidefiniteError):
        spectrum(op, method="dense")


def test_dense_and_krylov_agree_on_gap():
    for n in (7, 8):
        op = heisenberg_op(n)
        dense = spectrum(op, method="dense")
        krylov = spectrum(op, method="krylov", seed=1)
        assert krylov.gap == pytest.approx(dense.gap, rel=1e-7)
        assert krylov.kernel_dim == dense.kernel_dim
        assert all(r <= 1e-8 * op.norm_bound() for r in krylov.residuals)


def test_krylov_chain_14_matches_magnon_oracle():
    op = heisenberg_op(14)
    rep = spectrum(op, method="krylov", seed=0)
    assert rep.gap == pytest.approx(models.magnon_gap_oracle(14), abs=1e-7)
    assert rep.kernel_dim == 15


def test_kernel_dim_stable_under_threshold_perturbation():
    for lattice in (models.heisenberg_chain(6), models.mixed_chain(7, 3)):
        op = assemble(lattice)
        base = spectrum(op, method="dense")
        for factor in (0.1, 10.0):
            rep = spectrum(op, method="dense", zero_threshold=base.zero_threshold * factor)
            assert rep.kernel_dim == base.kernel_dim


def test_kernel_projector_heisenberg_triplet():
    kern = kernel_projector(heisenberg_op(2), method="dense")
    assert kern.kernel_dim == 3
    h = heisenberg_op(2)
    assert np.linalg.norm(h.matrix @ kern.basis) <= 1e-10


def test_kernel_projector_krylov_matches_dense_subspace():
    op = heisenberg_op(8)
    dense = kernel_projector(op, method="dense")
    krylov = kernel_projector(op, method="krylov", seed=2)
    assert dense.kernel_dim == krylov.kernel_dim
    overlap = dense.basis.conj().T @ krylov.basis
    sines = np.linalg.norm(krylov.basis - dense.basis @ overlap, 2)
    assert sines <= 1e-7


def test_ill_separated_kernel_diagnostic():
    op = SparseHermitianOperator(sp.csr_matrix(np.diag([0.0, 5e-10, 1.0]).astype(complex)))
    with pytest.raises(IllSeparatedKernelError):
        kernel_projector(op, method="dense", zero_threshold=1e-10)


def test_operator_dominates_reflexive_and_witness():
    op = heisenberg_op(4)
    assert operator_dominates(op, op).holds
    zero = SparseHermitianOperator(sp.csr_matrix((16, 16), dtype=complex))
    proj = embed_local_term(models.heisenberg_chain(4).terms[0], models.heisenberg_chain(4))
    rep = operator_dominates(zero, proj)
    assert not rep.holds
    assert rep.witness is not None
    # witness lies in the range of the projector
    w = rep.witness
    assert np.linalg.norm(proj.matrix @ w - w) <= 1e-8


def test_mutual_dominance_implies_equality():
    op = heisenberg_op(4)
    shifted = SparseHermitianOperator(op.matrix + 1e-12 * sp.identity(16, dtype=complex))
    tol = 1e-9
    a = operator_dominates(op, shifted, tol=tol)
    b = operator_dominates(shifted, op, tol=tol)
    assert a.holds and b.holds
    diff = np.abs((op.matrix - shifted.matrix).toarray())
    assert diff.max() <= 2 * tol * max(op.norm_bound(), shifted.norm_bound())


def test_dominance_krylov_agrees_with_dense():
    op = heisenberg_op(8)
    scaled = SparseHermitianOperator(2.0 * op.matrix)
    dense = operator_dominates(scaled, op, method="dense")
    krylov = operator_dominates(scaled, op, method="krylov", seed=3)
    assert dense.holds and krylov.holds
    assert krylov.min_eigenvalue == pytest.approx(dense.min_eigenvalue, abs=1e-7)


def test_restricted_top_norm_empty_product_is_one():
    kern = kernel_projector(heisenberg_op(3), method="dense")
    assert restricted_top_norm([], kern) == 1.0


def test_restricted_top_norm_single_projector_on_its_range():
    lattice = models.heisenberg_chain(2)
    h = assemble(lattice)
    kern = kernel_projector(h, method="dense")  # complement = range of the projector
    proj = embed_local_term(lattice.terms[0], lattice)
    assert restricted_top_norm([proj], kern, method="dense") == pytest.approx(1.0, abs=1e-12)


def test_restricted_top_norm_annihilating_product_is_zero():
    lattice = models.heisenberg_chain(2)
    h = assemble(lattice)
    kern = kernel_projector(h, method="dense")
    one_minus = SparseHermitianOperator(sp.identity(4, format="csr", dtype=complex) - h.matrix)
    assert restricted_top_norm([one_minus], kern, method="dense") == pytest.approx(0.0, abs=1e-12)


def test_restricted_top_norm_dense_vs_krylov():
    from gaplab.detectability import build_dl

    lattice = models.heisenberg_chain(8)
    h = assemble(lattice)
    kern = kernel_projector(h, method="dense")
    dl = build_dl(lattice)
    dense = restricted_top_norm(dl.factors, kern, method="dense")
    krylov = restricted_top_norm(dl.factors, kern, method="krylov", seed=4)
    assert krylov == pytest.approx(dense, abs=1e-7)


def test_spectral_report_serializes():
    rep = spectrum(heisenberg_op(3), method="dense")
    d = rep.to_dict()
    assert d["method"] == "dense"
    assert isinstance(d["gap"], float)
    assert len(d["eigenvalues"]) == 8
