import numpy as np
import pytest

from gaplab import models
from gaplab.detectability import (
    PAIR_BOUND_NU_MAX,
    build_dl,
    jordan_decompose,
    verify_converse,
    verify_detectability,
    verify_pair_overlap_bound,
)
from gaplab.errors import PreconditionError
from gaplab.layering import greedy_layers
from gaplab.operators import LatticeHamiltonian, LocalTerm, apply_product, assemble
from gaplab.spectral import kernel_projector


def random_projector(dim, rank, rng):
    m = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    q, _ = np.linalg.qr(m)
    return q @ q.conj().T


def dl_dense(lattice):
    dl = build_dl(lattice)
    out = np.eye(lattice.dim, dtype=complex)
    for op in reversed(dl.factors):
        out = (op.matrix @ out) if hasattr(op, "matrix") else op.to_dense() @ out
    return out


def test_dl_structure_on_four_site_chain():
    lattice = models.heisenberg_chain(4)
    dl = build_dl(lattice)
    # two layers: (1,2),(3,4) then (2,3)
    assert dl.assignment.num_layers == 2
    assert dl.factor_layers == [0, 0, 1]


def test_zero_term_model_dl_is_identity():
    lattice = LatticeHamiltonian.uniform((3,), 2)
    dl = build_dl(lattice)
    v = np.arange(8, dtype=complex)
    assert np.array_equal(dl.matvec(v), v)


def test_within_layer_order_is_irrelevant():
    lattice = models.heisenberg_chain(6)
    dl = build_dl(lattice)
    first_layer = [f for f, l in zip(dl.factors, dl.factor_layers) if l == 0]
    rest = [f for f, l in zip(dl.factors, dl.factor_layers) if l == 1]
    rng = np.random.default_rng(3)
    v = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    a = apply_product(first_layer + rest, v)
    b = apply_product(first_layer[::-1] + rest, v)
    assert np.linalg.norm(a - b) <= 1e-12 * np.linalg.norm(v)


def test_dl_fixes_kernel_exactly():
    for lattice in (models.heisenberg_chain(6), models.mixed_chain(7, 3)):
        kern = kernel_projector(assemble(lattice), method="dense")
        dl = build_dl(lattice)
        for col in kern.basis.T:
            assert np.linalg.norm(dl.matvec(col) - col) <= 1e-12


def test_dl_gram_eigenvalues_in_unit_interval():
    lattice = models.heisenberg_chain(6)
    d = dl_dense(lattice)
    evals = np.linalg.eigvalsh(d.conj().T @ d)
    assert evals[0] >= -1e-12
    assert evals[-1] <= 1.0 + 1e-12


def test_detectability_bound_on_models():
    for lattice in (
        models.heisenberg_chain(8),
        models.mixed_chain(8, 4),
        models.random_frustration_free((8,), seed=5),
        models.random_frustration_free((3, 3), seed=5),
    ):
        rep = verify_detectability(lattice, method="dense")
        assert rep["passed"], rep
        assert rep["lhs"] <= rep["rhs"] + 1e-9


def test_detectability_commuting_model_annihilates_excited_space():
    # all terms diagonal: g = 0, the product projects exactly onto the kernel
    lattice = LatticeHamiltonian.uniform((4,), 2)
    for i in range(1, 4):
        d = np.diag([0.0, 0.0, 0.0, 1.0]).astype(complex)
        lattice.add_term(LocalTerm(((i,), (i + 1,)), d, is_projector=True))
    rep = verify_detectability(lattice, method="dense")
    assert rep["max_noncommuting"] == 0
    assert rep["rhs"] == 0.0
    assert rep["lhs"] <= 1e-9
    assert rep["passed"]


def test_converse_constants_and_l2_sharpening():
    lattice = models.heisenberg_chain(8)
    rep3 = verify_converse(lattice, constant=3, method="dense")
    rep4 = verify_converse(lattice, constant=4, method="dense")
    assert rep3["passed"] and rep4["passed"]
    # identity saturation: H = 0 model gives DL = 1 and 1 >= 1
    empty = LatticeHamiltonian.uniform((2,), 2)
    rep = verify_converse(empty, constant=4, method="dense")
    assert rep["passed"]


def test_converse_constant_three_requires_two_layers():
    lattice = models.random_frustration_free((3, 3), seed=2)
    assert greedy_layers(lattice).num_layers > 2
    with pytest.raises(PreconditionError):
        verify_converse(lattice, constant=3)
    assert verify_converse(lattice, constant=4, method="dense")["passed"]


def test_converse_sharpened_is_tighter_for_two_layers():
    # min-eig(G - 1 + cH) grows with c, so c=3 passing is the stronger fact;
    # both inequalities must hold simultaneously per the two-layer sharpening.
    lattice = models.mixed_chain(6, 4)
    rep3 = verify_converse(lattice, constant=3, method="dense")
    rep4 = verify_converse(lattice, constant=4, method="dense")
    assert rep3["passed"] and rep4["passed"]
    assert rep3["min_eigenvalue"] <= rep4["min_eigenvalue"] + 1e-12


def test_jordan_equal_projectors():
    rng = np.random.default_rng(0)
    p = random_projector(12, 4, rng)
    dec = jordan_decompose(p, p)
    assert all(b.block_dim == 1 for b in dec.blocks)
    paired = [b for b in dec.blocks if b.v1 is not None and b.v2 is not None]
    assert len(paired) == 4
    assert all(abs(b.overlap - 1.0) <= 1e-10 for b in paired)


def test_jordan_orthogonal_ranges():
    p1 = np.diag([1.0, 0.0, 0.0, 0.0]).astype(complex)
    p2 = np.diag([0.0, 1.0, 0.0, 0.0]).astype(complex)
    dec = jordan_decompose(p1, p2)
    assert all(b.overlap == 0.0 for b in dec.blocks)
    assert max(dec.residuals.values()) <= 1e-12


def test_jordan_identities_random_pairs_dim_64():
    rng = np.random.default_rng(11)
    for _ in range(10):
        dim = 64
        p1 = random_projector(dim, int(rng.integers(1, dim)), rng)
        p2 = random_projector(dim, int(rng.integers(1, dim)), rng)
        dec = jordan_decompose(p1, p2)
        assert max(dec.residuals.values()) <= 1e-9
        for b in dec.blocks:
            assert b.block_dim <= 2


def test_jordan_swap_preserves_overlaps():
    rng = np.random.default_rng(13)
    p1 = random_projector(20, 7, rng)
    p2 = random_projector(20, 9, rng)
    a = sorted(jordan_decompose(p1, p2).overlaps())
    b = sorted(jordan_decompose(p2, p1).overlaps())
    assert np.allclose(a, b, atol=1e-10)


def test_jordan_blocks_reduce_each_projector_to_rank_le_one():
    rng = np.random.default_rng(17)
    p1 = random_projector(16, 5, rng)
    p2 = random_projector(16, 6, rng)
    for b in jordan_decompose(p1, p2).blocks:
        for p in (p1, p2):
            compressed = b.projector() @ p @ b.projector()
            assert np.linalg.matrix_rank(compressed, tol=1e-8) <= 1


def test_pair_overlap_bound_regime():
    rep = verify_pair_overlap_bound(2000, 1.0 / 3.0, seed=1)
    assert rep["passed"] and rep["violations"] == 0
    assert rep["boundary_determinant_factor"] == pytest.approx(1.0 / 9.0, abs=1e-12)
    assert rep["determinant_formula_mismatch"] <= 1e-12


def test_pair_overlap_bound_edge_samples():
    # a = 0: determinant reduces to |b|^2 (1-nu)^2 >= 0
    rep = verify_pair_overlap_bound(10, 0.2, seed=2)
    assert rep["passed"]
    # boundary nu: still in regime
    rep = verify_pair_overlap_bound(500, PAIR_BOUND_NU_MAX, seed=3)
    assert rep["in_regime"] and rep["passed"]


def test_pair_overlap_bound_fails_past_threshold():
    rep = verify_pair_overlap_bound(2000, 0.40, seed=4)
    assert not rep["in_regime"]
    assert rep["passed"] is None
    assert rep["violations"] > 0
    assert rep["boundary_determinant_factor"] < 0
