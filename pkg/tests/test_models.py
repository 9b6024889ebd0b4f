import numpy as np
import pytest

from gaplab import models
from gaplab.errors import PreconditionError, SchemaError
from gaplab.operators import assemble
from gaplab.spectral import frustration_residuals, kernel_projector, spectrum


def dense_gap(lattice):
    return spectrum(assemble(lattice), method="dense").gap


def test_two_qubit_chain_is_one_projector_with_gap_one():
    lattice = models.heisenberg_chain(2)
    assert len(lattice.terms) == 1
    rep = spectrum(assemble(lattice), method="dense")
    assert rep.gap == pytest.approx(1.0, abs=1e-12)
    assert sorted(np.round(rep.eigenvalues, 12)) == [0.0, 0.0, 0.0, 1.0]


def test_three_qubit_gap_is_half():
    assert dense_gap(models.heisenberg_chain(3)) == pytest.approx(0.5, abs=1e-12)


def test_magnon_oracle_values():
    assert models.magnon_gap_oracle(2) == pytest.approx(1.0, abs=1e-12)
    assert models.magnon_gap_oracle(3) == pytest.approx(0.5, abs=1e-12)
    assert models.magnon_gap_oracle(4) == pytest.approx(1 - np.cos(np.pi / 4), abs=1e-12)


def test_magnon_oracle_matches_dense_diagonalization():
    for n in range(2, 9):
        assert dense_gap(models.heisenberg_chain(n)) == pytest.approx(
            models.magnon_gap_oracle(n), abs=1e-9
        )


def test_magnon_oracle_large_n_asymptotics():
    exact = models.magnon_gap_oracle(100)
    asymptotic = np.pi**2 / (2 * 100**2)
    assert abs(exact - asymptotic) / asymptotic < 0.01


def test_open_chain_kernel_dimension_is_n_plus_one():
    for n in (2, 4, 6):
        rep = spectrum(assemble(models.heisenberg_chain(n)), method="dense")
        assert rep.kernel_dim == n + 1


def test_decoupled_lattice_single_copy_equals_chain():
    single = models.decoupled_ferro_lattice((5, 1))
    chain = models.heisenberg_chain(5)
    assert np.abs(assemble(single).to_dense() - assemble(chain).to_dense()).max() == 0.0


def test_decoupled_lattice_gap_is_single_chain_gap():
    lattice = models.decoupled_ferro_lattice((4, 2))
    assert dense_gap(lattice) == pytest.approx(models.magnon_gap_oracle(4), abs=1e-9)


def test_decoupled_lattice_gap_invariant_under_transverse_permutation():
    a = models.decoupled_ferro_lattice((3, 2, 2))
    from gaplab.bounds import permute_axes

    b = permute_axes(a, (1, 3, 2))
    assert dense_gap(a) == pytest.approx(dense_gap(b), abs=1e-9)


def test_mixed_chain_pure_ferromagnet_at_k_equals_n():
    mixed = models.mixed_chain(5, 5)
    chain = models.heisenberg_chain(5)
    assert np.abs(assemble(mixed).to_dense() - assemble(chain).to_dense()).max() == 0.0


def test_mixed_chain_gap_is_prefix_ferromagnet_gap():
    lattice = models.mixed_chain(8, 4)
    assert dense_gap(lattice) == pytest.approx(1 - np.cos(np.pi / 4), abs=1e-9)


def test_mixed_chain_leaves_k_to_k_plus_one_uncoupled():
    lattice = models.mixed_chain(6, 3)
    supports = [t.support for t in lattice.terms]
    assert ((3,), (4,)) not in supports
    assert ((3,),) not in supports  # pinning starts at k+1
    assert ((4,),) in supports


def test_mixed_chain_parameter_validation():
    with pytest.raises(PreconditionError):
        models.mixed_chain(5, 0)
    with pytest.raises(PreconditionError):
        models.mixed_chain(5, 6)


def test_random_ff_annihilates_its_product_state():
    for seed in (0, 1, 2):
        lattice = models.random_frustration_free((6,), seed=seed)
        omega = models.product_state(lattice, seed)
        h = assemble(lattice)
        assert abs(np.vdot(omega, h.matvec(omega))) <= 1e-12


def test_random_ff_ground_energy_zero_and_kernel_nonempty():
    lattice = models.random_frustration_free((3, 3), seed=5)
    rep = spectrum(assemble(lattice), method="dense")
    assert rep.ground_energy >= -rep.zero_threshold
    assert rep.ground_energy <= 1e-11
    assert rep.kernel_dim >= 1


def test_random_ff_same_seed_is_bitwise_identical():
    a = models.random_frustration_free((5,), seed=42)
    b = models.random_frustration_free((5,), seed=42)
    assert len(a.terms) == len(b.terms)
    for ta, tb in zip(a.terms, b.terms):
        assert ta.support == tb.support
        assert np.array_equal(ta.matrix, tb.matrix)
    c = models.random_frustration_free((5,), seed=43)
    assert any(not np.array_equal(ta.matrix, tc.matrix) for ta, tc in zip(a.terms, c.terms))


def test_random_ff_requires_seed_and_feasible_rank():
    with pytest.raises(PreconditionError):
        models.random_frustration_free((4,))
    with pytest.raises(PreconditionError):
        models.random_frustration_free((4,), excluded_rank=4, seed=0)


def test_bundled_models_are_frustration_free():
    cases = [
        models.heisenberg_chain(6),
        models.heisenberg_chain(6, "periodic"),
        models.mixed_chain(7, 3),
        models.decoupled_ferro_lattice((4, 2)),
        models.random_frustration_free((7,), seed=3),
        models.random_frustration_free((3, 3), seed=3),
    ]
    for lattice in cases:
        h = assemble(lattice)
        rep = spectrum(h, method="dense")
        assert rep.ground_energy <= 1e-11
        kern = kernel_projector(h, method="dense")
        assert max(frustration_residuals(lattice, kern)) <= 1e-9


def test_model_registry_round_trip():
    spec = models.ModelSpec("heisenberg_chain", {"n": 4})
    lattice = spec.build()
    assert lattice.n_sites == 4
    with pytest.raises(SchemaError):
        models.build_model({"kind": "unknown_kind"})
    with pytest.raises(SchemaError):
        models.build_model({"kind": "heisenberg_chain", "params": {"n": 4, "bogus": 1}})
