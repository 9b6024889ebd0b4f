"""Local gaps over windows and hyper-rectangles, threshold-bound verifiers,
and the classic comparison inequalities for translation-invariant chains."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .coarsegrain import gap_link_check, lightcone_lower_check, segment_layout
from .chebyshev import StepPolyParams, verify_step_claim
from .errors import GapUndefinedError, LayoutError, PreconditionError
from .layering import greedy_layers
from .operators import LatticeHamiltonian, LocalTerm, assemble, embed_dense, restrict_sites
from .spectral import spectrum


@dataclass
class BoundReport:
    """One evaluated inequality: lhs <= rhs + tol, with its regime flags."""

    name: str
    lhs: float
    rhs: float
    regime_flags: dict
    holds: bool | None
    margin: float
    instance: str
    tol: float = 1e-9
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": None if self.lhs is None else float(self.lhs),
            "rhs": None if self.rhs is None else float(self.rhs),
            "regime_flags": {k: (bool(v) if v is not None else None) for k, v in self.regime_flags.items()},
            "holds": None if self.holds is None else bool(self.holds),
            "margin": None if self.margin is None else float(self.margin),
            "instance": self.instance,
            "tol": float(self.tol),
            "details": self.details,
        }


def _window_positions_1d(lattice: LatticeHamiltonian, t: int) -> list[list[int]]:
    """Site-position windows of width t; wrapping windows on a periodic chain."""
    n = lattice.n_sites
    if not 1 <= t <= n:
        raise PreconditionError(f"window length t={t} must lie in [1, n={n}]")
    periodic = lattice.boundary[0] == "periodic"
    starts = range(n) if periodic and t < n else range(n - t + 1)
    return [[(a + off) % n for off in range(t)] for a in starts]


def window_gaps_1d(lattice: LatticeHamiltonian, t: int, method: str = "auto", seed: int = 0):
    """Per-window spectral gaps; windows whose Hamiltonian is zero are skipped."""
    if lattice.n_axes != 1:
        raise PreconditionError("window gaps run on chains; columnize higher lattices first")
    gaps = []
    skipped = 0
    for positions in _window_positions_1d(lattice, t):
        sub, kept = restrict_sites(lattice, positions)
        if not kept:
            skipped += 1
            continue
        h = assemble(sub)
        try:
            gaps.append(spectrum(h, method=method, seed=seed).gap)
        except GapUndefinedError:
            skipped += 1
    if skipped:
        warnings.warn(f"{skipped} window(s) carried no terms; skipped in the local-gap minimum")
    return gaps


def local_gap_1d(lattice: LatticeHamiltonian, t: int, method: str = "auto", seed: int = 0) -> float:
    """Minimum spectral gap over all length-t windows of the chain."""
    gaps = window_gaps_1d(lattice, t, method=method, seed=seed)
    if not gaps:
        raise GapUndefinedError(f"no window of length {t} carries any terms")
    return float(min(gaps))


def segment_average_gap(lattice: LatticeHamiltonian, t: int, method: str = "auto", seed: int = 0) -> float:
    """Average of the per-window gaps; the min/average contrast demonstrator."""
    gaps = window_gaps_1d(lattice, t, method=method, seed=seed)
    if not gaps:
        raise GapUndefinedError(f"no window of length {t} carries any terms")
    return float(np.mean(gaps))


def hyperrect_gap(lattice: LatticeHamiltonian, sizes, method: str = "auto", seed: int = 0) -> float:
    """Minimum gap over all axis-aligned hyper-rectangles of the given sizes.

    A term belongs to a rectangle when its support lies entirely inside.
    Rectangles wrap along periodic axes.
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != lattice.n_axes:
        raise PreconditionError(f"need {lattice.n_axes} sizes, got {len(sizes)}")
    for s, n in zip(sizes, lattice.axis_lengths):
        if not 1 <= s <= n:
            raise PreconditionError(f"rectangle size {s} does not fit axis of length {n}")
    starts_per_axis = [
        range(n) if b == "periodic" and s < n else range(n - s + 1)
        for s, n, b in zip(sizes, lattice.axis_lengths, lattice.boundary)
    ]
    best = None
    skipped = 0
    for start in np.ndindex(*[len(s) for s in starts_per_axis]):
        origin = [starts_per_axis[a][i] for a, i in enumerate(start)]
        coords = [
            tuple(origin[a] + off[a] + 1 for a in range(len(sizes)))
            for off in np.ndindex(*sizes)
        ]
        positions = sorted(lattice.site_number(lattice.wrap(c)) for c in coords)
        sub, kept = restrict_sites(lattice, positions)
        if not kept:
            skipped += 1
            continue
        h = assemble(sub)
        try:
            gap = spectrum(h, method=method, seed=seed).gap
        except GapUndefinedError:
            skipped += 1
            continue
        best = gap if best is None else min(best, gap)
    if skipped:
        warnings.warn(f"{skipped} rectangle(s) carried no terms; skipped in the minimum")
    if best is None:
        raise GapUndefinedError("no rectangle of the requested size carries any terms")
    return float(best)


# -- chain views of higher lattices ----------------------------------------------


def permute_axes(lattice: LatticeHamiltonian, order) -> LatticeHamiltonian:
    """Relabel axes so ``order[0]`` becomes axis 1; sites are reordered row-major."""
    order = tuple(int(a) for a in order)
    if sorted(order) != list(range(1, lattice.n_axes + 1)):
        raise PreconditionError(f"order must permute 1..{lattice.n_axes}, got {order}")
    new_lengths = tuple(lattice.axis_lengths[a - 1] for a in order)
    new_boundary = tuple(lattice.boundary[a - 1] for a in order)
    new = LatticeHamiltonian.uniform(new_lengths, 2, new_boundary)
    # site dims must follow the permuted row-major order
    dims = [0] * lattice.n_sites
    for site in range(lattice.n_sites):
        coords = lattice.coords_of(site)
        new_coords = tuple(coords[a - 1] for a in order)
        dims[new.site_number(new_coords)] = lattice.site_dims[site]
    new.site_dims = tuple(dims)
    for term in lattice.terms:
        support = tuple(tuple(site[a - 1] for a in order) for site in term.support)
        new.add_term(LocalTerm(support, term.matrix, term.is_projector))
    return new


def columnize(lattice: LatticeHamiltonian, axis: int = 1) -> LatticeHamiltonian:
    """Reinterpret the lattice as a chain of slab qudits perpendicular to ``axis``.

    Each chain site is the full slab at one coordinate of the chosen axis;
    every term must touch at most two adjacent slabs.  For ``axis=1`` the
    global row-major basis is unchanged, so the assembled operator is
    identical entry for entry.
    """
    if axis != 1:
        order = (axis,) + tuple(a for a in range(1, lattice.n_axes + 1) if a != axis)
        lattice = permute_axes(lattice, order)
    n_chain = lattice.axis_lengths[0]
    slab_sites = lattice.n_sites // n_chain
    slab_dims = []
    for i in range(n_chain):
        dims = lattice.site_dims[i * slab_sites : (i + 1) * slab_sites]
        slab_dims.append(int(np.prod(dims)))
    chain = LatticeHamiltonian((n_chain,), tuple(slab_dims), (lattice.boundary[0],), [])

    for term in lattice.terms:
        slabs = sorted({site[0] for site in term.support})
        if len(slabs) > 2:
            raise PreconditionError(f"term spans slabs {slabs}; columnize needs locality <= 2")
        if len(slabs) == 2:
            lo, hi = slabs
            adjacent = hi == lo + 1 or (
                lattice.boundary[0] == "periodic" and lo == 1 and hi == lattice.axis_lengths[0]
            )
            if not adjacent:
                raise PreconditionError(f"term spans non-adjacent slabs {slabs}")
            if hi != lo + 1:
                lo, hi = hi, lo + lattice.axis_lengths[0]  # wrap pair (n, 1)
            chain_support = ((lo,), ((hi - 1) % lattice.axis_lengths[0] + 1,))
            member_slabs = [lo, (hi - 1) % lattice.axis_lengths[0] + 1]
        else:
            chain_support = ((slabs[0],),)
            member_slabs = [slabs[0]]
        # positions of the original support inside the concatenated slab sites
        slab_positions = []
        dims = []
        for slab in member_slabs:
            for p in range(slab_sites):
                dims.append(lattice.site_dims[(slab - 1) * slab_sites + p])
        offset = {slab: k * slab_sites for k, slab in enumerate(member_slabs)}
        for site in term.support:
            within = lattice.site_number(site) - (site[0] - 1) * slab_sites
            slab_positions.append(offset[site[0]] + within)
        big = embed_dense(term.matrix, slab_positions, tuple(dims))
        chain.add_term(LocalTerm(chain_support, big, term.is_projector))
    return chain


# -- threshold-bound verifiers ----------------------------------------------------


def verify_threshold_1d(
    lattice: LatticeHamiltonian,
    t: int,
    method: str = "auto",
    seed: int = 0,
    tol: float = 1e-9,
    include_chain_checks: bool = False,
) -> BoundReport:
    """Headline 1D bound: local_gap(t) <= 1000 L^2 g^2 / t^2 + 6 gap.

    At desk scale the constant term dominates and the headline margin is
    loose; the substantive certification lives in the coarse-graining link
    and light-cone checks, which can be bundled into the report.
    """
    if lattice.n_axes != 1:
        raise PreconditionError("1D verifier expects a chain; columnize first")
    assignment = greedy_layers(lattice)
    la, g = assignment.num_layers, assignment.max_noncommuting
    n = lattice.n_sites
    gap = spectrum(assemble(lattice), method=method, seed=seed).gap
    local = local_gap_1d(lattice, t, method=method, seed=seed)
    rhs = 1e3 * la**2 * g**2 / t**2 + 6.0 * gap
    flags = {
        "gap_le_g2_over_4": gap <= g**2 / 4.0 if g > 0 else False,
        "t_gt_8L2": t > 8 * la**2,
        "t_lt_n_over_5": t < n / 5.0,
    }
    in_regime = all(flags.values())
    holds = local <= rhs + tol
    details: dict = {"num_layers": la, "max_noncommuting": g, "asserted": in_regime}
    if include_chain_checks:
        layout = segment_layout(n, t, "closed" if lattice.boundary[0] == "periodic" else "open")
        details["gap_link"] = gap_link_check(lattice, layout, method=method, seed=seed)
        details["lightcone"] = lightcone_lower_check(lattice, layout, method=method, seed=seed)
        nu = gap / (g**2 + gap) if g > 0 else None
        if nu is not None and 0 < nu <= 0.25:
            step = verify_step_claim((t / (8.0 * la),), (nu,), x_samples=2048)
            details["step_claim"] = step.to_dict()
    return BoundReport(
        name="local_gap_threshold_1d",
        lhs=local,
        rhs=rhs,
        regime_flags=flags,
        holds=holds,
        margin=rhs - local,
        instance=f"chain n={n}, t={t}",
        tol=tol,
        details=details,
    )


def verify_threshold_lattice(
    lattice: LatticeHamiltonian,
    sizes,
    method: str = "auto",
    seed: int = 0,
    tol: float = 1e-9,
) -> BoundReport:
    """D-dimensional bound via the column-qudit recursion.

    Checks ``hyperrect_gap(sizes) <= 6^D gap + 200 L^2 g^2 6^D / min(sizes)^2``
    and replays the per-axis recursion ledger with its condition flags.
    """
    sizes = tuple(int(s) for s in sizes)
    d = lattice.n_axes
    if len(sizes) != d:
        raise PreconditionError(f"need {d} sizes for a {d}-axis lattice")
    assignment = greedy_layers(lattice)
    la, g = assignment.num_layers, assignment.max_noncommuting
    gap = spectrum(assemble(lattice), method=method, seed=seed).gap
    lhs = hyperrect_gap(lattice, sizes, method=method, seed=seed)
    rhs = 6.0**d * gap + 200.0 * la**2 * g**2 * 6.0**d / min(sizes) ** 2

    ledger = []
    prev_gamma = gap
    for s in range(1, d + 1):
        partial = sizes[:s] + lattice.axis_lengths[s:]
        gamma_s = hyperrect_gap(lattice, partial, method=method, seed=seed)
        step_rhs = 1e3 * la**2 * g**2 / sizes[s - 1] ** 2 + 6.0 * prev_gamma
        condition = prev_gamma <= g**2 / 16.0 ** (d - s + 1) if g > 0 else False
        ledger.append(
            {
                "axis": s,
                "sizes": list(partial),
                "gamma": float(gamma_s),
                "step_rhs": float(step_rhs),
                "step_holds": bool(gamma_s <= step_rhs + tol),
                "condition_gamma_small": bool(condition),
                "t_window": [
                    float(2**6 * 4**d * la),
                    float(lattice.axis_lengths[s - 1] / 5.0),
                ],
                "t_in_window": bool(2**6 * 4**d * la < sizes[s - 1] < lattice.axis_lengths[s - 1] / 5.0),
            }
        )
        prev_gamma = gamma_s
    flags = {
        "gap_le_g2_over_16D": gap <= g**2 / 16.0**d if g > 0 else False,
        "all_t_in_window": all(row["t_in_window"] for row in ledger),
    }
    return BoundReport(
        name="local_gap_threshold_lattice",
        lhs=lhs,
        rhs=rhs,
        regime_flags=flags,
        holds=lhs <= rhs + tol,
        margin=rhs - lhs,
        instance=f"lattice {lattice.axis_lengths}, sizes {sizes}",
        tol=tol,
        details={"num_layers": la, "max_noncommuting": g, "recursion": ledger, "gap": float(gap)},
    )


# -- comparison inequalities ------------------------------------------------------


def _translation_structure(lattice: LatticeHamiltonian):
    """Detect a periodic translation-invariant nearest-neighbour chain."""
    if lattice.n_axes != 1 or lattice.boundary[0] != "periodic":
        return None
    n = lattice.n_sites
    bonds = {}
    for term in lattice.terms:
        if term.n_sites != 2:
            return None
        a, b = (s[0] for s in term.support)
        if (a % n) + 1 == b or (b % n) + 1 == a:
            lo = a if (a % n) + 1 == b else b
            if lo in bonds:
                return None
            bonds[lo] = term
        else:
            return None
    if set(bonds) != set(range(1, n + 1)):
        return None
    reference = bonds[1].matrix
    for term in bonds.values():
        first, second = term.support[0][0], term.support[1][0]
        mat = term.matrix
        if (first % n) + 1 != second:  # stored reversed; compare after site swap
            return None
        if not np.allclose(mat, reference, atol=1e-12):
            return None
    return reference


def comparison_bounds(
    lattice: LatticeHamiltonian, ts, method: str = "auto", seed: int = 0, tol: float = 1e-9
) -> list[BoundReport]:
    """Classic threshold inequalities, each asserted only where its hypotheses hold.

    The window convention matches the originals: a window of t spins carries
    the t-1 bonds inside it (one fewer term than spins).
    """
    if isinstance(ts, int):
        ts = [ts]
    ts = [int(t) for t in ts]
    structure = _translation_structure(lattice)
    applicable = structure is not None
    reports: list[BoundReport] = []
    gap = None
    if applicable:
        gap = spectrum(assemble(lattice), method=method, seed=seed).gap
    for t in ts:
        flags = {"translation_invariant_periodic_nn": applicable, "t_ge_3": t >= 3}
        if not applicable or t < 3:
            for name in ("knabe_chain", "gosset_mozgunov_1d"):
                reports.append(
                    BoundReport(
                        name=name,
                        lhs=None,
                        rhs=None,
                        regime_flags=flags,
                        holds=None,
                        margin=None,
                        instance=f"t={t}",
                        tol=tol,
                        details={"skipped": "hypothesis fails"},
                    )
                )
            continue
        local = local_gap_1d(lattice, t, method=method, seed=seed)
        knabe_lhs = (t - 1) / (t - 2) * local
        knabe_rhs = gap + 1.0 / (t - 2)
        reports.append(
            BoundReport(
                name="knabe_chain",
                lhs=knabe_lhs,
                rhs=knabe_rhs,
                regime_flags=flags,
                holds=knabe_lhs <= knabe_rhs + tol,
                margin=knabe_rhs - knabe_lhs,
                instance=f"n={lattice.n_sites}, t={t}",
                tol=tol,
                details={"gap": float(gap), "local_gap": float(local)},
            )
        )
        gm_lhs = (5.0 / 6.0) * local
        gm_rhs = gap + 5.0 / (t**2 - 4)
        reports.append(
            BoundReport(
                name="gosset_mozgunov_1d",
                lhs=gm_lhs,
                rhs=gm_rhs,
                regime_flags=flags,
                holds=gm_lhs <= gm_rhs + tol,
                margin=gm_rhs - gm_lhs,
                instance=f"n={lattice.n_sites}, t={t}",
                tol=tol,
                details={"gap": float(gap), "local_gap": float(local)},
            )
        )
    return reports


def sweep_local_gaps(
    lattice: LatticeHamiltonian, t_values, method: str = "auto", seed: int = 0
) -> list[dict]:
    """CSV-ready rows of (t, local gap, global gap, headline rhs, margin)."""
    assignment = greedy_layers(lattice)
    la, g = assignment.num_layers, assignment.max_noncommuting
    gap = spectrum(assemble(lattice), method=method, seed=seed).gap
    rows = []
    for t in t_values:
        local = local_gap_1d(lattice, int(t), method=method, seed=seed)
        rhs = 1e3 * la**2 * g**2 / t**2 + 6.0 * gap
        rows.append(
            {
                "t": int(t),
                "local_gap": float(local),
                "global_gap": float(gap),
                "rhs": float(rhs),
                "margin": float(rhs - local),
                "scaled_local_gap": float(local * t**2),
            }
        )
    return rows
