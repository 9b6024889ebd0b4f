"""Coarse-graining of a chain into two interleaved families of length-t segments.

The S segments tile the chain with small slack gaps; the T segments sit
halfway across each gap.  Excitation projectors of the segment Hamiltonians
build the coarse Hamiltonian and its detectability operator, which link the
global gap to the worst local gap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .chebyshev import StepPolyParams, step_bound
from .errors import LayoutError, PreconditionError
from .layering import greedy_layers
from .operators import (
    EmbeddedOperator,
    LatticeHamiltonian,
    LocalTerm,
    SparseHermitianOperator,
    apply_product,
    assemble,
    embed_local_term,
    restrict_sites,
)
from .spectral import (
    GapUndefinedError,
    KernelProjector,
    kernel_projector,
    operator_dominates,
    restricted_top_norm,
    spectrum,
)

MATERIALIZE_DIM = 4096


@dataclass
class SegmentLayout:
    """Positions of the S/T segment families on a chain of n sites.

    Intervals are inclusive 1-based ``(lo, hi)``; on a closed chain the last
    T interval may run past n and wraps (``sites`` reduces modulo n).  The
    slack counts ``r_list`` have one entry per gap following each S segment,
    the last being the wrap gap (always 0 for an open chain).
    """

    n: int
    t: int
    boundary: str  # "open" | "closed"
    num_segments: int
    remainder: int
    s_intervals: list[tuple[int, int]]
    t_intervals: list[tuple[int, int]]
    r_list: list[int]
    slack_cap: int
    min_overlap: int

    @property
    def in_paper_regime(self) -> bool:
        """n > 5t together with the minimum segment width the bounds assume."""
        return self.n > 5 * self.t and self.t >= 8

    @property
    def eq5_holds(self) -> bool:
        """Slack bound: every r_k <= t/4."""
        return max(self.r_list) <= self.t / 4

    @property
    def eq5_feasible(self) -> bool:
        """Whether any layout with these (n, t, boundary) could satisfy eq5."""
        gaps = self.num_segments if self.boundary == "closed" else self.num_segments - 1
        return gaps * (self.t // 4) >= self.remainder

    @property
    def eq6_holds(self) -> bool:
        """Overlap bound: every T segment overlaps its S neighbours by >= floor(t/4)."""
        return self.min_overlap >= self.t // 4

    def theorem_regime(self, num_layers: int) -> bool:
        return 8 * num_layers**2 < self.t < self.n / 5

    def covers_all_pairs(self) -> bool:
        """True when every nearest-neighbour pair fits inside some segment."""
        if not self.t_intervals:
            return self.num_segments == 1
        return self.min_overlap >= 1

    def sites(self, interval: tuple[int, int]) -> list[int]:
        lo, hi = interval
        return [(x - 1) % self.n + 1 for x in range(lo, hi + 1)]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "t": self.t,
            "boundary": self.boundary,
            "num_segments": self.num_segments,
            "remainder": self.remainder,
            "s_intervals": [list(iv) for iv in self.s_intervals],
            "t_intervals": [list(iv) for iv in self.t_intervals],
            "r_list": list(self.r_list),
            "slack_cap": self.slack_cap,
            "min_overlap": self.min_overlap,
            "in_paper_regime": self.in_paper_regime,
            "eq5_holds": self.eq5_holds,
            "eq5_feasible": self.eq5_feasible,
            "eq6_holds": self.eq6_holds,
        }

    def ascii_art(self) -> str:
        """Terminal rendering of the two segment families over the site row.

        Consecutive segments alternate case so zero-slack neighbours stay
        distinguishable.
        """
        width = self.n

        def strip(intervals, chars):
            row = ["."] * width
            for k, iv in enumerate(intervals):
                for s in self.sites(iv):
                    row[s - 1] = chars[k % 2]
            return "".join(row)

        ruler = "".join("|" if (i + 1) % 10 == 0 else " " for i in range(width))
        return "\n".join(
            [
                f"n={self.n} t={self.t} boundary={self.boundary} "
                f"segments={self.num_segments} remainder={self.remainder} r={self.r_list}",
                "S: " + strip(self.s_intervals, "Ss"),
                "T: " + strip(self.t_intervals, "Tt"),
                "   " + ruler,
            ]
        )

    def validate(self) -> None:
        """Raise LayoutError if any structural invariant fails."""
        t, n = self.t, self.n
        if len(self.s_intervals) != self.num_segments:
            raise LayoutError("wrong number of S segments")
        expected_t = self.num_segments - (1 if self.boundary == "open" else 0)
        if len(self.t_intervals) != expected_t:
            raise LayoutError("wrong number of T segments")
        for lo, hi in self.s_intervals + self.t_intervals:
            if hi - lo + 1 != t:
                raise LayoutError(f"segment [{lo}:{hi}] does not have length {t}")
        starts = [lo for lo, _ in self.s_intervals]
        ends = [hi for _, hi in self.s_intervals]
        if any(starts[k + 1] <= ends[k] for k in range(len(starts) - 1)):
            raise LayoutError("S segments are not ordered and disjoint")
        if self.boundary == "open" and (starts[0] != 1 or ends[-1] != n):
            raise LayoutError("open chain must pin the first and last S segments to the ends")
        if ends[-1] > n or starts[0] < 1:
            raise LayoutError("S segments must stay inside [1:n]")
        if sum(self.r_list) != self.remainder:
            raise LayoutError("slack counts do not sum to the remainder")
        if max(self.r_list) > self.slack_cap:
            raise LayoutError("a slack gap exceeds the even-distribution cap")
        # gap bookkeeping
        for k in range(self.num_segments - 1):
            if starts[k + 1] - ends[k] - 1 != self.r_list[k]:
                raise LayoutError(f"gap after segment {k + 1} does not match r_list")
        wrap_gap = n - ends[-1] + starts[0] - 1
        if wrap_gap != self.r_list[-1]:
            raise LayoutError("wrap gap does not match the last slack entry")
        # T placement and overlaps
        for k, (lo, hi) in enumerate(self.t_intervals):
            r_k = self.r_list[k]
            fl = (t - r_k) // 2
            ce = t - r_k - fl
            s_end = ends[k]
            s_next = starts[k + 1] if k + 1 < self.num_segments else starts[0] + n
            if lo != s_end - fl + 1 or hi != s_next + ce - 1:
                raise LayoutError(f"T segment {k + 1} does not follow the halfway formula")
            left = len(set(self.sites((lo, hi))) & set(self.sites(self.s_intervals[k])))
            right_iv = self.s_intervals[(k + 1) % self.num_segments]
            right = len(set(self.sites((lo, hi))) & set(self.sites(right_iv)))
            if left != fl or right != ce:
                raise LayoutError(f"T segment {k + 1} overlap mismatch: {left}/{right} vs {fl}/{ce}")
        t_sites = [set(self.sites(iv)) for iv in self.t_intervals]
        for a in range(len(t_sites)):
            for b in range(a + 1, len(t_sites)):
                if t_sites[a] & t_sites[b]:
                    raise LayoutError("T segments overlap each other")


def segment_layout(n: int, t: int, boundary: str = "open") -> SegmentLayout:
    """Deterministic segment layout: slack spread evenly, earliest gaps first.

    On an open chain the first and last S segments are pinned to the chain
    ends, so the slack is distributed over the interior gaps only; the cap
    max r_k <= ceil(remainder / gaps) is the feasible version of the even-
    distribution rule (for a closed chain it coincides with ceil(r / count)).
    """
    if boundary not in ("open", "closed"):
        raise LayoutError(f"boundary must be 'open' or 'closed', got {boundary!r}")
    if t < 2:
        raise LayoutError(f"segment length must be at least 2, got t={t}")
    if t > n:
        raise LayoutError(f"segment length t={t} exceeds chain length n={n}")
    num = n // t
    remainder = n - t * num
    if num < 2:
        raise LayoutError(f"need at least two segments; n={n}, t={t} gives {num}")
    gaps = num if boundary == "closed" else num - 1
    base, extra = divmod(remainder, gaps)
    gap_slack = [base + (1 if i < extra else 0) for i in range(gaps)]
    r_list = gap_slack + ([0] if boundary == "open" else [])

    s_intervals: list[tuple[int, int]] = []
    start = 1
    for k in range(num):
        s_intervals.append((start, start + t - 1))
        if k < num - 1:
            start = start + t + r_list[k]

    t_intervals: list[tuple[int, int]] = []
    for k in range(num - 1):
        r_k = r_list[k]
        fl = (t - r_k) // 2
        ce = t - r_k - fl
        t_intervals.append((s_intervals[k][1] - fl + 1, s_intervals[k + 1][0] + ce - 1))
    if boundary == "closed":
        r_k = r_list[-1]
        fl = (t - r_k) // 2
        ce = t - r_k - fl
        t_intervals.append((s_intervals[-1][1] - fl + 1, s_intervals[0][0] + n + ce - 1))

    min_overlap = min(((t - r_list[k]) // 2 for k in range(len(t_intervals))), default=0)
    layout = SegmentLayout(
        n=n,
        t=t,
        boundary=boundary,
        num_segments=num,
        remainder=remainder,
        s_intervals=s_intervals,
        t_intervals=t_intervals,
        r_list=r_list,
        slack_cap=base + (1 if extra else 0),
        min_overlap=min_overlap,
    )
    layout.validate()
    return layout


# -- coarse Hamiltonian ----------------------------------------------------------


@dataclass
class CoarseGrainedModel:
    """Excitation projectors per segment, their sum, and the segment DL factors."""

    lattice: LatticeHamiltonian
    layout: SegmentLayout
    s_projectors: list[LocalTerm]
    t_projectors: list[LocalTerm]
    coarse_lattice: LatticeHamiltonian
    hbar: SparseHermitianOperator
    dl_factors: list = field(default_factory=list)


def _segment_excitation_projector(lattice: LatticeHamiltonian, sites: list[int], seed: int) -> LocalTerm:
    """Projector onto the excited space of the Hamiltonian inside ``sites``.

    Segment problems are local-dimension sized, so the solver method is
    chosen automatically regardless of how the global solve is configured.
    """
    positions = [lattice.site_number((c,)) for c in sites]
    sub, kept = restrict_sites(lattice, positions)
    support = tuple((c,) for c in sites)
    local_dim = sub.dim
    if not kept:
        warnings.warn(f"segment {sites[0]}..{sites[-1]} carries no terms; its projector is zero")
        zero = np.zeros((local_dim, local_dim), dtype=np.complex128)
        return LocalTerm(support, zero, is_projector=True)
    h_local = assemble(sub)
    if h_local.norm_bound() == 0.0:
        warnings.warn(f"segment {sites[0]}..{sites[-1]} Hamiltonian is zero; its projector is zero")
        zero = np.zeros((local_dim, local_dim), dtype=np.complex128)
        return LocalTerm(support, zero, is_projector=True)
    kern = kernel_projector(h_local, method="auto", seed=seed)
    q = np.eye(local_dim, dtype=np.complex128) - kern.basis @ kern.basis.conj().T
    q = 0.5 * (q + q.conj().T)
    return LocalTerm(support, q, is_projector=True)


def coarse_grain(
    lattice: LatticeHamiltonian, layout: SegmentLayout, method: str = "auto", seed: int = 0
) -> CoarseGrainedModel:
    """Build the coarse Hamiltonian (sum of excitation projectors) and its DL.

    The DL factor list is ordered S family first, then T family, matching the
    product (prod over S of 1-Q) (prod over T of 1-Q); within a family the
    factors commute because the segments are disjoint.
    """
    if lattice.n_axes != 1:
        raise PreconditionError("coarse graining runs on chains; columnize higher lattices first")
    if lattice.n_sites != layout.n:
        raise PreconditionError(f"layout is for n={layout.n}, lattice has {lattice.n_sites} sites")
    expected = "closed" if lattice.boundary[0] == "periodic" else "open"
    if layout.boundary != expected:
        raise PreconditionError(f"layout boundary {layout.boundary!r} does not match lattice {expected!r}")

    s_projectors = [
        _segment_excitation_projector(lattice, layout.sites(iv), seed)
        for iv in layout.s_intervals
    ]
    t_projectors = [
        _segment_excitation_projector(lattice, layout.sites(iv), seed)
        for iv in layout.t_intervals
    ]
    coarse = LatticeHamiltonian(
        lattice.axis_lengths, lattice.site_dims, lattice.boundary, s_projectors + t_projectors
    )
    hbar = assemble(coarse)

    factors = []
    materialize = lattice.dim <= MATERIALIZE_DIM
    for term in s_projectors + t_projectors:
        if not np.any(term.matrix):
            continue  # empty segment contributes identity
        local = np.eye(term.matrix.shape[0], dtype=np.complex128) - term.matrix
        positions = coarse.term_positions(term)
        if materialize:
            factors.append(_sparse_embed(lattice, positions, local))
        else:
            factors.append(EmbeddedOperator(lattice.site_dims, positions, local))
    return CoarseGrainedModel(lattice, layout, s_projectors, t_projectors, coarse, hbar, factors)


def _sparse_embed(lattice: LatticeHamiltonian, positions: list[int], local: np.ndarray):
    support = tuple(lattice.coords_of(p) for p in positions)
    return embed_local_term(LocalTerm(support, local), lattice)


def kernel_match_report(
    lattice: LatticeHamiltonian,
    cg: CoarseGrainedModel,
    method: str = "auto",
    seed: int = 0,
    tol: float = 1e-8,
) -> dict:
    """Check that the coarse Hamiltonian's kernel coincides with the model's.

    Compares dimensions and the largest principal angle (through its sine,
    which stays well conditioned near zero).
    """
    k_h = kernel_projector(assemble(lattice), method=method, seed=seed)
    k_c = kernel_projector(cg.hbar, method=method, seed=seed)
    dims_equal = k_h.kernel_dim == k_c.kernel_dim
    b1, b2 = k_h.basis, k_c.basis
    sin1 = float(np.linalg.norm(b2 - b1 @ (b1.conj().T @ b2), 2)) if b2.size else 0.0
    sin2 = float(np.linalg.norm(b1 - b2 @ (b2.conj().T @ b1), 2)) if b1.size else 0.0
    max_sine = max(sin1, sin2)
    return {
        "check": "coarse_kernel_coincidence",
        "kernel_dim": int(k_h.kernel_dim),
        "coarse_kernel_dim": int(k_c.kernel_dim),
        "max_principal_sine": max_sine,
        "tol": tol,
        "passed": bool(dims_equal and max_sine <= tol),
    }


def gap_link_check(
    lattice: LatticeHamiltonian,
    layout: SegmentLayout,
    method: str = "auto",
    seed: int = 0,
    tol: float = 1e-9,
    cg: CoarseGrainedModel | None = None,
) -> dict:
    """Certify the link between coarse gap, global gap and local gap.

    Checks the operator inequality ``coarse_H <= (2/local_gap) H`` and the
    scalar consequence ``gap(coarse_H) <= 2 gap / local_gap``.
    """
    from .bounds import local_gap_1d

    if cg is None:
        cg = coarse_grain(lattice, layout, method=method, seed=seed)
    hamiltonian = assemble(lattice)
    gap_global = spectrum(hamiltonian, method=method, seed=seed).gap
    gap_coarse = spectrum(cg.hbar, method=method, seed=seed).gap
    gap_local = local_gap_1d(lattice, layout.t, method=method, seed=seed)
    scaled = SparseHermitianOperator((2.0 / gap_local) * hamiltonian.matrix, verify=False)
    dom = operator_dominates(scaled, cg.hbar, tol=tol, method=method, seed=seed)
    scalar_ok = gap_coarse <= 2.0 * gap_global / gap_local + tol
    return {
        "check": "coarse_gap_link",
        "gap": float(gap_global),
        "coarse_gap": float(gap_coarse),
        "local_gap": float(gap_local),
        "scalar_lhs": float(gap_coarse),
        "scalar_rhs": float(2.0 * gap_global / gap_local),
        "operator_inequality": dom.to_dict(),
        "tol": tol,
        "passed": bool(dom.holds and scalar_ok),
    }


def lightcone_lower_check(
    lattice: LatticeHamiltonian,
    layout: SegmentLayout,
    method: str = "auto",
    seed: int = 0,
    tol: float = 1e-9,
    cg: CoarseGrainedModel | None = None,
) -> dict:
    """Lower half of the light-cone bound: 1 - 3 gap(coarse_H) <= max ||DL(t) psi||^2.

    The step-polynomial upper half is only asserted in its regime of validity
    (t >= 8 L^2 and margin nu <= 1/4); otherwise its value is reported
    unasserted.
    """
    if cg is None:
        cg = coarse_grain(lattice, layout, method=method, seed=seed)
    hamiltonian = assemble(lattice)
    kernel = kernel_projector(hamiltonian, method=method, seed=seed)
    gap_coarse = spectrum(cg.hbar, method=method, seed=seed).gap
    top = restricted_top_norm(cg.dl_factors, kernel, method=method, seed=seed)
    lower = 1.0 - 3.0 * gap_coarse
    lower_ok = top >= lower - tol

    assignment = greedy_layers(lattice)
    la, g = assignment.num_layers, assignment.max_noncommuting
    gap_global = spectrum(hamiltonian, method=method, seed=seed).gap
    out = {
        "check": "lightcone_lower",
        "coarse_gap": float(gap_coarse),
        "max_dl_norm_sq": float(top),
        "lower_bound": float(lower),
        "num_layers": int(la),
        "max_noncommuting": int(g),
        "tol": tol,
        "passed": bool(lower_ok),
    }
    in_regime = layout.t >= 8 * la**2 and g > 0
    nu = gap_global / (g**2 + gap_global) if g > 0 else None
    if nu is not None and 0 < nu <= 0.25:
        upper = step_bound(StepPolyParams(layout.t / (8.0 * la), nu))
        out["step_upper_bound"] = float(upper)
        out["upper_in_regime"] = bool(in_regime)
        if in_regime:
            out["upper_holds"] = bool(top <= upper + tol)
            out["passed"] = bool(out["passed"] and out["upper_holds"])
        else:
            out["upper_note"] = "not in regime; reported unasserted"
    else:
        out["upper_in_regime"] = False
        out["upper_note"] = "margin nu outside (0, 1/4]; step bound not applicable"
    return out


def absorption_check(
    lattice: LatticeHamiltonian,
    s_interval: tuple[int, int],
    t_interval: tuple[int, int],
    q: int,
    probes: int = 10,
    seed: int | None = None,
    tol: float = 1e-8,
    method: str = "auto",
) -> dict:
    """Probe the absorption identity (1-Q_S)(DL^dag DL)^q (1-Q_T) = (1-Q_S)(1-Q_T).

    DL here is built from the terms supported inside S union T: those are the
    factors the segment projectors can absorb, and any factor fully outside
    the pair would trivially break the single-pair identity.  The counting
    precondition q*(2L-2)+1 < overlap uses the actual overlap of the supplied
    intervals.  Verified by seeded random probe vectors; by linearity the
    monomial check extends to any polynomial of degree <= q.
    """
    if seed is None:
        raise PreconditionError("absorption probing requires an explicit seed")
    if lattice.n_axes != 1:
        raise PreconditionError("absorption check runs on chains")
    if q < 0:
        raise PreconditionError("q must be nonnegative")
    s_sites = list(range(s_interval[0], s_interval[1] + 1))
    t_sites = list(range(t_interval[0], t_interval[1] + 1))
    n = lattice.n_sites
    for s in s_sites + t_sites:
        if not 1 <= s <= n:
            raise PreconditionError(f"interval site {s} outside chain [1:{n}]")
    overlap = len(set(s_sites) & set(t_sites))
    union_positions = sorted({lattice.site_number((c,)) for c in s_sites + t_sites})
    sub, kept = restrict_sites(lattice, union_positions)
    assignment = greedy_layers(sub)
    la = assignment.num_layers
    budget = q * (2 * la - 2) + 1
    if q > 0 and budget >= overlap:
        raise PreconditionError(
            f"counting condition fails: q(2L-2)+1 = {budget} must be < overlap {overlap}"
        )

    materialize = lattice.dim <= 2048
    def factor_for(term: LocalTerm):
        local = np.eye(term.matrix.shape[0], dtype=np.complex128) - term.matrix
        positions = lattice.term_positions(term)
        if materialize:
            return _sparse_embed(lattice, positions, local)
        return EmbeddedOperator(lattice.site_dims, positions, local)

    seg_s = _segment_excitation_projector(lattice, s_sites, seed=0)
    seg_t = _segment_excitation_projector(lattice, t_sites, seed=0)
    one_minus_qs = factor_for(LocalTerm(seg_s.support, seg_s.matrix, True))
    one_minus_qt = factor_for(LocalTerm(seg_t.support, seg_t.matrix, True))

    dl_factors = []
    for layer in assignment.layers:
        for sub_index in layer:
            dl_factors.append(factor_for(lattice.terms[kept[sub_index]]))

    rng = np.random.default_rng([seed, 9])
    residuals = []
    for _ in range(probes):
        v = rng.standard_normal(lattice.dim) + 1j * rng.standard_normal(lattice.dim)
        v /= np.linalg.norm(v)
        rhs = one_minus_qs.matvec(one_minus_qt.matvec(v))
        w = one_minus_qt.matvec(v)
        for _ in range(q):
            w = apply_product(dl_factors, w)
            w = apply_product(list(reversed(dl_factors)), w)
        lhs = one_minus_qs.matvec(w)
        residuals.append(float(np.linalg.norm(lhs - rhs)))
    max_residual = max(residuals) if residuals else 0.0
    return {
        "check": "absorption_identity",
        "q": int(q),
        "num_layers": int(la),
        "overlap": int(overlap),
        "budget": int(budget),
        "probes": int(probes),
        "residuals": residuals,
        "max_residual": max_residual,
        "tol": tol,
        "passed": bool(max_residual <= tol),
    }
