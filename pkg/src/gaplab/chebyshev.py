"""Chebyshev polynomials and the rescaled step polynomial with its shrinking bound.

The step polynomial equals 1 at x=1 and is uniformly small on (0, 1-nu); the
bound 1/(1 + m^2 nu / (2(1-nu))) quantifies how strongly a degree-ceil(m)
polynomial can shrink that interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError


@dataclass(frozen=True)
class StepPolyParams:
    """Degree parameter m > 0 (effective degree ceil(m)) and margin nu in (0, 1/4]."""

    m: float
    nu: float

    def __post_init__(self) -> None:
        if not self.m > 0:
            raise PreconditionError(f"m must be positive, got {self.m}")
        if not 0.0 < self.nu <= 0.25:
            raise PreconditionError(f"nu must lie in (0, 1/4], got {self.nu}")

    @property
    def degree(self) -> int:
        # Ceiling, not floor: the shrinking bound needs degree >= m, and the
        # absorption degree budget is stated with a ceiling as well.
        return math.ceil(self.m)


def chebyshev_value(degree: int, x):
    """T_degree(x) by the three-term recurrence; stable for |x| near 1.

    Matches cos(m arccos x) on [-1, 1] and cosh(m arccosh x) outside.
    """
    if degree < 0:
        raise PreconditionError("degree must be >= 0")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if degree == 0:
        return prev if prev.ndim else float(prev)
    cur = x.copy()
    for _ in range(degree - 1):
        prev, cur = cur, 2.0 * x * cur - prev
    return cur if cur.ndim else float(cur)


def step_polynomial(params: StepPolyParams, x):
    """Rescaled Chebyshev step: T_d(-1 + 2x/(1-nu)) / T_d(at x=1).

    The denominator is evaluated through the same affine map at x=1, so
    step_polynomial(params, 1.0) is exactly 1.0 in floating point.
    """
    d = params.degree
    scale = 2.0 / (1.0 - params.nu)
    denom = chebyshev_value(d, -1.0 + scale * 1.0)
    return chebyshev_value(d, -1.0 + scale * np.asarray(x, dtype=float)) / denom


def step_bound(params: StepPolyParams) -> float:
    """Uniform bound on |step| over (0, 1-nu): 1/(1 + m^2 nu/(2(1-nu)))."""
    return 1.0 / (1.0 + params.m**2 * params.nu / (2.0 * (1.0 - params.nu)))


DEFAULT_M_GRID = (0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
DEFAULT_NU_GRID = (0.01, 0.05, 0.1, 0.2, 0.25)


@dataclass
class StepClaimReport:
    """Grid scan of the shrinking bound; rows are CSV-ready."""

    rows: list[dict]
    violations: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"rows": self.rows, "violations": int(self.violations), "tol": self.tol, "passed": self.passed}


def verify_step_claim(
    m_values=DEFAULT_M_GRID,
    nu_values=DEFAULT_NU_GRID,
    x_samples: int = 10_000,
    tol: float = 1e-12,
) -> StepClaimReport:
    """Scan |step| against its bound on an interior grid of (0, 1-nu).

    Also checks |step| <= 1 on the closed interval [0, 1-nu] and that the
    value at x=1 is exactly 1.  Outside (0, 1-nu) the bound is not asserted;
    the polynomial grows toward 1 there.
    """
    rows = []
    violations = 0
    for m in m_values:
        for nu in nu_values:
            params = StepPolyParams(m, nu)
            xs = (np.arange(x_samples) + 0.5) / x_samples * (1.0 - nu)
            values = np.abs(step_polynomial(params, xs))
            bound = step_bound(params)
            max_abs = float(values.max())
            closed = np.abs(step_polynomial(params, np.linspace(0.0, 1.0 - nu, 512)))
            ok = (
                max_abs <= bound + tol
                and float(closed.max()) <= 1.0 + tol
                and step_polynomial(params, 1.0) == 1.0
            )
            if not ok:
                violations += 1
            rows.append(
                {
                    "m": float(m),
                    "nu": float(nu),
                    "max_abs_step": max_abs,
                    "bound": bound,
                    "margin": bound - max_abs,
                    "holds": ok,
                }
            )
    return StepClaimReport(rows=rows, violations=violations, tol=tol)
