"""Release thresholds, SIT equilibria and their stability.

Equilibria of the constant-release system are parameterised by the ratio
alpha = M_T / M, which solves

    alpha**2 - (R - 1 - Q M_T) alpha + Q M_T = 0.

Using the Vieta product the wild-male levels come out as M_1 = alpha_- / Q and
M_2 = alpha_+ / Q, which stays well defined when M_T -> 0 (E_1 -> 0 and
E_2 -> E*).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from sitcontrol.model import (
    Params,
    State,
    basic_offspring_number,
    jacobian,
    wild_equilibrium,
)

TANGENCY_TOL = 1e-9
BISECTION_GRID = 512


class NoPositiveEquilibrium(ValueError):
    """Raised when R <= 1, so that release thresholds are meaningless."""


class Kind(str, enum.Enum):
    NO_POSITIVE = "NoPositive"
    TANGENT = "Tangent"
    PAIR = "Pair"


@dataclass(frozen=True)
class EquilibriumAnalysis:
    mt_star: float
    r_number: float
    q: float
    mt1: float
    mt2: float
    discriminant: float
    kind: Kind
    alpha_plus: Optional[float] = None
    alpha_minus: Optional[float] = None
    alpha_dagger: Optional[float] = None
    e1: Optional[State] = None
    e2: Optional[State] = None
    e_dagger: Optional[State] = None


def _require_persistent(p: Params) -> float:
    R = basic_offspring_number(p)
    if R <= 1:
        raise NoPositiveEquilibrium(f"R = {R:.6g} <= 1: no positive wild equilibrium")
    return R


def composite_q(p: Params) -> float:
    return p.mu_a2 * p.mu_m / ((p.gamma + p.mu_a1) * (1 - p.r) * p.gamma)


def sit_thresholds(p: Params) -> tuple[float, float, float]:
    """Return (Q, M_T1, M_T2)."""
    R = _require_persistent(p)
    q = composite_q(p)
    s = math.sqrt(R)
    return q, (s - 1) ** 2 / q, (s + 1) ** 2 / q


def discriminant(p: Params, mt_star: float) -> float:
    """Factored discriminant, exact zero at both thresholds."""
    R = basic_offspring_number(p)
    q = composite_q(p)
    s = math.sqrt(R)
    return ((s - 1) ** 2 - mt_star * q) * ((s + 1) ** 2 - mt_star * q)


def equilibrium_from_male(p: Params, m: float) -> State:
    """Reconstruct (A, M, F) on the equilibrium curve from the male level."""
    a = p.mu_m * m / ((1 - p.r) * p.gamma)
    return State(a, m, (p.gamma + p.mu_a1 + p.mu_a2 * a) * a / p.phi)


def sit_equilibria(p: Params, mt_star: float) -> EquilibriumAnalysis:
    if mt_star < 0:
        raise ValueError(f"mt_star must be nonnegative, got {mt_star!r}")
    q, mt1, mt2 = sit_thresholds(p)
    R = basic_offspring_number(p)
    b = R - 1 - q * mt_star
    c = q * mt_star
    delta = discriminant(p, mt_star)
    base = dict(mt_star=mt_star, r_number=R, q=q, mt1=mt1, mt2=mt2, discriminant=delta)

    scale = (math.sqrt(R) + 1) ** 4
    if abs(delta) < TANGENCY_TOL * scale and mt_star <= 0.5 * (mt1 + mt2):
        alpha = b / 2
        e = equilibrium_from_male(p, mt_star / alpha)
        return EquilibriumAnalysis(**base, kind=Kind.TANGENT, alpha_dagger=alpha, e_dagger=e)
    if delta < 0 or b <= 0:
        return EquilibriumAnalysis(**base, kind=Kind.NO_POSITIVE)

    alpha_plus = (b + math.sqrt(delta)) / 2
    alpha_minus = c / alpha_plus
    return EquilibriumAnalysis(
        **base,
        kind=Kind.PAIR,
        alpha_plus=alpha_plus,
        alpha_minus=alpha_minus,
        e1=equilibrium_from_male(p, alpha_minus / q),
        e2=equilibrium_from_male(p, alpha_plus / q),
    )


def _balance(p: Params, mt_star: float, m: float) -> float:
    """f1(M) - f2(M): mating fraction minus the break-even fraction."""
    f1 = m / (m + mt_star)
    f2 = p.mu_f * (p.gamma + p.mu_a1) / (p.r * p.gamma * p.phi) + (
        p.mu_f * p.mu_a2 / (p.r * p.phi) * p.mu_m / ((1 - p.r) * p.gamma**2) * m
    )
    return f1 - f2


def verify_equilibrium_by_bisection(p: Params, mt_star: float, rtol: float = 1e-10) -> List[float]:
    """Brute-force the male levels of the positive equilibria.

    Scans ``f1 - f2`` on a 512-point geometric grid over (0, 10 M*]. Sign
    changes are refined by bisection. The balance function is concave, so a
    grid maximum that touches zero without a sign change is reported as a
    double root after a golden-section refinement.
    """
    if not mt_star > 0:
        raise ValueError("mt_star must be positive")
    e_star = wild_equilibrium(p)
    if e_star is None:
        return []
    grid = np.geomspace(e_star.m * 1e-12, 10 * e_star.m, BISECTION_GRID)
    vals = np.array([_balance(p, mt_star, m) for m in grid])

    def bisect(lo, hi):
        glo = _balance(p, mt_star, lo)
        while hi - lo > rtol * hi:
            mid = 0.5 * (lo + hi)
            gm = _balance(p, mt_star, mid)
            if (gm > 0) == (glo > 0):
                lo, glo = mid, gm
            else:
                hi = mid
        return 0.5 * (lo + hi)

    roots = []
    for i in range(len(grid) - 1):
        if vals[i] == 0:
            roots.append(float(grid[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(bisect(grid[i], grid[i + 1]))
    if roots:
        return roots

    # no sign change: look for a tangential touch at the maximum
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    inv = (math.sqrt(5) - 1) / 2
    while hi - lo > rtol * hi:
        x1 = hi - inv * (hi - lo)
        x2 = lo + inv * (hi - lo)
        if _balance(p, mt_star, x1) < _balance(p, mt_star, x2):
            lo = x1
        else:
            hi = x2
    m_top = 0.5 * (lo + hi)
    g_top = _balance(p, mt_star, m_top)
    if g_top >= 0:
        return [m_top]
    if abs(g_top) < 1e-9:
        return [m_top]
    return []


@dataclass(frozen=True)
class StabilityReport:
    name: str
    state: State
    label: str
    basin: str
    eigenvalues: tuple
    determinant: float
    slope: Optional[float] = None


def slope_condition(p: Params, mt_star: float, m: float) -> float:
    """Slope of f1 - f2 at M; positive at M_1, negative at M_2, zero at M_dagger."""
    return mt_star / (m + mt_star) ** 2 - (
        p.mu_f * p.mu_a2 / (p.r * p.phi) * p.mu_m / ((1 - p.r) * p.gamma**2)
    )


def _report(p, name, state, mt, label, basin, slope=None):
    jac = jacobian(p, state, mt)
    eig = tuple(sorted(np.linalg.eigvals(jac), key=lambda z: (z.real, z.imag)))
    return StabilityReport(name, state, label, basin, eig, float(np.linalg.det(jac)), slope)


def classify_stability(p: Params, analysis: EquilibriumAnalysis) -> List[StabilityReport]:
    """Stability labels and basin descriptions for every equilibrium."""
    mt = analysis.mt_star
    zero = State(0.0, 0.0, 0.0)
    if mt == 0:
        e_star = wild_equilibrium(p)
        return [
            _report(p, "0", zero, None, "unstable", "non-negative M-axis"),
            _report(p, "E*", e_star, None, "stable", "D minus {A = F = 0}"),
        ]
    if analysis.kind is Kind.NO_POSITIVE:
        return [_report(p, "0", zero, mt, "GAS", "D")]
    if analysis.kind is Kind.TANGENT:
        e = analysis.e_dagger
        return [
            _report(p, "0", zero, mt, "LAS", "[0, E_dagger)"),
            _report(
                p, "E_dagger", e, mt, "semi-stable", "{x >= E_dagger}",
                slope_condition(p, mt, e.m),
            ),
        ]
    e1, e2 = analysis.e1, analysis.e2
    s1 = slope_condition(p, mt, e1.m)
    s2 = slope_condition(p, mt, e2.m)
    rep1 = _report(p, "E1", e1, mt, "unstable", "repelling; separates the two basins", s1)
    rep2 = _report(p, "E2", e2, mt, "stable", "{x > E1}", s2)
    # slope signs must agree with the Jacobian determinant signs
    if not (s1 > 0 and rep1.determinant > 0):
        raise ArithmeticError(f"E1 sign check failed: slope={s1:.3g}, det={rep1.determinant:.3g}")
    if not (s2 < 0 and rep2.determinant < 0):
        raise ArithmeticError(f"E2 sign check failed: slope={s2:.3g}, det={rep2.determinant:.3g}")
    return [_report(p, "0", zero, mt, "LAS", "[0, E1)"), rep1, rep2]


def periodic_threshold(p: Params, tau: float) -> float:
    """Pulse size threshold M_T1^per for releases every ``tau`` days."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    _, mt1, _ = sit_thresholds(p)
    return mt1 * math.expm1(p.mu_t * tau)
