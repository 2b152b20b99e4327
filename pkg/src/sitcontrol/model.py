"""Wild-population and constant-release SIT vector fields.

State ordering is always (A, M, F): aquatic stage, males, fertilized
females. The extended state appends the sterile-male stock M_T.

All functions are pure; parameter sets are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np


class State(NamedTuple):
    """Population point (A, M, F)."""

    a: float
    m: float
    f: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "State":
        return cls(float(x[0]), float(x[1]), float(x[2]))

    def __lt__(self, other):  # componentwise, not lexicographic
        return all(u < v for u, v in zip(self, other))

    def __le__(self, other):
        return all(u <= v for u, v in zip(self, other))

    def __gt__(self, other):
        return all(u > v for u, v in zip(self, other))

    def __ge__(self, other):
        return all(u >= v for u, v in zip(self, other))

    def shifted(self, delta: float) -> "State":
        return State(self.a + delta, self.m + delta, self.f + delta)

    def scaled(self, c: float) -> "State":
        return State(c * self.a, c * self.m, c * self.f)


class ExtendedState(NamedTuple):
    """Population point plus the sterile-male stock M_T."""

    a: float
    m: float
    f: float
    mt: float

    @property
    def state(self) -> State:
        return State(self.a, self.m, self.f)

    @classmethod
    def of(cls, state: Sequence[float], mt: float) -> "ExtendedState":
        a, m, f = state
        return cls(float(a), float(m), float(f), float(mt))

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


@dataclass(frozen=True)
class Params:
    """Entomological rates (per day) and the sex ratio.

    ``r`` is the fraction of emerging adults that are female; ``mu_t`` is the
    sterile-male mortality, only used by the impulsive-release system.
    """

    phi: float
    gamma: float
    mu_a1: float
    mu_a2: float
    r: float
    mu_f: float
    mu_m: float
    mu_t: float

    def __post_init__(self):
        for fld in fields(self):
            value = getattr(self, fld.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ValueError(f"{fld.name} must be a finite number, got {value!r}")
            if value <= 0:
                raise ValueError(f"{fld.name} must be strictly positive, got {value!r}")
        if not self.r < 1:
            raise ValueError(f"sex ratio r must lie in (0, 1), got {self.r!r}")

    @classmethod
    def mosquito(cls, gamma: float, **overrides) -> "Params":
        """Reference mosquito parameter set with maturation rate ``gamma``."""
        values = dict(
            phi=10.0,
            mu_a1=0.05,
            mu_a2=2e-4,
            r=0.49,
            mu_f=0.1,
            mu_m=0.14,
            mu_t=0.14,
        )
        values.update(overrides)
        return cls(gamma=gamma, **values)


def basic_offspring_number(p: Params) -> float:
    return p.r * p.gamma * p.phi / (p.mu_f * (p.gamma + p.mu_a1))


def wild_equilibrium(p: Params) -> Optional[State]:
    """Positive equilibrium E* of the wild model, or None when R <= 1."""
    R = basic_offspring_number(p)
    if R <= 1:
        return None
    a = (p.gamma + p.mu_a1) * (R - 1) / p.mu_a2
    return State(a, (1 - p.r) * p.gamma * a / p.mu_m, p.r * p.gamma * a / p.mu_f)


def mating_fraction(m: float, mt: float) -> float:
    """Probability that a mating involves a wild male.

    Without sterile males every mating is fertile. With M = M_T = 0 no
    mating happens at all, which keeps the origin a fixed point.
    """
    if mt == 0:
        return 1.0
    total = m + mt
    return m / total if total > 0 else 0.0


def _field(p: Params, a: float, m: float, f: float, frac: float):
    return (
        p.phi * f - (p.gamma + p.mu_a1 + p.mu_a2 * a) * a,
        (1 - p.r) * p.gamma * a - p.mu_m * m,
        frac * p.r * p.gamma * a - p.mu_f * f,
    )


def wild_rhs(p: Params, x: Sequence[float]) -> State:
    a, m, f = x
    return State(*_field(p, a, m, f, 1.0))


def sit_rhs(p: Params, x: Sequence[float], mt: float) -> State:
    a, m, f = x
    return State(*_field(p, a, m, f, mating_fraction(m, mt)))


def sit_field(p: Params, mt: float = 0.0) -> Callable[[float, np.ndarray], np.ndarray]:
    """Array vector field ``(t, y) -> dy/dt`` for a fixed sterile stock."""
    phi, r, g, mu_m, mu_f = p.phi, p.r, p.gamma, p.mu_m, p.mu_f
    loss, mu_a2 = p.gamma + p.mu_a1, p.mu_a2

    def rhs(t, y):
        a, m, f = y[0], y[1], y[2]
        if mt == 0:
            frac = 1.0
        else:
            frac = m / (m + mt) if m + mt > 0 else 0.0
        return np.array(
            [phi * f - (loss + mu_a2 * a) * a, (1 - r) * g * a - mu_m * m, frac * r * g * a - mu_f * f]
        )

    return rhs


def impulsive_field(p: Params) -> Callable[[float, np.ndarray], np.ndarray]:
    """Between-pulse field of the 4-dim system (A, M, F, M_T)."""
    phi, r, g, mu_m, mu_f, mu_t = p.phi, p.r, p.gamma, p.mu_m, p.mu_f, p.mu_t
    loss, mu_a2 = p.gamma + p.mu_a1, p.mu_a2

    def rhs(t, y):
        a, m, f, mt = y[0], y[1], y[2], y[3]
        if mt == 0:
            frac = 1.0
        else:
            frac = m / (m + mt) if m + mt > 0 else 0.0
        return np.array(
            [
                phi * f - (loss + mu_a2 * a) * a,
                (1 - r) * g * a - mu_m * m,
                frac * r * g * a - mu_f * f,
                -mu_t * mt,
            ]
        )

    return rhs


def jacobian(p: Params, x: Sequence[float], mt: Optional[float] = None) -> np.ndarray:
    """Jacobian of the wild field (``mt`` None) or of the SIT field."""
    a, m, f = x
    rg = p.r * p.gamma
    if mt is None or mt == 0:
        d_fa, d_fm = rg, 0.0
    else:
        total = m + mt
        d_fa = rg * m / total if total > 0 else 0.0
        d_fm = rg * a * (mt / total) / total if total > 0 else 0.0
    return np.array(
        [
            [-(p.gamma + p.mu_a1) - 2 * p.mu_a2 * a, 0.0, p.phi],
            [(1 - p.r) * p.gamma, -p.mu_m, 0.0],
            [d_fa, d_fm, -p.mu_f],
        ]
    )


def dominating_point(p: Params, m: float) -> State:
    """Point b_m >= (m, m, m) at which the wild field is strictly negative.

    Starts from the root of r*gamma - mu_F/(2 phi) (gamma + mu_A1 + mu_A2 A)
    and doubles A until every defining inequality holds.
    """
    if not m > 0:
        raise ValueError(f"m must be positive, got {m!r}")
    root = (2 * p.phi * p.r * p.gamma / p.mu_f - p.gamma - p.mu_a1) / p.mu_a2
    a = root if root > 0 else m

    def parts(a):
        f_m = (p.gamma + p.mu_a1 + p.mu_a2 * a) * a / (2 * p.phi)
        m_m = 2 * (1 - p.r) * p.gamma * a / p.mu_m
        ok = (
            p.r * p.gamma - p.mu_f / (2 * p.phi) * (p.gamma + p.mu_a1 + p.mu_a2 * a) < 0
            and a >= m
            and f_m >= m
            and m_m >= m
        )
        return ok, m_m, f_m

    ok, m_m, f_m = parts(a)
    while not ok:
        a *= 2
        ok, m_m, f_m = parts(a)
    return State(a, m_m, f_m)
