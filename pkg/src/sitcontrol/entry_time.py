"""Target box, numerical entry times and the linear comparison bound."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from sitcontrol.equilibria import Kind, sit_equilibria, sit_thresholds
from sitcontrol.integrator import (
    Constant,
    Impulsive,
    Trajectory,
    first_entry_time,
    integrate,
    integrate_impulsive,
)
from sitcontrol.model import Params, State, basic_offspring_number, sit_field, wild_equilibrium

Policy = Union[Constant, Impulsive]

DEFAULT_HORIZON = 2e6
INFINITY_CUTOFF = 1e6
CHUNK_DAYS = 1000.0
STEADY_TOL = 1e-7
STEADY_WINDOW = 196.0
MAX_KEPT_STEPS = 50_000


@dataclass(frozen=True)
class TargetSpec:
    mt_small: float
    epsilon: float
    e1: State
    y: State


def target_point(p: Params, mt_small: float, epsilon: float = 0.1) -> TargetSpec:
    """Y = E1(mt_small) - (eps, eps, eps), the corner of the switching box."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if not mt_small > 0:
        raise ValueError(f"mt_small must be positive, got {mt_small!r}")
    analysis = sit_equilibria(p, mt_small)
    if analysis.kind is not Kind.PAIR:
        raise ValueError(
            f"mt_small={mt_small:.6g} is not below the release threshold "
            f"M_T1={analysis.mt1:.6g}: no E1 exists"
        )
    e1 = analysis.e1
    y = e1.shifted(-epsilon)
    if min(y) <= 0:
        raise ValueError(f"epsilon={epsilon} too large for E1={tuple(e1)}")
    return TargetSpec(mt_small, epsilon, e1, y)


@dataclass
class EntryRun:
    """Outcome of running a release policy until the box is entered."""

    time: Optional[float]
    state: Optional[np.ndarray]
    trajectory: Trajectory
    reason: str  # "entered", "steady", "horizon"


def _settled(traj: Trajectory, window: float) -> bool:
    """True when the state barely moved over the last ``window`` days.

    A slow passage near a bottleneck still moves by a sizeable fraction of
    the state per window, so this only fires once an attractor is reached.
    """
    if traj.t_end - traj.t0 < window:
        return False
    y = traj.final
    prev = traj(traj.t_end - window)
    return float(np.linalg.norm(y - prev)) < STEADY_TOL * (1.0 + float(np.linalg.norm(y)))


def _trim(traj: Trajectory) -> Trajectory:
    if len(traj.times) <= MAX_KEPT_STEPS:
        return traj
    cut = len(traj.times) - MAX_KEPT_STEPS // 2
    return Trajectory(
        traj.times[cut:], traj.states[cut:], traj.step_y0[cut:], traj.step_k[cut:],
        [e for e in traj.events if e[0] >= traj.times[cut]], traj.status,
    )


def run_until_entry(
    p: Params,
    policy: Policy,
    target: Union[TargetSpec, Sequence[float]],
    x0: Optional[Sequence[float]] = None,
    horizon: float = DEFAULT_HORIZON,
    tol: float = 1e-8,
    *,
    mt0: Optional[float] = None,
    pulse_at_start: bool = True,
) -> EntryRun:
    """Integrate in chunks until entry into [0, Y), a steady regime, or the horizon.

    Constant policies integrate the 3-dim system; impulsive policies carry
    M_T as a fourth component starting at ``mt0`` (default 0), with a pulse
    at t=0 unless ``pulse_at_start`` is False.
    """
    y = np.array(target.y if isinstance(target, TargetSpec) else target, dtype=float)
    if x0 is None:
        x0 = wild_equilibrium(p)
        if x0 is None:
            raise ValueError("no wild equilibrium to start from (R <= 1)")
    x = np.array(x0, dtype=float)[:3]

    def inside(v):
        return bool(np.all(v[:3] < y))

    if isinstance(policy, Constant):
        rhs = sit_field(p, policy.level)
        chunk = CHUNK_DAYS
        window = STEADY_WINDOW

        def advance(state, t0, length):
            return integrate(rhs, state, (t0, t0 + length), tol, stop=inside)

        state = x
    else:
        chunk = policy.tau * math.ceil(CHUNK_DAYS / policy.tau)
        window = policy.tau * math.ceil(STEADY_WINDOW / policy.tau)
        first = [pulse_at_start]

        def advance(state, t0, length):
            seg = integrate_impulsive(p, policy, state, length, tol, t0=t0,
                                      pulse_at_start=first[0], stop=inside)
            first[0] = False
            return seg

        state = np.append(x, 0.0 if mt0 is None else mt0)

    traj: Optional[Trajectory] = None
    t = 0.0
    while t < horizon:
        seg = advance(state, t, min(chunk, horizon - t))
        hit = first_entry_time(seg, y)
        traj = seg if traj is None else _trim(traj.concat(seg))
        if hit is not None:
            return EntryRun(hit, traj(hit), traj, "entered")
        state, t = seg.final, seg.t_end
        if _settled(seg, window):
            return EntryRun(None, None, traj, "steady")
    return EntryRun(None, None, traj, "horizon")


def minimal_entry_time(
    p: Params,
    policy: Policy,
    target: TargetSpec,
    x0: Optional[Sequence[float]] = None,
    horizon: float = DEFAULT_HORIZON,
    tol: float = 1e-8,
) -> Optional[float]:
    """Days until the controlled trajectory enters [0, Y); None if it never does."""
    return run_until_entry(p, policy, target, x0, horizon, tol).time


def epsilon_ratio(p: Params, mt_level: float) -> float:
    """Fraction M*/(M* + M_T) of fertile matings at the wild equilibrium."""
    if mt_level < 0:
        raise ValueError("mt_level must be nonnegative")
    e_star = wild_equilibrium(p)
    if e_star is None:
        raise ValueError("R <= 1: the wild equilibrium does not exist")
    return e_star.m / (e_star.m + mt_level)


class HypothesisError(ValueError):
    """A precondition of the comparison bound does not hold."""


@dataclass(frozen=True)
class AnalyticBound:
    eps_ratio: float
    kappa_plus: float
    kappa_minus: float
    x_plus: float
    x_minus: float
    a0_plus: float
    a0_minus: float
    b0_plus: float
    b0_minus: float
    lambda_coef: float
    t_a: float
    t_m: float
    t_f: float
    bound: float
    upper_state: State


def comparison_matrix(p: Params, mt_level: float) -> np.ndarray:
    """Linear cooperative system dominating the SIT system from below E_e^0."""
    eps = epsilon_ratio(p, mt_level)
    return np.array(
        [
            [-(p.gamma + p.mu_a1), 0.0, p.phi],
            [(1 - p.r) * p.gamma, -p.mu_m, 0.0],
            [p.r * p.gamma * eps, 0.0, -p.mu_f],
        ]
    )


def comparison_start(p: Params) -> State:
    """Upper corner X_e^0 that dominates every state below E*."""
    a = (p.gamma + p.mu_a1) * basic_offspring_number(p) / p.mu_a2
    return State(a, (1 - p.r) * p.gamma * a / p.mu_m, p.r * p.gamma * a / p.mu_f)


@dataclass
class ComparisonModes:
    """Closed-form solution data of the linear comparison system from X_e^0."""

    eps_ratio: float
    kappa_plus: float
    kappa_minus: float
    x_plus: float
    x_minus: float
    a0_plus: float
    a0_minus: float
    b0_plus: float
    b0_minus: float
    upper_state: State

    def sign_pattern_ok(self) -> bool:
        return (self.a0_plus > 0 and self.a0_minus < 0 and self.b0_minus > 0
                and self.kappa_plus < 0 and self.kappa_minus < 0)


def comparison_modes(p: Params, mt_level: float) -> ComparisonModes:
    """Eigen-decomposition of the (A, F) block of :func:`comparison_matrix`."""
    eps = epsilon_ratio(p, mt_level)
    g = p.gamma + p.mu_a1
    root = math.sqrt((g - p.mu_f) ** 2 + 4 * p.phi * p.r * p.gamma * eps)
    x_plus = (g - p.mu_f + root) / (2 * p.phi)
    x_minus = (g - p.mu_f - root) / (2 * p.phi)
    xe = comparison_start(p)
    a_plus = (x_minus * xe.a - xe.f) / (x_minus - x_plus)
    a_minus = (xe.f - x_plus * xe.a) / (x_minus - x_plus)
    return ComparisonModes(
        eps_ratio=eps,
        kappa_plus=(-(g + p.mu_f) + root) / 2,
        kappa_minus=(-(g + p.mu_f) - root) / 2,
        x_plus=x_plus,
        x_minus=x_minus,
        a0_plus=a_plus,
        a0_minus=a_minus,
        b0_plus=x_plus * a_plus,
        b0_minus=x_minus * a_minus,
        upper_state=xe,
    )


def comparison_solution(p: Params, mt_level: float, times) -> np.ndarray:
    """Linear comparison trajectory from X_e^0, shape (len(times), 3)."""
    md = comparison_modes(p, mt_level)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    c = (1 - p.r) * p.gamma
    ep, em, decay = np.exp(md.kappa_plus * t), np.exp(md.kappa_minus * t), np.exp(-p.mu_m * t)
    a = md.a0_plus * ep + md.a0_minus * em
    f = md.b0_plus * ep + md.b0_minus * em
    m = md.upper_state.m * decay
    for coef, kappa, e in ((md.a0_plus, md.kappa_plus, ep), (md.a0_minus, md.kappa_minus, em)):
        if abs(kappa + p.mu_m) < 1e-12:
            m = m + c * coef * t * decay
        else:
            m = m + c * coef * (e - decay) / (p.mu_m + kappa)
    return np.column_stack([a, m, f])


def analytic_time_bound(p: Params, mt_level: float, target: TargetSpec) -> AnalyticBound:
    """Time after which the linear comparison solution lies below Y.

    Because the nonlinear trajectory from below E* stays under the
    comparison solution, the returned ``bound`` is a guarantee time: the
    controlled population is inside the box no later than this.
    """
    R = basic_offspring_number(p)
    eps = epsilon_ratio(p, mt_level)
    g = p.gamma + p.mu_a1
    c = (1 - p.r) * p.gamma
    failures = []
    if not eps * R < 1:
        failures.append(f"eps*R = {eps * R:.6g} must be < 1 (release level too small)")
    if not p.mu_f < min(p.mu_m, g):
        failures.append(f"mu_f={p.mu_f} must be < min(mu_m, gamma + mu_a1) = {min(p.mu_m, g)}")
    if failures:
        raise HypothesisError("; ".join(failures))

    md = comparison_modes(p, mt_level)
    k_plus, k_minus = md.kappa_plus, md.kappa_minus
    if abs(k_minus + p.mu_m) < 1e-12:
        raise HypothesisError("degenerate case kappa_minus = -mu_m (resonant M equation)")
    xe, a_plus, a_minus = md.upper_state, md.a0_plus, md.a0_minus

    if k_minus + p.mu_m > 0:
        lam = xe.m - c * a_minus / (p.mu_m + k_minus) + c * a_plus / (p.mu_m + k_plus)
    else:
        lam = xe.m + c * a_minus / (p.mu_m + k_minus) + c * a_plus / (p.mu_m + k_plus)

    ya, ym, yf = target.y
    t_a = math.log(ya / a_plus) / k_plus
    t_f = math.log(yf / xe.f) / k_plus
    t_m = math.log(ym / lam) / k_plus
    return AnalyticBound(
        eps_ratio=eps,
        kappa_plus=k_plus,
        kappa_minus=k_minus,
        x_plus=md.x_plus,
        x_minus=md.x_minus,
        a0_plus=a_plus,
        a0_minus=a_minus,
        b0_plus=md.b0_plus,
        b0_minus=md.b0_minus,
        lambda_coef=lam,
        t_a=t_a,
        t_m=t_m,
        t_f=t_f,
        bound=max(t_a, t_m, t_f),
        upper_state=xe,
    )
