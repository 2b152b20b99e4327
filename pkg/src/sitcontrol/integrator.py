"""Adaptive Dormand-Prince 5(4) integration with dense output.

The solver is written out here rather than borrowed so that the step
controller, the clamping policy and pulse restarts are fully under our
control and bit-for-bit deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from sitcontrol.model import ExtendedState, Params, State, impulsive_field

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between 5th and embedded 4th order weights (7 stages, FSAL)
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# quartic dense output, y(t0 + s h) = y0 + h K^T P [s, s^2, s^3, s^4]
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI controller exponents (order 5 pair)
BETA_ERR = 0.7 / 5
BETA_PREV = 0.4 / 5
UNDERSHOOT = 10.0
MIN_TOL, MAX_TOL = 1e-12, 1e-3


class IntegrationError(ArithmeticError):
    """Step-size underflow or a non-finite derivative."""

    def __init__(self, message: str, t: float, y: Sequence[float]):
        super().__init__(f"{message} at t={t:.10g}, y={list(map(float, y))}")
        self.t = t
        self.y = np.array(y, dtype=float)


@dataclass
class Trajectory:
    """Time-ordered states with per-step dense output.

    ``states[i]`` is the value at ``times[i]``. Values are right-continuous:
    at a pulse time the stored state already includes the jump, while the
    step ending there still interpolates to the pre-jump value.
    """

    times: np.ndarray
    states: np.ndarray
    step_y0: np.ndarray
    step_k: np.ndarray
    events: List[Tuple[float, str]] = field(default_factory=list)
    status: str = "complete"

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def final(self) -> np.ndarray:
        return self.states[-1].copy()

    def __len__(self) -> int:
        return len(self.times)

    def step_value(self, i: int, t: float) -> np.ndarray:
        """Interpolate inside step ``i`` (covering times[i]..times[i+1])."""
        h = self.times[i + 1] - self.times[i]
        s = (t - self.times[i]) / h
        powers = np.array([s, s * s, s**3, s**4])
        return self.step_y0[i] + h * (self.step_k[i].T @ (_P @ powers))

    def __call__(self, t: float) -> np.ndarray:
        if t < self.times[0] or t > self.times[-1]:
            raise ValueError(f"t={t} outside [{self.times[0]}, {self.times[-1]}]")
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        if self.times[j] == t:
            return self.states[j].copy()
        return np.maximum(self.step_value(j, t), 0.0)

    at = __call__

    def sample(self, times: Sequence[float]) -> np.ndarray:
        return np.array([self(t) for t in times])

    def state_at(self, t: float) -> State:
        return State.from_array(self(t))

    def concat(self, other: "Trajectory") -> "Trajectory":
        """Append a trajectory that starts where this one ends."""
        if other.t0 != self.t_end:
            raise ValueError("trajectories are not contiguous")
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return Trajectory(
            times=np.concatenate([self.times, other.times[1:]]),
            states=np.concatenate([self.states[:-1], other.states]),
            step_y0=np.concatenate([self.step_y0, other.step_y0]),
            step_k=np.concatenate([self.step_k, other.step_k]),
            events=self.events + other.events,
            status=other.status,
        )


def _rms(x: np.ndarray) -> float:
    return math.sqrt(float(np.dot(x, x)) / len(x))


def _initial_step(rhs, t0, y0, f0, tol, max_step):
    scale = tol * (1.0 + np.abs(y0))
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    f1 = rhs(t0 + h0, y0 + h0 * f0)
    d2 = _rms((f1 - f0) / scale) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, max_step)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    x0: Sequence[float],
    t_span: Tuple[float, float],
    tol: float = 1e-8,
    *,
    max_step: float = math.inf,
    stop: Optional[Callable[[np.ndarray], bool]] = None,
    first_step: Optional[float] = None,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` over ``t_span``.

    Local errors are measured in an RMS norm with weights
    ``tol * (1 + |y|)``. A trial step that lands more than ``10 tol`` below
    zero is rejected and retried with a smaller step; smaller undershoots
    are clamped to zero. ``stop`` is checked after every accepted step and
    ends the run early (status ``"stopped"``) when it returns True.
    """
    if not (MIN_TOL <= tol <= MAX_TOL):
        raise ValueError(f"tol must lie in [{MIN_TOL}, {MAX_TOL}], got {tol}")
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    y = np.array(x0, dtype=float)
    if np.any(y < 0) or not np.all(np.isfinite(y)):
        raise ValueError(f"initial state must be finite and nonnegative, got {y}")

    dim = len(y)
    times, states, ys, ks = [t0], [y.copy()], [], []
    t = t0
    f = rhs(t, y)
    if not np.all(np.isfinite(f)):
        raise IntegrationError("non-finite derivative", t, y)
    h = first_step or _initial_step(rhs, t, y, f, tol, min(max_step, t1 - t0))
    err_prev = 1.0
    K = np.empty((7, dim))
    status = "complete"

    while t < t1:
        min_step = 16 * np.spacing(max(abs(t), 1.0))
        h = min(h, max_step)
        if t + h > t1 or t1 - (t + h) < min_step:
            h = t1 - t
        while True:
            if h < min_step:
                raise IntegrationError("step size underflow", t, y)
            K[0] = f
            for s in range(5):
                K[s + 1] = rhs(t + _C[s + 1] * h, y + h * (_A[s] @ K[: s + 1]))
            y_new = y + h * (_B @ K[:6])
            K[6] = f_new = rhs(t + h, y_new)
            if not (np.all(np.isfinite(f_new)) and np.all(np.isfinite(y_new))):
                h *= MIN_FACTOR
                continue
            scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
            err = _rms(h * (_E @ K) / scale)
            if err <= 1.0 and np.all(y_new >= -UNDERSHOOT * tol):
                break
            if err <= 1.0:
                h *= 0.5
            else:
                h *= max(MIN_FACTOR, SAFETY * err ** (-1 / 5))

        t_new = t + h if t1 - (t + h) >= min_step else t1
        ys.append(y.copy())
        ks.append(K.copy())
        if np.any(y_new < 0):
            y_new = np.maximum(y_new, 0.0)
            f_new = rhs(t_new, y_new)
        t, y, f = t_new, y_new, f_new
        times.append(t)
        states.append(y.copy())

        err = max(err, 1e-10)
        fac = SAFETY * err ** (-BETA_ERR) * err_prev**BETA_PREV
        h *= min(MAX_FACTOR, max(MIN_FACTOR, fac))
        err_prev = err
        if stop is not None and stop(y):
            status = "stopped"
            break

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        step_y0=np.array(ys).reshape(-1, dim),
        step_k=np.array(ks).reshape(-1, 7, dim),
        status=status,
    )


@dataclass(frozen=True)
class Constant:
    """Constant sterile-male stock."""

    level: float

    def __post_init__(self):
        if not (self.level >= 0 and math.isfinite(self.level)):
            raise ValueError(f"release level must be finite and >= 0, got {self.level!r}")


@dataclass(frozen=True)
class Impulsive:
    """Pulses of ``tau * lam`` sterile males every ``tau`` days."""

    lam: float
    tau: float = 7.0

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError(f"release rate must be finite and >= 0, got {self.lam!r}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"period must be positive, got {self.tau!r}")

    @property
    def pulse(self) -> float:
        return self.tau * self.lam

    @classmethod
    def from_pulse(cls, pulse: float, tau: float = 7.0) -> "Impulsive":
        return cls(pulse / tau, tau)


def periodic_mt(t: float, lam: float, tau: float, mu_t: float) -> float:
    """Sterile stock on the periodic attractor of the pulsed release."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    phase = t - math.floor(t / tau) * tau
    return tau * lam / (-math.expm1(-mu_t * tau)) * math.exp(-mu_t * phase)


def _pulse_times(t0: float, t1: float, tau: float) -> List[float]:
    """Multiples of tau in (t0, t1]."""
    n = math.floor(t0 / tau + 1e-12) + 1
    out = []
    while n * tau <= t1 * (1 + 1e-15):
        out.append(n * tau)
        n += 1
    if out and out[-1] > t1:
        out[-1] = t1
    return out


def integrate_impulsive(
    p: Params,
    policy: Impulsive,
    x0: Sequence[float],
    horizon: float,
    tol: float = 1e-8,
    *,
    t0: float = 0.0,
    pulse_at_start: bool = False,
    stop: Optional[Callable[[np.ndarray], bool]] = None,
) -> Trajectory:
    """Integrate (A, M, F, M_T) with jumps M_T += tau*lam at every t = n*tau.

    Pulses fall on the absolute grid of multiples of ``tau`` inside
    ``(t0, t0 + horizon]``; ``pulse_at_start`` also releases at ``t0``.
    Integration restarts after every jump and steps are capped at tau/4.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    x = np.array(ExtendedState.of(list(x0)[:3], list(x0)[3]), dtype=float)
    rhs = impulsive_field(p)
    t_end = t0 + horizon
    events: List[Tuple[float, str]] = []
    if pulse_at_start:
        x[3] += policy.pulse
        events.append((t0, "pulse"))

    cuts = _pulse_times(t0, t_end, policy.tau)
    if not cuts or cuts[-1] < t_end:
        cuts.append(t_end)
    traj: Optional[Trajectory] = None
    start = t0
    first_step = None
    for cut in cuts:
        if cut <= start:
            continue
        seg = integrate(rhs, x, (start, cut), tol, max_step=policy.tau / 4, stop=stop,
                        first_step=first_step)
        first_step = float(seg.times[-1] - seg.times[-2])
        traj = seg if traj is None else traj.concat(seg)
        x = seg.final
        start = cut
        if seg.status == "stopped":
            break
        if abs(cut - round(cut / policy.tau) * policy.tau) < 1e-9 * max(1.0, cut):
            x[3] += policy.pulse
            traj.states[-1] = x
            traj.events.append((cut, "pulse"))
            if stop is not None and stop(x):
                traj.status = "stopped"
                break
    traj.events = events + traj.events
    return traj


def first_entry_time(traj: Trajectory, y: Sequence[float], *, resolution: float = 1e-6,
                     samples_per_step: int = 8) -> Optional[float]:
    """First time at which A, M and F are all strictly below ``y``.

    Each step is scanned at a few interior points of its dense output; the
    first inside sample is refined by bisection against the last outside
    one. Returns None when the box is never entered.
    """
    target = np.asarray(y, dtype=float)[:3]
    if not np.all(target > 0):
        raise ValueError("target must be componentwise positive")

    def inside(v):
        return bool(np.all(v[:3] < target))

    if inside(traj.states[0]):
        return traj.t0
    fractions = np.arange(1, samples_per_step + 1) / samples_per_step
    for i in range(len(traj.times) - 1):
        ta, tb = traj.times[i], traj.times[i + 1]
        # cheap skip: far from the box at both ends and along the scan
        lo = ta
        hit = None
        for s in fractions:
            tm = ta + s * (tb - ta)
            v = traj.step_value(i, tm) if s < 1 else traj.states[i + 1]
            if inside(v):
                hit = tm
                break
            lo = tm
        if hit is None:
            continue
        hi = hit
        while hi - lo > resolution:
            mid = 0.5 * (lo + hi)
            if inside(traj.step_value(i, mid)):
                hi = mid
            else:
                lo = mid
        return float(hi)
    return None
