"""Mechanical control, adulticide pretreatment and two-phase release campaigns."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from sitcontrol.entry_time import DEFAULT_HORIZON, TargetSpec, run_until_entry, target_point
from sitcontrol.equilibria import periodic_threshold, sit_thresholds
from sitcontrol.integrator import Constant, Impulsive, Trajectory, integrate, integrate_impulsive
from sitcontrol.model import Params, State, basic_offspring_number, sit_field, wild_equilibrium

MODES = ("constant", "impulsive")
MC_SCOPES = ("all", "pretreatment")


def mc_adjusted_params(p: Params, mc_percent: float) -> Params:
    """Raise mu_a2 so that the wild aquatic equilibrium drops by ``mc_percent``%."""
    if not 0 <= mc_percent < 100:
        raise ValueError(f"mc_percent must lie in [0, 100), got {mc_percent!r}")
    if mc_percent == 0:
        return p
    e_star = wild_equilibrium(p)
    if e_star is None:
        raise ValueError("R <= 1: nothing to reduce")
    R = basic_offspring_number(p)
    mu_a2 = (p.gamma + p.mu_a1) * (R - 1) / ((1 - mc_percent / 100) * e_star.a)
    return replace(p, mu_a2=mu_a2)


def adulticide_pretreatment(
    p: Params, days: float, kill_rate: Optional[float] = None, tol: float = 1e-10
) -> State:
    """State of the wild population after ``days`` of adulticide starting from E*.

    By default every adult is killed at t=0 and the population then evolves
    freely. With ``kill_rate`` the adults instead suffer an extra constant
    mortality (per day) over the whole treatment window.
    """
    if days < 0:
        raise ValueError("days must be nonnegative")
    e_star = wild_equilibrium(p)
    if e_star is None:
        raise ValueError("R <= 1: no wild equilibrium to treat")
    if kill_rate is None:
        x0, params = State(e_star.a, 0.0, 0.0), p
    else:
        if kill_rate < 0:
            raise ValueError("kill_rate must be nonnegative")
        x0 = e_star
        params = replace(p, mu_m=p.mu_m + kill_rate, mu_f=p.mu_f + kill_rate)
    if days == 0:
        return x0
    traj = integrate(sit_field(params, 0.0), x0, (0.0, days), tol)
    return State.from_array(traj.final)


@dataclass(frozen=True)
class CampaignConfig:
    """Massive releases until the box [0, Y) is entered, then sustained releases.

    ``k`` multiplies M_T1 (constant mode) or the periodic pulse threshold
    (impulsive mode) unless ``massive_level`` gives the level or pulse size
    directly. With ``mc_scope="pretreatment"`` mechanical control only shapes
    the starting state; releases and the box then use the base parameters.
    """

    base: Params
    sustained_level: float
    k: Optional[float] = None
    massive_level: Optional[float] = None
    mode: str = "constant"
    tau: float = 7.0
    mc_percent: float = 0.0
    mc_scope: str = "all"
    adulticide_days: float = 0.0
    kill_rate: Optional[float] = None
    pretreatment_state: Optional[State] = None
    epsilon: float = 0.1
    horizon: float = DEFAULT_HORIZON
    tol: float = 1e-8
    post_window: float = 1000.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mc_scope not in MC_SCOPES:
            raise ValueError(f"mc_scope must be one of {MC_SCOPES}, got {self.mc_scope!r}")
        if not 0 <= self.mc_percent < 100:
            raise ValueError(f"mc_percent must lie in [0, 100), got {self.mc_percent!r}")
        if (self.k is None) == (self.massive_level is None):
            raise ValueError("give exactly one of k and massive_level")
        if self.k is not None and not self.k > 0:
            raise ValueError("k must be positive")
        if self.massive_level is not None and not self.massive_level > 0:
            raise ValueError("massive_level must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.horizon > 0 or self.post_window < 0:
            raise ValueError("horizon must be positive and post_window nonnegative")

    @property
    def release_params(self) -> Params:
        if self.mc_scope == "all":
            return mc_adjusted_params(self.base, self.mc_percent)
        return self.base

    def massive_amount(self) -> float:
        """Constant level, or pulse size tau*Lambda, of the massive phase."""
        if self.massive_level is not None:
            return self.massive_level
        p = self.release_params
        if self.mode == "constant":
            return self.k * sit_thresholds(p)[1]
        return self.k * periodic_threshold(p, self.tau)


@dataclass
class CampaignResult:
    params_used: Params
    pre_state: State
    target: TargetSpec
    massive_amount: float
    entry_time: Optional[float]
    switch_state: Optional[State]
    switch_mt: Optional[float]
    containment_ok: Optional[bool]
    final_state: Optional[State]
    massive: Trajectory
    sustained: Optional[Trajectory]
    reason: str


def starting_state(cfg: CampaignConfig) -> State:
    if cfg.pretreatment_state is not None:
        return State(*cfg.pretreatment_state)
    p_mc = mc_adjusted_params(cfg.base, cfg.mc_percent)
    if cfg.adulticide_days > 0:
        return adulticide_pretreatment(p_mc, cfg.adulticide_days, cfg.kill_rate)
    return wild_equilibrium(p_mc)


def _contained(states: np.ndarray, box: State, start: State) -> bool:
    e1 = np.array(box)
    inside = bool(np.all(states[:, :3] < e1))
    return inside and bool(np.all(states[-1, :3] < np.array(start)))


def run_campaign(cfg: CampaignConfig) -> CampaignResult:
    p = cfg.release_params
    target = target_point(p, cfg.sustained_level, cfg.epsilon)
    x0 = starting_state(cfg)
    amount = cfg.massive_amount()
    if cfg.mode == "constant":
        policy = Constant(amount)
    else:
        policy = Impulsive.from_pulse(amount, cfg.tau)

    run = run_until_entry(p, policy, target, x0, cfg.horizon, cfg.tol)
    result = CampaignResult(
        params_used=p, pre_state=State(*x0), target=target, massive_amount=amount,
        entry_time=run.time, switch_state=None, switch_mt=None, containment_ok=None,
        final_state=None, massive=run.trajectory, sustained=None, reason=run.reason,
    )
    if run.time is None:
        return result

    switch = State.from_array(run.state)
    result.switch_state = switch
    if cfg.post_window > 0:
        t0 = run.time
        if cfg.mode == "constant":
            post = integrate(sit_field(p, cfg.sustained_level), switch,
                             (t0, t0 + cfg.post_window), cfg.tol)
        else:
            result.switch_mt = float(run.state[3])
            post = integrate_impulsive(
                p, Impulsive.from_pulse(cfg.sustained_level, cfg.tau), run.state,
                cfg.post_window, cfg.tol, t0=t0,
            )
        result.sustained = post
        result.final_state = State.from_array(post.final)
        result.containment_ok = _contained(post.states, target.e1, switch)
    return result


@dataclass
class SweepCell:
    index: int
    config: CampaignConfig
    entry_time: Optional[float] = None
    switch_state: Optional[State] = None
    reason: str = ""
    error: Optional[str] = None


def _run_cell(args) -> SweepCell:
    index, cfg = args
    cell = SweepCell(index, cfg)
    try:
        res = run_campaign(replace(cfg, post_window=0.0))
        cell.entry_time, cell.switch_state, cell.reason = res.entry_time, res.switch_state, res.reason
    except Exception as exc:  # recorded per cell, the sweep carries on
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def sweep(configs: Sequence[CampaignConfig], threads: Optional[int] = None) -> List[SweepCell]:
    """Entry times for many independent campaigns, in input order."""
    jobs = list(enumerate(configs))
    if not jobs:
        return []
    workers = threads or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1 or len(jobs) == 1:
        return [_run_cell(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        cells = list(pool.map(_run_cell, jobs))
    return sorted(cells, key=lambda c: c.index)


def adulticide_gain(alone: Optional[float], combined: Optional[float]) -> Optional[float]:
    """Days saved by the pretreatment; None when either run never enters."""
    if alone is None or combined is None or math.isinf(alone) or math.isinf(combined):
        return None
    return alone - combined
