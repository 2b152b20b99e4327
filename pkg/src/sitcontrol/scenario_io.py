"""Scenario files and trajectory CSV output.

A scenario is an INI document::

    [params]
    gamma = 0.04          ; required, other rates default to the mosquito set

    [release]
    mode = constant       ; or impulsive
    k = 5                 ; multiple of the threshold, or give `level` directly
    tau = 7

    [target]
    mt_small = 800        ; required
    epsilon = 0.1

    [pretreatment]
    mc_percent = 0
    mc_scope = all        ; or pretreatment
    adulticide_days = 0

    [run]
    horizon = 2e6
    tol = 1e-8
    trajectory = out.csv  ; optional CSV path for `campaign`
"""

from __future__ import annotations

import configparser
import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, List, NamedTuple, Optional, Sequence, Union

import numpy as np

from sitcontrol.equilibria import NoPositiveEquilibrium, sit_thresholds
from sitcontrol.integrator import Trajectory
from sitcontrol.model import Params, State
from sitcontrol.strategies import MC_SCOPES, MODES, CampaignConfig, mc_adjusted_params


class ScenarioError(ValueError):
    """Malformed scenario text: syntax, unknown or missing keys, bad numbers."""


class SemanticError(ValueError):
    """Well-formed scenario that describes an impossible campaign."""


_PARAM_KEYS = ("phi", "gamma", "mu_a1", "mu_a2", "r", "mu_f", "mu_m", "mu_t")
_SCHEMA = {
    "params": set(_PARAM_KEYS),
    "release": {"mode", "k", "level", "tau"},
    "target": {"mt_small", "epsilon"},
    "pretreatment": {"mc_percent", "mc_scope", "adulticide_days", "kill_rate", "state"},
    "run": {"horizon", "tol", "post_window", "trajectory"},
}
_TEXT_KEYS = {"mode", "mc_scope", "trajectory", "state"}


@dataclass(frozen=True)
class Scenario:
    config: CampaignConfig
    trajectory_path: Optional[str] = None


def _number(section: str, key: str, raw: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ScenarioError(f"[{section}] {key}: expected a number, got {raw!r}") from None
    if not math.isfinite(value):
        raise ScenarioError(f"[{section}] {key}: value must be finite, got {raw!r}")
    return value


def read_scenario(text: str) -> Scenario:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str  # keep key case so typos are reported verbatim
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"parse error: {exc}") from None

    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ScenarioError(f"unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ScenarioError(f"[{section}] unknown key {key!r}")
            values[(section, key)] = raw if key in _TEXT_KEYS else _number(section, key, raw)

    def get(section, key, default=None, required=False):
        if (section, key) in values:
            return values[(section, key)]
        if required:
            raise ScenarioError(f"[{section}] missing required key {key!r}")
        return default

    gamma = get("params", "gamma", required=True)
    overrides = {k: values[("params", k)] for k in _PARAM_KEYS if k != "gamma" and ("params", k) in values}
    try:
        base = Params.mosquito(gamma, **overrides)
    except ValueError as exc:
        raise SemanticError(f"[params] {exc}") from None

    mode = get("release", "mode", "constant").strip().lower()
    if mode not in MODES:
        raise ScenarioError(f"[release] mode must be one of {MODES}, got {mode!r}")
    k, level = get("release", "k"), get("release", "level")
    if k is None and level is None:
        raise ScenarioError("[release] give either 'k' or 'level'")
    if k is not None and level is not None:
        raise ScenarioError("[release] 'k' and 'level' are mutually exclusive")

    mt_small = get("target", "mt_small", required=True)
    mc = get("pretreatment", "mc_percent", 0.0)
    scope = get("pretreatment", "mc_scope", "all").strip().lower()
    if scope not in MC_SCOPES:
        raise ScenarioError(f"[pretreatment] mc_scope must be one of {MC_SCOPES}, got {scope!r}")
    state = get("pretreatment", "state")
    if state is not None:
        parts = [s for s in state.replace(",", " ").split() if s]
        if len(parts) != 3:
            raise ScenarioError("[pretreatment] state needs three numbers A, M, F")
        state = State(*(_number("pretreatment", "state", s) for s in parts))

    if not 0 <= mc < 100:
        raise SemanticError(f"[pretreatment] mc_percent must lie in [0, 100), got {mc:g}")
    try:
        release_params = mc_adjusted_params(base, mc) if scope == "all" else base
        mt1 = sit_thresholds(release_params)[1]
    except NoPositiveEquilibrium as exc:
        raise SemanticError(str(exc)) from None
    if not 0 < mt_small < mt1:
        raise SemanticError(f"[target] mt_small={mt_small:g} must lie in (0, M_T1={mt1:.6g})")

    try:
        cfg = CampaignConfig(
            base=base,
            sustained_level=mt_small,
            k=k,
            massive_level=level,
            mode=mode,
            tau=get("release", "tau", 7.0),
            mc_percent=mc,
            mc_scope=scope,
            adulticide_days=get("pretreatment", "adulticide_days", 0.0),
            kill_rate=get("pretreatment", "kill_rate"),
            pretreatment_state=state,
            epsilon=get("target", "epsilon", 0.1),
            horizon=get("run", "horizon", 2e6),
            tol=get("run", "tol", 1e-8),
            post_window=get("run", "post_window", 1000.0),
        )
    except ValueError as exc:
        raise SemanticError(str(exc)) from None
    if not 1e-12 <= cfg.tol <= 1e-3:
        raise SemanticError(f"[run] tol must lie in [1e-12, 1e-3], got {cfg.tol:g}")
    if not cfg.epsilon > 0:
        raise SemanticError("[target] epsilon must be positive")
    return Scenario(cfg, get("run", "trajectory"))


def parse_scenario(text: str) -> CampaignConfig:
    return read_scenario(text).config


class Segment(NamedTuple):
    """Part of a trajectory shown under one phase label, up to ``t_stop``."""

    label: str
    trajectory: Trajectory
    t_stop: Optional[float] = None


def fmt(value: float) -> str:
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".10g")


def _sample_times(traj: Trajectory, t_start: float, t_stop: float, dt: Optional[float]) -> np.ndarray:
    if dt is None:
        ts = traj.times[(traj.times >= t_start) & (traj.times <= t_stop)]
        if not len(ts) or ts[-1] < t_stop:
            ts = np.append(ts, t_stop)
        if ts[0] > t_start:
            ts = np.insert(ts, 0, t_start)
        return ts
    n = int(math.floor((t_stop - t_start) / dt + 1e-9))
    ts = t_start + dt * np.arange(n + 1)
    if ts[-1] < t_stop - 1e-9 * max(1.0, abs(t_stop)):
        ts = np.append(ts, t_stop)
    return ts


def trajectory_rows(segments: Sequence[Segment], dt: Optional[float] = None) -> List[list]:
    rows = []
    for i, seg in enumerate(segments):
        traj = seg.trajectory
        stop = seg.t_stop if seg.t_stop is not None else traj.t_end
        start = traj.t0
        ts = _sample_times(traj, start, stop, dt)
        if i + 1 < len(segments):
            ts = ts[ts < stop]  # the next phase owns the boundary
        for t in ts:
            rows.append((float(t), 0, traj(float(t)), seg.label))
        for t, label in traj.events:
            if start <= t <= stop:
                rows.append((float(t), 1, traj(float(t)), label))
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows


def emit_trajectory(
    traj: Union[Trajectory, Sequence[Segment]],
    path: Union[str, Path, IO[str]],
    dt: Optional[float] = None,
    *,
    phase: Optional[str] = None,
) -> int:
    """Write ``t,A,M,F[,MT][,phase]`` rows; returns the number of data rows.

    Rows come from the stored step times (or a grid of spacing ``dt``)
    plus one extra row per recorded event, labelled with the event name.
    """
    segments = [Segment(phase or "", traj)] if isinstance(traj, Trajectory) else list(traj)
    if not segments or any(len(s.trajectory) == 0 for s in segments):
        raise ValueError("nothing to write")
    dims = {s.trajectory.dim for s in segments}
    with_mt = max(dims) == 4
    with_phase = any(s.label for s in segments) or any(s.trajectory.events for s in segments)
    header = ["t", "A", "M", "F"] + (["MT"] if with_mt else []) + (["phase"] if with_phase else [])

    rows = trajectory_rows(segments, dt)
    own = not hasattr(path, "write")
    stream = open(path, "w", newline="", encoding="utf-8") if own else path
    try:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for t, _, y, label in rows:
            vals = [fmt(t)] + [fmt(float(v)) for v in y[:3]]
            if with_mt:
                vals.append(fmt(float(y[3])) if len(y) > 3 else "")
            if with_phase:
                vals.append(label)
            writer.writerow(vals)
    finally:
        if own:
            stream.close()
    return len(rows)


def read_trajectory_csv(source: Union[str, Path, IO[str]]) -> tuple[list, np.ndarray, list]:
    """Parse a file written by :func:`emit_trajectory` into (header, values, phases)."""
    own = not hasattr(source, "read")
    stream = open(source, newline="", encoding="utf-8") if own else source
    try:
        reader = csv.reader(stream)
        header = next(reader)
        n_num = len(header) - (1 if header[-1] == "phase" else 0)
        values, phases = [], []
        for row in reader:
            values.append([float(v) for v in row[:n_num]])
            phases.append(row[n_num] if n_num < len(row) else "")
    finally:
        if own:
            stream.close()
    return header, np.array(values), phases


def csv_text(rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
