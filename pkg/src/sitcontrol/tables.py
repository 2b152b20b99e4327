"""Recompute the reference tables and diff them against the stored values."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple, Union

from sitcontrol.equilibria import periodic_threshold, sit_equilibria, sit_thresholds
from sitcontrol.model import Params, State, basic_offspring_number, wild_equilibrium
from sitcontrol.strategies import (
    CampaignConfig,
    adulticide_pretreatment,
    mc_adjusted_params,
    sweep,
)

GAMMAS = (0.04, 0.06, 0.08, 0.1)
TAU = 7.0

Value = Union[float, Tuple[float, ...], None]


@lru_cache(maxsize=1)
def reference_data() -> dict:
    text = resources.files("sitcontrol").joinpath("data/reference_tables.json").read_text("utf-8")
    return json.loads(text)


def supported_tables() -> List[str]:
    return list(reference_data()["tables"])


def _decode(raw) -> Value:
    if raw == "inf":
        return math.inf
    if isinstance(raw, list):
        return tuple(float(v) for v in raw)
    return float(raw)


@dataclass
class DiffEntry:
    row: str
    column: str
    component: str
    computed: float
    reference: float
    rel_error: float


@dataclass
class TableArtifact:
    table_id: str
    title: str
    kind: str
    rows: List[str]
    columns: List[str]
    computed: Dict[str, Dict[str, Value]]
    reference: Dict[str, Dict[str, Value]]
    notes: str = ""
    errors: Dict[Tuple[str, str], str] = field(default_factory=dict)

    def cell(self, row: str, column: str) -> Value:
        return self.computed[row][column]

    def diff(self) -> List[DiffEntry]:
        out = []
        names = {"states": ("A", "M", "F"), "gain": ("time", "gain")}.get(self.kind, ("",))
        for row in self.rows:
            for col in self.columns:
                ref = self.reference.get(row, {}).get(col)
                if ref is None:
                    continue
                got = self.computed[row].get(col)
                refs = ref if isinstance(ref, tuple) else (ref,)
                gots = got if isinstance(got, tuple) else (got,) * len(refs)
                for name, c, r in zip(names, gots, refs):
                    c = math.nan if c is None else c
                    out.append(DiffEntry(row, col, name, c, r, relative_error(c, r)))
        return out


def relative_error(computed: float, reference: float) -> float:
    if math.isnan(computed):
        return math.nan
    if math.isinf(computed) or math.isinf(reference):
        return 0.0 if computed == reference else math.inf
    if reference == 0:
        return 0.0 if computed == 0 else math.inf
    return abs(computed - reference) / abs(reference)


def _g(label: str) -> float:
    return float(label)


def _params(gamma: float) -> Params:
    return Params.mosquito(gamma)


def _quantities_3() -> Dict[str, Dict[str, Value]]:
    out: Dict[str, Dict[str, Value]] = {k: {} for k in ("R", "A*", "M*", "F*", "M_T1", "M_T1^per")}
    for g in GAMMAS:
        p, col = _params(g), f"{g:g}"
        e = wild_equilibrium(p)
        out["R"][col] = basic_offspring_number(p)
        out["A*"][col], out["M*"][col], out["F*"][col] = e
        out["M_T1"][col] = sit_thresholds(p)[1]
        out["M_T1^per"][col] = periodic_threshold(p, TAU)
    return out


def _quantities_8() -> Dict[str, Dict[str, Value]]:
    out: Dict[str, Dict[str, Value]] = {k: {} for k in ("mu_A2", "A*", "M*", "F*")}
    for mc in (0, 20, 40):
        for g in GAMMAS:
            p = mc_adjusted_params(_params(g), mc)
            col = f"MC={mc} g={g:g}"
            e = wild_equilibrium(p)
            out["mu_A2"][col] = p.mu_a2
            out["A*"][col], out["M*"][col], out["F*"][col] = e
    return out


def _parse_col(col: str) -> dict:
    """'impulsive k=2 M=500' -> {'mode': 'impulsive', 'k': 2.0, 'M': 500.0}."""
    out = {}
    for tok in col.split():
        if "=" in tok:
            key, val = tok.split("=")
            out[key] = float(val)
        else:
            out["mode"] = tok
    return out


def _cfg(row, cell, mode_default, horizon, tol, extra) -> CampaignConfig:
    kwargs = {}
    state_for = extra.get("state_for")
    if state_for is not None:
        kwargs["pretreatment_state"] = state_for(row)
    return CampaignConfig(
        base=_params(_g(row)), sustained_level=cell["M"], k=cell["k"],
        mode=cell.get("mode", mode_default), tau=TAU, horizon=horizon, tol=tol,
        post_window=0.0, mc_percent=extra.get("mc", 0.0), mc_scope=extra.get("scope", "all"),
        **kwargs,
    )


def _run_entry_grid(cells, configs, threads) -> Tuple[Dict, Dict]:
    results = sweep(configs, threads)
    computed: Dict[str, Dict[str, Value]] = {}
    errors = {}
    for (row, col), res in zip(cells, results):
        if res.error:
            errors[(row, col)] = res.error
            value = None
        else:
            value = math.inf if res.entry_time is None else res.entry_time
        computed.setdefault(row, {})[col] = value
    return computed, errors


def reproduce_table(
    table_id: Union[int, str], *, threads: Optional[int] = None, horizon: float = 2e6,
    tol: float = 1e-8,
) -> TableArtifact:
    """Recompute one reference table; the artifact carries both value sets."""
    tid = str(table_id)
    tables = reference_data()["tables"]
    if tid not in tables:
        raise KeyError(f"unsupported table {tid!r}; choose from {', '.join(tables)}")
    meta = tables[tid]
    reference = {row: {col: _decode(v) for col, v in cols.items()} for row, cols in meta["cells"].items()}
    rows = list(reference)
    columns: List[str] = []
    for cols in reference.values():
        columns += [c for c in cols if c not in columns]
    errors: Dict[Tuple[str, str], str] = {}
    kind = meta["kind"]

    if tid == "3":
        computed = _quantities_3()
    elif tid == "8":
        computed = _quantities_8()
    elif tid in ("4", "8b"):
        computed = {}
        for row, cols in reference.items():
            for col in cols:
                cell = _parse_col(col)
                p = mc_adjusted_params(_params(_g(row)), cell.get("MC", 0.0))
                computed.setdefault(row, {})[col] = tuple(sit_equilibria(p, cell["M"]).e1)
    elif tid in ("11", "12"):
        computed = {}
        for row, cols in reference.items():
            for col in cols:
                p = mc_adjusted_params(_params(_g(row)), _parse_col(col)["MC"])
                computed.setdefault(row, {})[col] = tuple(adulticide_pretreatment(p, 7.0))
    elif kind == "entry":
        cells, configs = [], []
        for row, cols in reference.items():
            for col in cols:
                cells.append((row, col))
                configs.append(_cfg(row, _parse_col(col), meta["mode"], horizon, tol, {}))
        computed, errors = _run_entry_grid(cells, configs, threads)
    elif kind == "gain":
        extra = {"mc": float(meta["mc"]), "scope": meta["scope"]}
        if meta["adulticide"]:
            states = tables["11" if meta["mc"] == 0 else "12"]["cells"]
            mc_col = f"MC={int(meta['mc'])}"
            extra["state_for"] = lambda row: State(*states[row][mc_col])
        cells, configs = [], []
        for row, cols in reference.items():
            for col in cols:
                cell = _parse_col(col)
                cells.append((row, col))
                configs.append(_cfg(row, cell, "constant", horizon, tol, extra))
        # SIT alone from the untreated wild equilibrium, for the gain
        for row, col in list(cells):
            configs.append(_cfg(row, _parse_col(col), "constant", horizon, tol, {}))
        results = sweep(configs, threads)
        half = len(cells)
        computed = {}
        for i, (row, col) in enumerate(cells):
            comb, alone = results[i], results[half + i]
            err = comb.error or alone.error
            if err:
                errors[(row, col)] = err
                computed.setdefault(row, {})[col] = None
                continue
            t_comb = math.inf if comb.entry_time is None else comb.entry_time
            t_alone = math.inf if alone.entry_time is None else alone.entry_time
            gain = t_alone - t_comb if math.isfinite(t_comb + t_alone) else math.nan
            computed.setdefault(row, {})[col] = (t_comb, gain)
    else:  # pragma: no cover - guarded by the data file
        raise KeyError(tid)

    return TableArtifact(tid, meta["title"], kind, rows, columns, computed, reference,
                         meta.get("notes", ""), errors)


def format_value(value: Value, kind: str, *, pretty: bool = True) -> str:
    if value is None:
        return "error"
    if isinstance(value, tuple):
        if kind == "gain":
            t, g = value
            gain = "?" if math.isnan(g) else f"{g:.0f}"
            return f"{format_value(t, 'entry', pretty=pretty)}({gain})"
        return "(" + ", ".join(f"{v:.4g}" for v in value) + ")"
    if math.isinf(value):
        return "∞" if pretty else "inf"
    if kind == "entry":
        return f"{value:.1f}"
    return f"{value:.6g}"


def render_pretty(art: TableArtifact) -> str:
    head = ["", *art.columns]
    body = [[row, *(format_value(art.computed[row].get(c), art.kind) for c in art.columns)]
            for row in art.rows]
    widths = [max(len(r[i]) for r in [head, *body]) for i in range(len(head))]
    lines = [f"Table {art.table_id}: {art.title}", ""]
    for r in [head, *body]:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(r, widths)))
    lines += ["", "cell-by-cell comparison (computed vs reference, relative error):"]
    for d in art.diff():
        name = f"{d.row} | {d.column}" + (f" | {d.component}" if d.component else "")
        comp = format_value(d.computed, "value")
        ref = format_value(d.reference, "value")
        err = "n/a" if math.isnan(d.rel_error) else ("∞" if math.isinf(d.rel_error) else f"{100 * d.rel_error:.2f}%")
        lines.append(f"  {name}: {comp} vs {ref} ({err})")
    for (row, col), msg in art.errors.items():
        lines.append(f"  {row} | {col}: error {msg}")
    if art.notes:
        lines += ["", f"note: {art.notes}"]
    return "\n".join(lines) + "\n"


def render_csv(art: TableArtifact) -> str:
    """Long-format diff report, one line per compared number."""
    from sitcontrol.scenario_io import csv_text, fmt

    rows = [["table", "row", "column", "component", "computed", "reference", "rel_error"]]
    for d in art.diff():
        rows.append([art.table_id, d.row, d.column, d.component, fmt(d.computed),
                     fmt(d.reference), "nan" if math.isnan(d.rel_error) else fmt(d.rel_error)])
    return csv_text(rows)
