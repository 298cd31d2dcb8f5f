"""Batch experiment harness.

Designs pilots by any registered method, evaluates the full metric set, and
sweeps power / correlation grids into flat result tables that serialize to
CSV or JSON with full double precision.  Identical spec and seed give a
byte-identical table; per-point solver failures are recorded in their row
instead of aborting the grid.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields

import numpy as np

from . import barrier, closed_form, metrics, model, two_user
from .barrier import BarrierSettings
from .model import NetworkConfig

METHODS = (
    "closed-form",
    "first",
    "mse-opt",
    "mi-opt",
    "mse-fair",
    "mi-fair",
    "two-user-mse",
    "two-user-mi",
    "uniform",
)


@dataclass
class ExperimentSpec:
    """One sweep: a base configuration, methods to run, and the grid."""

    config: dict
    methods: tuple[str, ...]
    KP_dB: tuple[float, ...] = ()
    rho: tuple[float, ...] = ()
    seed: int = 0
    solver: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.methods:
            raise ValueError("need at least one method")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}; choose from {METHODS}")
        if not self.KP_dB and not self.rho:
            raise ValueError("need a non-empty sweep grid (KP_dB and/or rho)")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        sweep = d.pop("sweep", {})
        kp = sweep.get("KP_dB", d.pop("KP_dB", ()))
        rho = sweep.get("rho", d.pop("rho", ()))
        kp = tuple(kp) if np.iterable(kp) else (kp,)
        rho = tuple(rho) if np.iterable(rho) else (rho,)
        return cls(
            config=d["config"],
            methods=tuple(d["methods"]),
            KP_dB=kp,
            rho=rho,
            seed=int(d.get("seed", 0)),
            solver=dict(d.get("solver", {})),
        )


@dataclass
class ResultRow:
    """One method at one grid point; flat scalars only, ready for CSV."""

    method: str
    KP_dB: float
    rho: float
    status: str
    J_norm: float = math.nan
    I_norm: float = math.nan
    eve_norm: float = math.nan
    J_M: float = math.nan
    I_M: float = math.nan
    fairness_mse: float = math.nan
    fairness_mi: float = math.nan
    iterations: int = 0
    kkt_residual: float = math.nan
    rank_ok: bool = False
    extra: dict = field(default_factory=dict)  # per-user / per-pair columns


def _grid_config(spec: ExperimentSpec, kp_db, rho) -> NetworkConfig:
    d = dict(spec.config)
    if kp_db is not None:
        d.pop("P", None)
        d["KP_dB"] = kp_db
    if rho is not None:
        d.pop("R", None)
        d["rho"] = rho
    return model.config_from_dict(d)


def _design(cfg: NetworkConfig, method: str, settings: BarrierSettings):
    """Run one design method; returns (PilotFactor, iterations, trace or None)."""
    if method == "closed-form":
        return closed_form.closed_form_factor(cfg), 0, None
    if method == "first":
        return closed_form.baseline_dft_factor(cfg), 0, None
    if method == "mse-opt":
        pf, tr = barrier.solve_min_sum_mse(cfg, settings)
        return pf, tr.iterations, tr
    if method == "mi-opt":
        pf, tr = barrier.solve_max_sum_mi(cfg, settings)
        return pf, tr.iterations, tr
    if method == "mse-fair":
        pf, _, tr = barrier.solve_minmax_mse(cfg, settings)
        return pf, tr.iterations, tr
    if method == "mi-fair":
        pf, _, tr = barrier.solve_minmax_mi(cfg, settings)
        return pf, tr.iterations, tr
    if method == "two-user-mse":
        alloc = two_user.mse_decoupled_allocation(cfg)
        return two_user.assemble_two_user_pilot(cfg, alloc), 0, None
    if method == "two-user-mi":
        alloc, _ = two_user.mi_alternating_bisection(cfg)
        return two_user.assemble_two_user_pilot(cfg, alloc), 0, None
    if method == "uniform":
        alloc = two_user.uniform_allocation(cfg)
        return two_user.assemble_two_user_pilot(cfg, alloc), 0, None
    raise ValueError(f"unknown method {method!r}")


def evaluate_point(spec: ExperimentSpec, method: str, kp_db, rho) -> ResultRow:
    row = ResultRow(method=method,
                    KP_dB=float("nan") if kp_db is None else float(kp_db),
                    rho=float("nan") if rho is None else float(rho),
                    status="ok")
    try:
        cfg = _grid_config(spec, kp_db, rho)
        settings = BarrierSettings(**spec.solver) if spec.solver else BarrierSettings()
        pf, iters, trace = _design(cfg, method, settings)
        rep = metrics.report(cfg, pf)
        row.J_norm, row.I_norm, row.eve_norm = rep.J_norm, rep.I_norm, rep.eve_norm
        row.J_M, row.I_M = rep.J_M, rep.I_M
        row.fairness_mse = float(rep.mse_per_user.max() / rep.mse_per_user.min())
        mis = np.array(list(rep.mi_per_pair.values()))
        row.fairness_mi = float(mis.max() / mis.min()) if mis.min() > 0 else math.nan
        row.iterations = iters
        row.kkt_residual = closed_form.kkt_residual_mse(cfg, pf.F)[0]
        rank = model.validate_anece(cfg, model.assemble_pilot(cfg, pf))
        row.rank_ok = rank.passed
        for i, v in enumerate(rep.mse_per_user):
            row.extra[f"mse_user_{i + 1}"] = float(v)
        for (i, j), v in rep.mi_per_pair.items():
            row.extra[f"mi_pair_{i + 1}_{j + 1}"] = float(v)
        for i, v in enumerate(rep.eve_mse_per_user):
            row.extra[f"eve_user_{i + 1}"] = float(v)
    except Exception as exc:  # per-row failures stay in the table
        row.status = f"error: {type(exc).__name__}: {exc}"
    return row


def run(spec: ExperimentSpec, jobs: int = 1) -> list[ResultRow]:
    """Evaluate the full |methods| x |grid| cross product, in grid order.

    Grid points can be evaluated concurrently (jobs > 1); the table order is
    method-major / grid-minor regardless of scheduling, and results are
    deterministic for a given spec and seed.
    """
    kp_grid = list(spec.KP_dB) or [None]
    rho_grid = list(spec.rho) or [None]
    tasks = [(m, kp, rh) for m in spec.methods for kp in kp_grid for rh in rho_grid]
    if jobs <= 1:
        return [evaluate_point(spec, *task) for task in tasks]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda task: evaluate_point(spec, *task), tasks))


def compare_fairness(spec: ExperimentSpec, jobs: int = 1) -> list[dict]:
    """Fairness-ratio table: worst-case vs equally-weighted solvers per grid point.

    Runs mse-opt / mse-fair / mi-opt / mi-fair and emits the four ratio
    curves (max over users or pairs divided by min).
    """
    methods = ("mse-opt", "mse-fair", "mi-opt", "mi-fair")
    base = ExperimentSpec(config=spec.config, methods=methods,
                          KP_dB=spec.KP_dB, rho=spec.rho, seed=spec.seed,
                          solver=spec.solver)
    rows = run(base, jobs=jobs)
    kp_grid = list(spec.KP_dB) or [None]
    rho_grid = list(spec.rho) or [None]
    n_grid = len(kp_grid) * len(rho_grid)
    cols = {"mse-opt": "ratio_mse_sum", "mse-fair": "ratio_mse_fair",
            "mi-opt": "ratio_mi_sum", "mi-fair": "ratio_mi_fair"}
    out = []
    for gi in range(n_grid):
        entry = {"KP_dB": rows[gi].KP_dB, "rho": rows[gi].rho}
        for mi, method in enumerate(methods):
            r = rows[mi * n_grid + gi]
            entry[cols[method]] = r.fairness_mse if method.startswith("mse") else r.fairness_mi
            entry[f"status_{method}"] = r.status
        out.append(entry)
    return out


def _columns(rows: list[ResultRow]) -> list[str]:
    head = [f.name for f in fields(ResultRow) if f.name != "extra"]
    extra = []
    for row in rows:
        for k in row.extra:
            if k not in extra:
                extra.append(k)
    return head + sorted(extra)


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)  # shortest round-tripping decimal
    return str(value)


def emit(rows: list[ResultRow], fmt: str, path) -> None:
    """Write the result table as CSV or JSON with round-tripping precision."""
    cols = _columns(rows)
    records = []
    for row in rows:
        rec = {f.name: getattr(row, f.name) for f in fields(row) if f.name != "extra"}
        rec.update(row.extra)
        records.append(rec)
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(cols)
            for rec in records:
                w.writerow([_cell(rec[c]) if c in rec else "" for c in cols])
    elif fmt == "json":
        with open(path, "w") as f:
            json.dump({"columns": cols, "rows": records}, f, indent=1)
            f.write("\n")
    else:
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")


def parse_csv(path) -> list[ResultRow]:
    """Read back a table written by emit(..., 'csv', ...)."""
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        names = {f.name for f in fields(ResultRow)}
        for rec in reader:
            row = ResultRow(method=rec["method"], KP_dB=float(rec["KP_dB"]),
                            rho=float(rec["rho"]), status=rec["status"])
            for key, raw in rec.items():
                if key in ("method", "KP_dB", "rho", "status") or raw == "":
                    continue
                if key == "iterations":
                    row.iterations = int(raw)
                elif key == "rank_ok":
                    row.rank_ok = raw == "true"
                elif key in names:
                    setattr(row, key, float(raw))
                else:
                    row.extra[key] = float(raw)
            out.append(row)
    return out
