"""Command line interface.

Subcommands:
  design    build a pilot with one method and write it as JSON
  evaluate  score a stored pilot (or a method) on the selected metrics
  sweep     run an experiment spec over its grid and write CSV/JSON,
            optionally rendering figures next to the table
  fairness  run the worst-case vs sum-criterion comparison over a KP grid

Pilot files carry complex matrices as row-major [re, im] pair arrays with
explicit dimensions.  Exit code 0 on success, 1 on fatal configuration or
input errors (per-point solver failures inside a sweep stay in the table).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import experiments, figures, metrics, model
from .experiments import ExperimentSpec
from .model import PilotFactor, StackedPilot


def _matrix_to_json(A) -> dict:
    A = np.asarray(A, dtype=np.complex128)
    return {
        "rows": A.shape[0],
        "cols": A.shape[1],
        "entries": [[float(z.real), float(z.imag)] for z in A.ravel()],
    }


def _matrix_from_json(obj) -> np.ndarray:
    entries = np.asarray(obj["entries"], dtype=float)
    if entries.shape != (obj["rows"] * obj["cols"], 2):
        raise ValueError("pilot matrix entries do not match the declared dimensions")
    flat = entries[:, 0] + 1j * entries[:, 1]
    return flat.reshape(obj["rows"], obj["cols"])


def write_pilot(path, cfg, pf: PilotFactor) -> None:
    sp = model.assemble_pilot(cfg, pf)
    doc = {"P": _matrix_to_json(sp.P), "F": _matrix_to_json(pf.F), "V": _matrix_to_json(pf.V)}
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def read_pilot(path, cfg):
    """Load a pilot file; accepts P alone or the (F, V) factor pair."""
    with open(path) as f:
        doc = json.load(f)
    if "F" in doc and "V" in doc:
        return PilotFactor(F=_matrix_from_json(doc["F"]), V=_matrix_from_json(doc["V"]))
    if "P" in doc:
        return StackedPilot(P=_matrix_from_json(doc["P"]), N=cfg.N)
    raise ValueError("pilot file must contain either P or the F/V pair")


def _cmd_design(args) -> int:
    cfg = model.load_config(args.config)
    settings = experiments.BarrierSettings(**json.loads(args.solver)) if args.solver \
        else experiments.BarrierSettings()
    pf, iters, _ = experiments._design(cfg, args.method, settings)
    write_pilot(args.out, cfg, pf)
    rank = model.validate_anece(cfg, model.assemble_pilot(cfg, pf))
    print(f"wrote {args.out} (method={args.method}, iterations={iters}, "
          f"rank {'ok' if rank.passed else 'FAILED'})")
    return 0


def _cmd_evaluate(args) -> int:
    cfg = model.load_config(args.config)
    pilot = read_pilot(args.pilot, cfg)
    wanted = args.metrics.split(",")
    out = {}
    if "mse" in wanted:
        per_user, J = metrics.user_mse(cfg, pilot)
        out["mse_per_user"] = per_user.tolist()
        out["J_M"] = J
    if "mi" in wanted:
        per_pair, I = metrics.sum_mi(cfg, pilot)
        out["mi_per_pair"] = {f"{i + 1},{j + 1}": v for (i, j), v in per_pair.items()}
        out["I_M"] = I
    if "eve" in wanted:
        per_user, eve = metrics.eve_mse(cfg, pilot)
        out["eve_mse_per_user"] = per_user.tolist()
        out["eve_norm"] = eve
    if "mse" in wanted and "mi" in wanted:
        try:
            out["J_norm"], out["I_norm"] = metrics.normalize(cfg, out["J_M"], out["I_M"])
        except ValueError:
            pass
    json.dump(out, sys.stdout, indent=1)
    print()
    return 0


def _cmd_sweep(args) -> int:
    with open(args.spec) as f:
        spec = ExperimentSpec.from_dict(json.load(f))
    rows = experiments.run(spec, jobs=args.jobs)
    fmt = "json" if str(args.out).endswith(".json") else "csv"
    experiments.emit(rows, fmt, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    if args.figures:
        for path in figures.render_sweep_figures(rows, args.figures):
            print(f"wrote {path}")
    failed = [r for r in rows if r.status != "ok"]
    if failed:
        print(f"{len(failed)} row(s) recorded solver errors", file=sys.stderr)
    return 0


def _cmd_fairness(args) -> int:
    with open(args.spec) as f:
        spec = ExperimentSpec.from_dict(json.load(f))
    entries = experiments.compare_fairness(spec, jobs=args.jobs)
    cols = list(entries[0].keys())
    with open(args.out, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        w.writerows(entries)
    print(f"wrote {args.out} ({len(entries)} rows)")
    if args.figures:
        for path in figures.render_fairness_figure(entries, args.figures):
            print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="anece", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design a pilot and write it as JSON")
    p.add_argument("--config", required=True)
    p.add_argument("--method", required=True, choices=experiments.METHODS)
    p.add_argument("--out", required=True)
    p.add_argument("--solver", help="JSON object of barrier solver settings")
    p.set_defaults(fn=_cmd_design)

    p = sub.add_parser("evaluate", help="evaluate a stored pilot")
    p.add_argument("--config", required=True)
    p.add_argument("--pilot", required=True)
    p.add_argument("--metrics", default="mse,mi,eve")
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("sweep", help="run an experiment spec over its grid")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--figures", help="directory for rendered figures")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("fairness", help="worst-case vs sum-criterion ratio table")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--figures", help="directory for rendered figures")
    p.set_defaults(fn=_cmd_fairness)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (model.ConfigError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
