"""Batch command-line surface.

Subcommands: ``estimate``, ``sensitivity``, ``simulate``, ``pseudo-assign``,
``verify``. Scalar results are written as JSON, tabular results as CSV,
and each report also renders its matplotlib figure next to the tables
(disable with ``--no-figures``). All randomness flows from ``--seed``;
``--threads`` only schedules work and never changes output values, so
identical invocations are byte-identical in every output file.

Exit codes: 0 ok, 2 validation, 3 numeric failure, 4 I/O. Failures print
one machine-readable JSON line on stderr. The default output directory
is ``$SEPEFFECTS_OUT`` (falling back to the working directory).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from . import figures
from .bootstrap import bootstrap_effects
from .cox import DesignSpec, breslow_baseline, fit_weighted_cox
from .data_model import load_dataset, load_schema, validate_dataset
from .estimator import (
    frontdoor_psi01_empirical,
    random_frontdoor_instance,
    survival_curves,
)
from .exceptions import (
    AssignmentError,
    BootstrapInstabilityError,
    DataValidationError,
    EstimationError,
    InternalCheckError,
    ModelFitError,
    SepEffectsError,
)
from .mediators import fit_mediator_model
from .pseudo_exposure import (
    assign_pseudo_months,
    read_eligibility_csv,
    read_exposed_hist_csv,
)
from .sensitivity import crossing_points, sensitivity_curve
from .simulation import DgpConfig, run_experiment

__all__ = ["main"]

OUT_ENV_VAR = "SEPEFFECTS_OUT"


def _parse_grid(text: str) -> np.ndarray:
    """Parse ``start:stop:step`` into an inclusive grid."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise DataValidationError(
            f"grid must look like start:stop:step, got {text!r}"
        ) from None
    if step <= 0 or stop < start:
        raise DataValidationError(f"bad grid bounds/step in {text!r}")
    count = int(round((stop - start) / step))
    grid = start + step * np.arange(count + 1)
    return np.round(grid[grid <= stop + 1e-9], 10)


def _out_dir(args) -> Path:
    out = Path(args.out if args.out else os.environ.get(OUT_ENV_VAR, "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_inputs(args):
    schema, p = load_schema(args.schema)
    d = load_dataset(args.data, schema)
    if d.p != p:
        raise DataValidationError(
            f"schema file declares p={p} but the data file has p={d.p}"
        )
    report = validate_dataset(d)
    if not report.ok:
        raise DataValidationError("dataset invariants violated:\n" + report.summary())
    for warning in report.warnings:
        print(f"warning: {warning.name}: {warning.detail}", file=sys.stderr)
    return d


def _fit_all(d, w=None):
    spec = DesignSpec(schema=d.schema, p=d.p)
    cox = fit_weighted_cox(d, spec, w)
    base = breslow_baseline(cox, d, w)
    med = fit_mediator_model(d, w)
    return cox, base, med


def cmd_estimate(args) -> int:
    out = _out_dir(args)
    d = _load_inputs(args)
    boot = bootstrap_effects(d, args.t, args.boot, args.seed, n_jobs=args.threads)

    effects = {
        "t": args.t,
        "joint": {"est": boot.point.joint, "lo": boot.ci["joint"][0],
                  "hi": boot.ci["joint"][1]},
        "anesthesia": {"est": boot.point.anesthesia, "lo": boot.ci["anesthesia"][0],
                       "hi": boot.ci["anesthesia"][1]},
        "surgery": {"est": boot.point.surgery, "lo": boot.ci["surgery"][0],
                    "hi": boot.ci["surgery"][1]},
        "boot": {"R": boot.R, "failed": boot.n_failed, "seed": args.seed},
    }
    _write_json(out / "effects.json", effects)
    boot.to_frame().to_csv(out / "replicates.csv", index=False)

    if args.curve_grid:
        grid = _parse_grid(args.curve_grid)
    else:
        grid = np.linspace(0.0, float(d.time.max()), 101)
    cox, base, med = _fit_all(d)
    curves = survival_curves(cox, base, med, d, grid)
    frame = {"t": curves.grid, "s00": curves.s00, "s01": curves.s01, "s11": curves.s11}
    pd.DataFrame(frame).to_csv(out / "curves.csv", index=False)
    if args.figures:
        figures.render_survival_curves(curves, out / "survival_curves.png")
    print(f"wrote {out / 'effects.json'}, {out / 'curves.csv'}, "
          f"{out / 'replicates.csv'}")
    return 0


def cmd_sensitivity(args) -> int:
    out = _out_dir(args)
    d = _load_inputs(args)
    grid = _parse_grid(args.grid)
    boot = bootstrap_effects(d, args.t, args.boot, args.seed, n_jobs=args.threads)
    curve = sensitivity_curve(boot, args.kind, grid)
    curve.to_frame().to_csv(out / "sensitivity.csv", index=False)

    lo, hi = boot.ci["anesthesia"]
    cross = crossing_points(boot.point.anesthesia, lo, hi)
    _write_json(out / "crossings.json", {
        "kind": args.kind,
        "null_at_lower": cross.null_at_lower,
        "null_at_point": cross.null_at_point,
        "null_at_upper": cross.null_at_upper,
    })
    if args.figures:
        figures.render_sensitivity_curve(curve, out / "sensitivity.png")
    print(f"wrote {out / 'sensitivity.csv'}, {out / 'crossings.json'}")
    return 0


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    with open(args.config, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataValidationError(f"malformed config JSON: {exc}") from exc

    runner_keys = {"t", "boot_R", "mc_n", "kind"}
    cfg_kwargs = {k: v for k, v in raw.items() if k not in runner_keys}
    if "hazard_mediator_coefs" in cfg_kwargs:
        cfg_kwargs["hazard_mediator_coefs"] = tuple(cfg_kwargs["hazard_mediator_coefs"])
    try:
        cfg = DgpConfig(**cfg_kwargs)
    except TypeError as exc:
        raise DataValidationError(f"invalid config field: {exc}") from exc

    t = float(args.t if args.t is not None else raw.get("t", 5.0))
    boot_r = int(args.boot_R if args.boot_R is not None else raw.get("boot_R", 200))
    mc_n = int(args.mc_n if args.mc_n is not None else raw.get("mc_n", 10**6))
    kind = args.kind or raw.get("kind", "gamma")
    grid = _parse_grid(args.grid)

    result = run_experiment(cfg, reps=args.reps, t=t, grid=grid, boot_r=boot_r,
                            master_seed=args.seed, kind=kind, mc_n=mc_n,
                            n_jobs=args.threads)
    result.metrics.to_csv(out / "metrics.csv", index=False)
    result.per_rep.to_csv(out / "reps.csv", index=False)
    _write_json(out / "truths.json", {
        "t": result.truths.t,
        "joint": result.truths.joint,
        "anesthesia": result.truths.anesthesia,
        "surgery": result.truths.surgery,
        "gamma_true": result.truths.gamma_true,
        "eta_true": result.truths.eta_true,
        "mc_size": result.truths.mc_size,
        "mc_se": result.truths.mc_se,
        "failed_reps": result.n_failed_reps,
    })
    if args.figures:
        figures.render_experiment_metrics(result.metrics, result.truths, kind,
                                          out / "metrics.png")
    print(f"wrote {out / 'metrics.csv'}, {out / 'reps.csv'}, {out / 'truths.json'}")
    return 0


def cmd_pseudo_assign(args) -> int:
    out = _out_dir(args)
    elig = read_eligibility_csv(args.eligibility)
    hist = read_exposed_hist_csv(args.exposed_hist)
    assignment = assign_pseudo_months(hist, elig, args.seed)

    pd.DataFrame(
        {"id": list(assignment.assigned.keys()),
         "assigned_month": list(assignment.assigned.values())}
    ).to_csv(out / "assignments.csv", index=False)
    pd.DataFrame(assignment.excluded, columns=["id", "reason"]).to_csv(
        out / "excluded.csv", index=False
    )
    print(f"wrote {out / 'assignments.csv'} ({len(assignment.assigned)} assigned), "
          f"{out / 'excluded.csv'} ({len(assignment.excluded)} excluded)")
    return 0


def cmd_verify(args) -> int:
    if not args.frontdoor:
        raise DataValidationError("nothing to verify: pass --frontdoor")
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(args.instances):
        d, t = random_frontdoor_instance(rng, args.n)
        res = frontdoor_psi01_empirical(d, t)
        worst = max(worst, res.gap)
    ok = worst <= 1e-10
    print(f"frontdoor: max |direct - arithmetic| = {worst:.3e} over "
          f"{args.instances} instances (tolerance 1e-10): "
          f"{'PASS' if ok else 'FAIL'}")
    if not ok:
        raise InternalCheckError(
            f"front-door identity violated: max gap {worst:.3e} > 1e-10"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sepeffects",
        description="Separable-effects survival estimation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, figures_flag=True):
        p.add_argument("--out", default=None,
                       help=f"output directory (default ${OUT_ENV_VAR} or .)")
        p.add_argument("--threads", type=int, default=1,
                       help="parallel workers; never affects output values")
        if figures_flag:
            p.add_argument("--no-figures", dest="figures", action="store_false",
                           help="skip rendering PNG figures next to the tables")

    p = sub.add_parser("estimate", help="effect ratios with bootstrap CIs")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--curve-grid", default=None, help="start:stop:step for curves")
    common(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sensitivity", help="bias-parameter adjustment curve")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", required=True, help="start:stop:step of parameter values")
    p.add_argument("--kind", choices=("gamma", "eta"), default="gamma")
    common(p)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("simulate", help="RMSE/coverage experiment on synthetic data")
    p.add_argument("--config", required=True, help="JSON generator config")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--grid", required=True, help="start:stop:step of parameter values")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--boot-R", dest="boot_R", type=int, default=None)
    p.add_argument("--mc-n", dest="mc_n", type=int, default=None)
    p.add_argument("--kind", choices=("gamma", "eta"), default=None)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pseudo-assign", help="pseudo-procedure month assignment")
    p.add_argument("--eligibility", required=True)
    p.add_argument("--exposed-hist", dest="exposed_hist", required=True)
    p.add_argument("--seed", type=int, default=0)
    common(p, figures_flag=False)
    p.set_defaults(func=cmd_pseudo_assign)

    p = sub.add_parser("verify", help="internal identity checks")
    p.add_argument("--frontdoor", action="store_true")
    p.add_argument("--n", type=int, default=200, help="rows per instance")
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    common(p, figures_flag=False)
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataValidationError as exc:
        return _fail(exc, 2)
    except (ModelFitError, EstimationError, BootstrapInstabilityError,
            AssignmentError, InternalCheckError) as exc:
        return _fail(exc, 3)
    except OSError as exc:
        return _fail(exc, 4)
    except SepEffectsError as exc:  # anything else of ours: numeric failure
        return _fail(exc, 3)


def _fail(exc, code: int) -> int:
    line = json.dumps({"error": str(exc).replace("\n", " | "),
                       "type": type(exc).__name__, "exit_code": code})
    print(line, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
