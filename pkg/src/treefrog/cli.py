"""Command-line front end for reproducible frog-model experiments.

Config precedence: command-line flags > JSON config file > built-in defaults.
Every run writes the fully resolved configuration next to its results, so any
output file can be regenerated bit-for-bit from that JSON alone.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import operator, simulate, thresholds, weights
from .pmf import Outcome, poisson_pmf

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INTERNAL = 2


class CliError(Exception):
    pass


# per-subcommand option schema: name -> (type, default, help)
SCHEMAS = {
    "simulate": {
        "d": (int, 2, "tree arity"),
        "mu": (float, 1.0, "Poisson sleeper density per vertex"),
        "variant": (str, "simple", "walk variant: simple | nonbacktracking"),
        "horizon": (int, 100, "number of synchronous steps T"),
        "depth-cap": (int, 20, "absorbing depth cap D"),
        "trials": (int, 1000, "number of independent trials"),
        "seed": (int, 0, "base RNG seed"),
    },
    "operator-iterate": {
        "d": (int, 2, "tree arity"),
        "mu": (float, 6.0, "Poisson sleeper density"),
        "n": (int, 10, "number of operator iterations"),
        "epsilon": (float, 0.0, "growth increment to certify (0 = skip check)"),
        "tol": (float, 1e-12, "pmf truncation tolerance"),
    },
    "find-epsilon": {
        "d": (int, 2, "tree arity"),
        "mu": (float, 6.0, "Poisson sleeper density"),
        "verify-grid": (int, 1, "also cross-check on the default lambda grid"),
    },
    "verify-inequality": {
        "d": (int, 2, "tree arity"),
        "mu": (float, 6.0, "Poisson sleeper density"),
        "epsilon": (float, 1.0, "growth increment to test"),
    },
    "cim-check": {
        "xmin": (float, 2.0, "grid start (must be >= 2)"),
        "xmax": (float, 64.0, "grid end"),
        "step": (float, 0.01, "grid step"),
    },
    "transience-check": {
        "d": (int, 5, "tree arity"),
        "mu": (float, 0.5, "Poisson sleeper density (must keep m < 1)"),
        "trials": (int, 10000, "number of trials"),
        "horizon": (int, 200, "steps per trial"),
        "depth-cap": (int, 16, "absorbing depth cap"),
        "seed": (int, 0, "base RNG seed"),
    },
    "critical-search": {
        "d": (int, 2, "tree arity"),
        "horizon": (int, 100, "steps per trial"),
        "depth-cap": (int, 20, "absorbing depth cap"),
        "trials": (int, 10000, "trials per proxy evaluation"),
        "threshold-visits": (float, 1.0, "proxy level defining the crossing"),
        "mu-lo": (float, 0.01, "lower bracket for mu"),
        "mu-hi": (float, 10.0, "upper bracket for mu"),
        "iterations": (int, 10, "bisection iterations"),
        "seed": (int, 0, "base RNG seed (shared across evaluations)"),
    },
    "cover-time": {
        "d": (int, 2, "tree arity"),
        "height": (int, 4, "tree height"),
        "trials": (int, 10000, "number of trials"),
        "seed": (int, 0, "base RNG seed"),
    },
    "coupling-check": {
        "d": (int, 2, "tree arity"),
        "mu": (float, 2.0, "Poisson sleeper density"),
        "horizon": (int, 200, "steps per trial"),
        "depth-cap": (int, 25, "absorbing depth cap"),
        "trials": (int, 100000, "trials per variant"),
        "seed": (int, 0, "base RNG seed"),
    },
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="treefrog",
        description="Frog model on d-ary trees: simulation and certificates.",
    )
    parser.add_argument(
        "--outdir",
        default=None,
        help="output directory (default: $TREEFROG_OUTDIR or current dir)",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", default=None, help="JSON config file")
        for opt, (typ, default, help_) in schema.items():
            sp.add_argument(
                f"--{opt}",
                type=typ,
                default=None,
                help=f"{help_} (default: {default})",
            )
    return parser


def _resolve_config(args):
    schema = SCHEMAS[args.subcommand]
    resolved = {opt: default for opt, (_, default, _h) in schema.items()}
    if args.config is not None:
        try:
            with open(args.config) as fh:
                file_cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config file {args.config}: {exc}")
        for key, value in file_cfg.items():
            if key in ("subcommand", "schema_version", "seed_note"):
                continue
            if key not in schema:
                raise CliError(
                    f"config file field {key!r} is not valid for "
                    f"subcommand {args.subcommand}"
                )
            resolved[key] = schema[key][0](value)
    for opt in schema:
        flag_value = getattr(args, opt.replace("-", "_"))
        if flag_value is not None:
            resolved[opt] = flag_value
    return resolved


def _outdir(args):
    path = args.outdir or os.environ.get("TREEFROG_OUTDIR") or "."
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved(outdir, name, cfg):
    payload = {"schema_version": SCHEMA_VERSION, "subcommand": name, **cfg}
    path = outdir / f"{name}.config.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _cmd_simulate(cfg, outdir):
    config = simulate.SimConfig(
        d=cfg["d"],
        frog_law=("poisson", cfg["mu"]),
        variant=cfg["variant"],
        horizon=cfg["horizon"],
        depth_cap=cfg["depth-cap"],
        trials=cfg["trials"],
        seed=cfg["seed"],
    )
    batch = simulate.run_batch(config)
    batch.write_jsonl(outdir / "simulate.trials.jsonl")
    simulate.write_summary_csv(outdir / "simulate.summary.csv", [batch.summary_row()])
    row = batch.summary_row()
    print(
        f"d={row['d']} mu={row['mu']} variant={row['variant']} "
        f"mean_visits={row['mean_visits']:.6g} stderr={row['stderr']:.3g} "
        f"mean_woken={row['mean_woken']:.6g}"
    )
    return EXIT_OK


def _cmd_operator_iterate(cfg, outdir):
    params = operator.StarParams(d=cfg["d"], mu=cfg["mu"], tol=cfg["tol"])
    iterates = operator.iterate(params, cfg["n"])
    rows = []
    verdicts = None
    if cfg["epsilon"] > 0:
        verdicts = operator.verify_bootstrap(
            params, cfg["epsilon"], cfg["n"], iterates=iterates
        )
    for k, nu in enumerate(iterates, start=1):
        row = {
            "k": k,
            "mean": nu.mean(),
            "support": nu.masses.size,
            "tail_mass": nu.tail_mass,
        }
        if verdicts is not None:
            row["dominates_poi_k_eps"] = verdicts[k - 1].outcome.value
        rows.append(row)
        print(
            f"k={k} mean={row['mean']:.6f} support={row['support']}"
            + (
                f" Poi({k}*eps) <= nu_k: {row['dominates_poi_k_eps']}"
                if verdicts is not None
                else ""
            )
        )
    (outdir / "operator-iterate.results.json").write_text(
        json.dumps(rows, indent=2) + "\n"
    )
    if verdicts is not None and not all(
        v.outcome is Outcome.DOMINATES for v in verdicts
    ):
        return EXIT_INVALID
    return EXIT_OK


def _cmd_find_epsilon(cfg, outdir):
    cert = thresholds.epsilon_max(cfg["d"], cfg["mu"])
    grid_note = "not checked"
    if cert.exists and cfg["verify-grid"]:
        ok = thresholds.verify_nbound(cfg["d"], cfg["mu"], cert.epsilon_max * (1 - 1e-9))
        grid_note = "passed on default grid" if ok else "FAILED on default grid"
    payload = {
        "d": cert.d,
        "mu": cert.mu,
        "m": cert.m,
        "epsilon_max": cert.epsilon_max,
        "lambda_grid_checked": grid_note,
    }
    (outdir / "find-epsilon.certificate.json").write_text(
        json.dumps(payload, indent=2) + "\n"
    )
    if cert.exists:
        print(f"epsilon_max = {cert.epsilon_max:.7f} ({grid_note})")
    else:
        print(f"no epsilon certificate: e^-m + e^-m/d >= 1 for mu={cfg['mu']}")
    return EXIT_OK


def _cmd_verify_inequality(cfg, outdir):
    ok = thresholds.verify_nbound(cfg["d"], cfg["mu"], cfg["epsilon"])
    (outdir / "verify-inequality.result.json").write_text(
        json.dumps({"d": cfg["d"], "mu": cfg["mu"], "epsilon": cfg["epsilon"], "holds": ok})
        + "\n"
    )
    print(f"inequality holds on default grid: {ok}")
    return EXIT_OK if ok else EXIT_INVALID


def _cmd_cim_check(cfg, outdir):
    if cfg["xmin"] < 2:
        raise CliError("xmin must be >= 2 (field: xmin)")
    xs = np.arange(cfg["xmin"], cfg["xmax"] + cfg["step"] / 2, cfg["step"])
    values = [thresholds.cim_check(float(x)) for x in xs]
    all_hold = all(h for _v, h in values)
    worst = max(v for v, _h in values)
    (outdir / "cim-check.result.json").write_text(
        json.dumps(
            {
                "xmin": cfg["xmin"],
                "xmax": cfg["xmax"],
                "step": cfg["step"],
                "all_hold": all_hold,
                "max_value": worst,
            }
        )
        + "\n"
    )
    print(f"{len(values)} grid points, all below 1: {all_hold} (max {worst:.6f})")
    return EXIT_OK if all_hold else EXIT_INVALID


def _cmd_transience_check(cfg, outdir):
    report = weights.supermartingale_check(
        d=cfg["d"],
        mu=cfg["mu"],
        trials=cfg["trials"],
        horizon=cfg["horizon"],
        seed=cfg["seed"],
        depth_cap=cfg["depth-cap"],
    )
    weights.export_trace_csv(outdir / "transience-check.trace.csv", report)
    print(
        f"theta={report.params.theta:.6f} m={report.params.m:.6f} "
        f"band holds: {report.holds} step bound holds: {report.step_bound_holds}"
    )
    return EXIT_OK if report.holds else EXIT_INVALID


def _cmd_critical_search(cfg, outdir):
    result = simulate.critical_search(
        d=cfg["d"],
        T=cfg["horizon"],
        D=cfg["depth-cap"],
        trials=cfg["trials"],
        threshold_visits=cfg["threshold-visits"],
        mu_lo=cfg["mu-lo"],
        mu_hi=cfg["mu-hi"],
        iterations=cfg["iterations"],
        seed=cfg["seed"],
    )
    with open(outdir / "critical-search.curve.csv", "w") as fh:
        fh.write("mu,proxy\n")
        for mu, proxy in result.curve:
            fh.write(f"{mu},{proxy}\n")
    print(f"proxy crossing at mu ~= {result.crossing:.6f}")
    return EXIT_OK


def _cmd_cover_time(cfg, outdir):
    stats = simulate.cover_time(cfg["d"], cfg["height"], cfg["trials"], cfg["seed"])
    payload = {
        "d": stats.d,
        "height": stats.height,
        "trials": stats.trials,
        "mean": stats.mean,
        "stderr": stats.stderr,
        "quantiles": {str(k): v for k, v in stats.quantiles.items()},
    }
    (outdir / "cover-time.result.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(f"height={stats.height} mean cover time {stats.mean:.2f} +- {stats.stderr:.2f}")
    return EXIT_OK


def _cmd_coupling_check(cfg, outdir):
    base = dict(
        d=cfg["d"],
        frog_law=("poisson", cfg["mu"]),
        horizon=cfg["horizon"],
        depth_cap=cfg["depth-cap"],
        trials=cfg["trials"],
        seed=cfg["seed"],
    )
    report = simulate.dominance_experiment(
        simulate.SimConfig(variant="simple", **base),
        simulate.SimConfig(variant="nonbacktracking", **{**base, "seed": cfg["seed"] + 1}),
    )
    payload = {
        "forward_statistic": report.forward.statistic,
        "forward_threshold": report.forward.threshold,
        "consistent": report.consistent,
        "reversed_statistic": report.reversed.statistic,
        "reversed_violation": report.reversed.violation,
    }
    (outdir / "coupling-check.result.json").write_text(json.dumps(payload, indent=2) + "\n")
    print(
        f"nonbacktracking below simple consistent: {report.consistent} "
        f"(stat {report.forward.statistic:.4f}, threshold {report.forward.threshold:.4f})"
    )
    return EXIT_OK if report.consistent else EXIT_INVALID


_DISPATCH = {
    "simulate": _cmd_simulate,
    "operator-iterate": _cmd_operator_iterate,
    "find-epsilon": _cmd_find_epsilon,
    "verify-inequality": _cmd_verify_inequality,
    "cim-check": _cmd_cim_check,
    "transience-check": _cmd_transience_check,
    "critical-search": _cmd_critical_search,
    "cover-time": _cmd_cover_time,
    "coupling-check": _cmd_coupling_check,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        outdir = _outdir(args)
        _write_resolved(outdir, args.subcommand, cfg)
        return _DISPATCH[args.subcommand](cfg, outdir)
    except (CliError, ValueError, simulate.BracketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - top-level CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
