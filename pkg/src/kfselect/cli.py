"""Command-line entry point: ``kfselect <subcommand> [options]``.

Exit codes: 0 success, 2 unreadable or malformed input, 3 configuration
or size error, 4 numerical failure.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import certificates, experiments, model, selection
from .errors import ConfigurationError, NumericalError, SystemFormatError
from .model import SCHEMA_VERSION, LinearSystem
from .objective import SelectionConfig, parse_weights

log = logging.getLogger("kfselect")

EXIT_OK, EXIT_PARSE, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4


def write_json(path, doc):
    doc = dict(doc, schema=SCHEMA_VERSION)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, allow_nan=False)
        fh.write("\n")


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c, "")) for c in columns])


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _load_system(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SystemFormatError(f"cannot read {path}: {exc.strerror}", field="file") from None
    return LinearSystem.from_json(text)


def _config(args, p=None):
    N = args.horizon
    theta = parse_weights(args.weights or ("final" if args.kind == "smoothing" else "average"), N)
    cfg = SelectionConfig(
        scalarization=args.scalarization, m=args.start, N=N, theta=theta, s=args.budget, r=args.steps,
        kind=args.kind,
    )
    if p is not None:
        cfg.check_ground_set(p)
    return cfg


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------ commands


def cmd_gen(args):
    if args.basin is not None:
        tree = model.synth_river_tree(args.basin, args.branching, rng_seed=args.seed)
        sys_, _ = model.basin_system(tree)
    else:
        sys_ = model.random_system(
            args.n, args.p, target_norm=args.norm, sigma_w2=args.sigma_w2,
            sigma_v2_range=tuple(args.sigma_v2), output_mode=args.outputs, rng_seed=args.seed,
        )
    path = _out_dir(args) / "system.json"
    path.write_text(sys_.to_json(indent=2) + "\n", encoding="utf-8")
    log.info("wrote %s (n=%d, p=%d)", path, sys_.n, sys_.p)
    return EXIT_OK


def _selection_doc(sys_, cfg, result, report, exhaustive=None):
    mult, additive = certificates.guarantees(report.alpha_bound, report.epsilon_bound, 0.0, cfg.r, cfg.s)
    doc = {
        "config": {
            "scalarization": cfg.scalarization, "kind": cfg.kind, "m": cfg.m, "N": cfg.N,
            "theta": list(cfg.theta), "s": cfg.s, "r": cfg.r,
        },
        "chosen": list(result.chosen),
        "value": result.value,
        "objective_trajectory": list(result.objective_trajectory),
        "gains": list(result.gains),
        "certificates": report.to_dict(),
        "guarantees": {
            "multiplicative_factor": mult,
            "additive_slack": cfg.s * report.epsilon_bound,
            "additive_factor": additive / (cfg.s * report.epsilon_bound) if report.epsilon_bound > 0 else 0.0,
        },
        "system": sys_.to_dict(),
    }
    if exhaustive is not None:
        X_opt, f_opt = exhaustive
        doc["exhaustive"] = {"chosen": list(X_opt), "value": f_opt}
    return doc


def cmd_select(args):
    sys_ = _load_system(args.system)
    cfg = _config(args)
    if cfg.r > sys_.p:
        raise ConfigurationError(f"r={cfg.r} greedy steps exceed the {sys_.p} available sensors")
    result = selection.greedy_select(sys_, cfg)
    report = certificates.certify(sys_, cfg)
    exhaustive = selection.exhaustive_select(sys_, cfg) if args.exhaustive else None
    path = _out_dir(args) / "result.json"
    write_json(path, _selection_doc(sys_, cfg, result, report, exhaustive))
    print(json.dumps({"chosen": list(result.chosen), "value": result.value}))
    return EXIT_OK


def cmd_certify(args):
    sys_ = _load_system(args.system)
    cfg = _config(args)
    kwargs = {"schedule": args.schedule} if cfg.kind == "filtering" else {}
    report = certificates.certify(sys_, cfg, **kwargs)
    path = _out_dir(args) / "certificates.json"
    write_json(path, report.to_dict())
    print(json.dumps({"alpha_bound": report.alpha_bound, "epsilon_bound": report.epsilon_bound}))
    return EXIT_OK


def cmd_sweep(args):
    rows = experiments.sweep(
        kind=args.kind, scalarization=args.scalarization, ratios=args.ratios, norms=args.norms,
        trials=args.trials, n=args.n, p=args.p, N=args.horizon, sigma_w2=args.sigma_w2, vary=args.vary,
        seed=args.seed, workers=args.workers, timing=not args.no_timing,
    )
    path = _out_dir(args) / f"sweep_{args.kind}.csv"
    write_csv(path, experiments.SWEEP_COLUMNS, rows)
    log.info("wrote %d rows to %s", len(rows), path)
    return EXIT_OK


def cmd_bruteforce(args):
    rows, summary = experiments.bruteforce(
        n=args.n, p=args.p, s=args.budget, trials=args.trials, scalarization=args.scalarization,
        kind=args.kind, N=args.horizon, weights=args.weights, norm=args.norm, sigma_w2=args.sigma_w2,
        sigma_v2_range=tuple(args.sigma_v2), seed=args.seed, certificate=not args.no_certificate,
        workers=args.workers,
    )
    out = _out_dir(args)
    stem = f"bruteforce_{args.scalarization}_{args.kind}"
    summary_row = {"trial": "optimal_fraction", "nu_star": summary["optimal_fraction"]}
    write_csv(out / f"{stem}.csv", experiments.BRUTEFORCE_COLUMNS, rows + [summary_row])
    write_json(out / f"{stem}_summary.json", summary)
    print(json.dumps(summary))
    return EXIT_OK


def cmd_basin(args):
    runs, summary = experiments.basin_study(
        seeds=range(args.seed, args.seed + args.runs), workers=args.workers, levels=args.levels,
        branching=args.branching, s=args.budget, steps=args.horizon, scalarization=args.scalarization,
        sigma_w2=args.sigma_w2, sigma_v2=args.sigma_v2,
    )
    out = _out_dir(args)
    public = [{k: v for k, v in r.items() if not k.startswith("_")} for r in runs]
    write_json(out / "basin.json", {"runs": public, "mean": summary})
    write_csv(out / "basin_trajectories.csv", experiments.TRAJECTORY_COLUMNS, experiments.trajectory_rows(runs[0]))
    print(json.dumps(summary))
    return EXIT_OK


# -------------------------------------------------------------- parser


def _common(p, budget=True, horizon_default=1):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.add_argument("--scalarization", choices=("trace", "specnorm", "logdet"), default="trace")
    p.add_argument("--kind", choices=("filtering", "smoothing"), default="filtering")
    p.add_argument("--horizon", type=int, default=horizon_default, help="number of steps N")
    p.add_argument("--start", type=int, default=0, help="first step m")
    p.add_argument("--weights", help="final | average | geometric:<rho>")
    if budget:
        p.add_argument("--budget", type=int, default=1, help="sensor budget s")
        p.add_argument("--steps", type=int, help="greedy steps r (default s)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="kfselect", description="Sensor selection for Kalman filtering")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a system as JSON")
    _common(p, budget=False)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--norm", type=float, default=0.9)
    p.add_argument("--sigma-w2", type=float, default=1e-2)
    p.add_argument("--sigma-v2", type=float, nargs=2, default=(1.0, 1.0), metavar=("LO", "HI"))
    p.add_argument("--outputs", choices=("canonical", "gaussian"), default="canonical")
    p.add_argument("--basin", type=int, metavar="LEVELS", help="river-basin system instead of a random one")
    p.add_argument("--branching", type=int, default=2)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("select", help="greedy selection with certificates")
    p.add_argument("system")
    _common(p)
    p.add_argument("--exhaustive", action="store_true", help="also report the exhaustive optimum")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("certify", help="alpha / epsilon certificates")
    p.add_argument("system")
    _common(p)
    p.add_argument("--schedule", choices=("empty", "full"), default="empty")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="certificate sweep over noise ratio and ||F||")
    _common(p, budget=False, horizon_default=10)
    p.add_argument("--ratios", type=_floats, default=[1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3, 1e4])
    p.add_argument("--norms", type=_floats, default=[0.1, 0.5, 0.9])
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--p", type=int)
    p.add_argument("--sigma-w2", type=float, default=1e-2)
    p.add_argument("--vary", choices=("sigma_v2", "sigma_w2"), default="sigma_v2")
    p.add_argument("--no-timing", action="store_true", help="write 0 in runtime_ms for reproducible files")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bruteforce", help="greedy against exhaustive search")
    _common(p, horizon_default=10)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--p", type=int, default=10)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--norm", type=float, default=0.9)
    p.add_argument("--sigma-w2", type=float, default=1e-2)
    p.add_argument("--sigma-v2", type=float, nargs=2, default=(1e-2, 1.0), metavar=("LO", "HI"))
    p.add_argument("--no-certificate", action="store_true", help="skip the exhaustive alpha / epsilon")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_bruteforce, budget=4)

    p = sub.add_parser("basin", help="river-basin demonstration")
    _common(p, horizon_default=200)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--branching", type=int, default=2)
    p.add_argument("--runs", type=int, default=1, help="number of seeds, starting at --seed")
    p.add_argument("--sigma-w2", type=float, default=1e-4)
    p.add_argument("--sigma-v2", type=float, default=1e-1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_basin, budget=10)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except SystemFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
