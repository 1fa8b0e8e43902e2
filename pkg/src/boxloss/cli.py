"""Command-line entry point: ``boxloss {bench,converge,surface,gradcheck,tune}``.

Every command writes its data files plus a ``manifest.json`` into ``--out``.
Exit status is 0 on success, 1 when a check or computation fails, 2 on
usage errors.

Options may also come from ``--config FILE``: one ``key = value`` per line,
keys spelled like the long flags without dashes (``points = 200``,
``ch_interpretation = enclosing``); ``#`` starts a comment and repeatable
flags take comma-separated values. Flags given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import Box2D
from .gradcheck import check_gradients, sample_smooth_pairs
from .losses import LossKind, SiouParams
from .regression import AdamConfig, fit
from .sim_bench import (
    ErrorSeries,
    SimConfig,
    case_count,
    read_points_csv,
    run,
    surface,
    write_points_csv,
    write_series_csv,
    write_surface_csv,
    write_surface_json,
)
from .tuner import GaConfig, tune_theta

log = logging.getLogger("boxloss")

LOSS_CHOICES = [k.value for k in LossKind]


class UsageError(Exception):
    pass


class CheckFailed(Exception):
    def __init__(self, message, outputs=(), extra=None):
        super().__init__(message)
        self.outputs = list(outputs)
        self.extra = extra


# ---------------------------------------------------------------------------
# parsing helpers


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _box(text):
    try:
        vals = [float(v) for v in text.split(",")]
        return Box2D(*vals)
    except (TypeError, ValueError) as e:
        raise argparse.ArgumentTypeError(f"expected cx,cy,w,h with w,h > 0: {e}") from None


def _threads_default():
    env = os.environ.get("BOXLOSS_THREADS")
    return int(env) if env else None


def _add_sim_flags(p, points_default):
    p.add_argument("--points", type=_positive_int, default=points_default, help="anchor points in the disk")
    p.add_argument("--seed", type=int, default=0, help="point-sampling seed")
    p.add_argument("--theta", type=float, default=4.0, help="SIoU shape exponent in [2, 6]")
    p.add_argument("--iters", type=int, default=100, help="Adam iterations per case")
    p.add_argument("--lr", type=float, default=0.1, help="initial learning rate")
    p.add_argument("--step-size", type=_positive_int, default=80, help="iterations between lr decays")
    p.add_argument("--gamma", type=float, default=0.1, help="lr decay factor")
    p.add_argument("--ch-interpretation", choices=["enclosing", "center-offset"], default="enclosing",
                   help="denominator of the vertical distance ratio")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boxloss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"boxloss {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--threads", type=_positive_int, default=_threads_default(),
                       help="worker threads (env BOXLOSS_THREADS)")
        p.add_argument("--config", help="key = value option file")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("bench", help="run the simulation benchmark")
    p.add_argument("--loss", action="append", choices=LOSS_CHOICES, help="loss kind (repeatable)")
    _add_sim_flags(p, 5000)
    p.add_argument("--dry-run", action="store_true", help="only enumerate cases and write the manifest")
    common(p, "bench_out")

    p = sub.add_parser("converge", help="fit a single anchor to a target")
    p.add_argument("--anchor", type=_box, required=True, help="cx,cy,w,h")
    p.add_argument("--target", type=_box, required=True, help="cx,cy,w,h")
    p.add_argument("--loss", choices=LOSS_CHOICES, default="siou")
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-2, help="L1 convergence tolerance")
    p.add_argument("--theta", type=float, default=4.0)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--step-size", type=_positive_int, default=80)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--ch-interpretation", choices=["enclosing", "center-offset"], default="enclosing")
    common(p, "converge_out")

    p = sub.add_parser("surface", help="bin a bench run's per-point errors onto a grid")
    p.add_argument("--in", dest="input", required=True, help="bench output directory")
    p.add_argument("--bins", type=int, default=20, help="cells per axis (>= 2)")
    common(p, None)

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--loss", action="append", choices=LOSS_CHOICES, help="loss kind (repeatable, default all)")
    p.add_argument("--samples", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h", type=float, default=1e-6, help="central-difference step")
    p.add_argument("--theta", type=float, default=4.0)
    p.add_argument("--tol", type=float, default=1e-6, help="maximum allowed relative error")
    common(p, "gradcheck_out")

    p = sub.add_parser("tune", help="genetic search for the shape exponent")
    p.add_argument("--generations", type=int, default=20)
    p.add_argument("--population", type=int, default=16)
    p.add_argument("--mutation-sigma", type=float, default=0.3)
    p.add_argument("--crossover-rate", type=float, default=0.5)
    p.add_argument("--fitness-threshold", type=float, default=None)
    p.add_argument("--ga-seed", type=int, default=0)
    _add_sim_flags(p, 100)
    common(p, "tune_out")
    return parser


def _read_config_file(path):
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _apply_config_file(parser, argv):
    """Re-parse with config-file values installed as subcommand defaults."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        values = _read_config_file(args.config)
    except OSError as e:
        raise UsageError(f"cannot read config file: {e}") from None
    subparser = _subparser(parser, args.command)
    actions = {a.dest: a for a in subparser._actions}
    defaults, appended = {}, {}
    for key, text in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        conv = action.type or str
        try:
            if isinstance(action, argparse._AppendAction):
                # an append default would merge with command-line values
                appended[key] = [conv(t.strip()) for t in text.split(",")]
                continue
            elif isinstance(action, argparse._StoreTrueAction):
                defaults[key] = text.lower() in ("1", "true", "yes", "on")
            else:
                defaults[key] = conv(text)
        except (argparse.ArgumentTypeError, ValueError) as e:
            raise UsageError(f"bad value for {key!r}: {e}") from None
        if action.choices is not None and defaults[key] not in action.choices:
            raise UsageError(f"bad value for {key!r}: {defaults[key]!r}")
    for key, vals in appended.items():
        if actions[key].choices is not None and any(v not in actions[key].choices for v in vals):
            raise UsageError(f"bad value for {key!r}: {vals!r}")
    subparser.set_defaults(**defaults)
    args = parser.parse_args(argv)
    for key, vals in appended.items():
        if getattr(args, key) is None:
            setattr(args, key, vals)
    return args


def _subparser(parser, command):
    return parser._subparsers._group_actions[0].choices[command]


# ---------------------------------------------------------------------------
# manifest


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def _write_manifest(out: Path, command, args, argv, started, outputs, extra=None):
    resolved = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    seeds = {k: v for k, v in resolved.items() if k in ("seed", "ga_seed")}
    doc = {
        "command": command,
        "version": __version__,
        "argv": list(argv),
        "config": resolved,
        "seeds": seeds,
        "started_at": started,
        "finished_at": _now(),
        "outputs": [str(p) for p in outputs],
    }
    if extra:
        doc.update(extra)
    path = out / "manifest.json"
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, default=str)
        f.write("\n")
    return path


def _sim_config(args, kind="siou") -> SimConfig:
    try:
        return SimConfig(
            num_points=args.points,
            seed=args.seed,
            kind=kind,
            params=SiouParams(args.theta, args.ch_interpretation),
            adam=AdamConfig(lr0=args.lr, step_size=args.step_size, gamma=args.gamma, iterations=args.iters),
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


# ---------------------------------------------------------------------------
# commands


def cmd_bench(args, out: Path):
    kinds = list(dict.fromkeys(args.loss or ["siou"]))
    configs = {k: _sim_config(args, k) for k in kinds}
    first = configs[kinds[0]]
    n_cases = case_count(first)
    outputs, finals = [], {}
    series = {}
    if not args.dry_run:
        for k, cfg in configs.items():
            log.info("bench %s: %d cases", k, n_cases)
            s = run(cfg, threads=args.threads)
            series[k] = s
            for name, writer in (("series", write_series_csv), ("points", write_points_csv)):
                path = out / f"{name}_{k}.csv"
                writer(path, s)
                outputs.append(path)
            finals[k] = {
                "final_E": s.final,
                "max_point_final": float(s.per_point_final.max()),
                "rejected_steps": s.rejected_steps,
                "clamped_steps": s.clamped_steps,
            }
            print(f"{k}: E(0)={s.per_iteration_total[0]:.6g} final E={s.final:.6g} "
                  f"max per-point={s.per_point_final.max():.6g}")
        path = out / "comparison.csv"
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["iteration"] + [f"E_{k}" for k in kinds])
            for i in range(first.adam.iterations + 1):
                w.writerow([i] + [repr(float(series[k].per_iteration_total[i])) for k in kinds])
        outputs.append(path)
    return outputs, {
        "case_count": n_cases,
        "sim_configs": {k: c.to_dict() for k, c in configs.items()},
        "results": finals,
    }


def cmd_converge(args, out: Path):
    try:
        params = SiouParams(args.theta, args.ch_interpretation)
        adam = AdamConfig(lr0=args.lr, step_size=args.step_size, gamma=args.gamma, iterations=args.iters,
                          tol=args.tol)
    except ValueError as e:
        raise UsageError(str(e)) from None
    traj = fit(args.anchor, args.target, args.loss, params, adam)
    path = out / f"trajectory_{args.loss}.csv"
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["iteration", "cx", "cy", "w", "h", "l1_error"])
        for i, (b, e) in enumerate(zip(traj.boxes, traj.l1_errors)):
            w.writerow([i, *(repr(float(v)) for v in b), repr(float(e))])
    print(f"{args.loss}: converged_at={traj.converged_at} final L1={traj.l1_errors[-1]:.6g}")
    return [path], {
        "converged_at": traj.converged_at,
        "final_l1_error": float(traj.l1_errors[-1]),
        "rejected_steps": traj.rejected_steps,
        "clamped_steps": traj.clamped_steps,
    }


def cmd_surface(args, out: Path):
    src = Path(args.input)
    if not src.is_dir():
        raise UsageError(f"input directory not found: {src}")
    if args.bins < 2:
        raise UsageError("--bins must be >= 2")
    manifest_path = src / "manifest.json"
    if not manifest_path.exists():
        raise UsageError(f"no manifest.json in {src}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    point_files = sorted(src.glob("points_*.csv"))
    if not point_files:
        raise UsageError(f"no points_*.csv files in {src}")
    outputs = []
    for pf in point_files:
        kind = pf.stem.split("_", 1)[1]
        cfg = SimConfig.from_dict(manifest["sim_configs"][kind])
        pts, finals = read_points_csv(pf)
        series = ErrorSeries(np.array([finals.sum()]), finals, len(finals) * cfg.cases_per_point, cfg, pts)
        surf = surface(series, pts, args.bins)
        for path, writer in ((out / f"surface_{kind}.csv", write_surface_csv),
                             (out / f"surface_{kind}.json", None)):
            if writer is None:
                write_surface_json(path, surf, cfg, {"loss": kind, "z": "final-iteration error per point"})
            else:
                writer(path, surf)
            outputs.append(path)
    return outputs, {"source": str(src)}


def cmd_gradcheck(args, out: Path):
    kinds = list(dict.fromkeys(args.loss or LOSS_CHOICES))
    try:
        params = SiouParams(args.theta)
    except ValueError as e:
        raise UsageError(str(e)) from None
    rng = np.random.default_rng(args.seed)
    pred, gt, skipped = sample_smooth_pairs(rng, args.samples)
    reports = [check_gradients(k, pred, gt, params, args.h, kink_skipped=skipped) for k in kinds]
    path = out / "gradcheck.json"
    with open(path, "w") as f:
        json.dump([r.to_dict() for r in reports], f, indent=2)
        f.write("\n")
    failed = []
    for r in reports:
        status = "ok" if r.passed(args.tol) else "FAIL"
        print(f"{r.kind.value}: max rel err {r.max_rel_error:.3e} mean {r.mean_rel_error:.3e} "
              f"kink-skipped {r.kink_skipped} [{status}]")
        if not r.passed(args.tol):
            failed.append(r)
    extra = {"reports": [r.to_dict() for r in reports]}
    if failed:
        worst = max(failed, key=lambda r: r.max_rel_error)
        raise CheckFailed(f"gradient check failed for {worst.kind.value}: pred={worst.worst_pred.tolist()} "
                          f"gt={worst.worst_gt.tolist()} rel err {worst.max_rel_error:.3e}", [path], extra)
    return [path], extra


def cmd_tune(args, out: Path):
    sim = _sim_config(args)
    try:
        ga = GaConfig(population=args.population, generations=args.generations,
                      mutation_sigma=args.mutation_sigma, crossover_rate=args.crossover_rate,
                      fitness_threshold=args.fitness_threshold, seed=args.ga_seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    result = tune_theta(ga, sim, threads=args.threads)
    doc = result.to_dict()
    doc.update({"ga_seed": ga.seed, "sim_seed": sim.seed, "ga_config": ga.__dict__, "sim_config": sim.to_dict()})
    path = out / "ga_result.json"
    with open(path, "w") as f:
        json.dump(doc, f, indent=2, default=str)
        f.write("\n")
    print(f"best theta {result.best_theta:.4f} fitness {result.best_fitness:.6g}")
    return [path], {"best_theta": result.best_theta}


COMMANDS = {
    "bench": cmd_bench,
    "converge": cmd_converge,
    "surface": cmd_surface,
    "gradcheck": cmd_gradcheck,
    "tune": cmd_tune,
}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = _apply_config_file(parser, argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"boxloss: error: {e}", file=sys.stderr)
        return 2
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = _now()
    # surface defaults to a subdirectory so the bench manifest is kept
    out = Path(args.out) if args.out is not None else Path(args.input) / "surface"
    try:
        if args.command == "surface" and not Path(args.input).is_dir():
            raise UsageError(f"input directory not found: {args.input}")
        out.mkdir(parents=True, exist_ok=True)
        outputs, extra = COMMANDS[args.command](args, out)
        _write_manifest(out, args.command, args, argv, started, outputs, extra)
    except UsageError as e:
        _subparser(parser, args.command).print_usage(sys.stderr)
        print(f"boxloss {args.command}: error: {e}", file=sys.stderr)
        return 2
    except CheckFailed as e:
        _write_manifest(out, args.command, args, argv, started, e.outputs, e.extra)
        print(f"boxloss {args.command}: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # runtime failure
        log.debug("failure", exc_info=True)
        print(f"boxloss {args.command}: failed: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
