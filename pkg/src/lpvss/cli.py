"""Command-line front end.

Subcommands: ``simulate``, ``filter``, ``boundcheck``, ``gaindecay`` and
``example1``. Every command writes its data files plus ``manifest.json``
into ``--out``. Exit codes: 0 success (or bound inapplicable), 1 internal
error, 2 invalid input, 3 acceptance check failed.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time

import numpy as np

from . import __version__
from .convergence import (estimate_condition_constants, lyapunov_decay_check,
                          restart_experiment, covariance_bound)
from .core import ModelError, NumericalError, SchedulingTrajectory, validate_model
from .example1 import Example1Config, equivalence_check, write_comparison_csv
from .gainapprox import decay_study, write_decay_csv
from .innovation import compute_trace, run_filter, whiteness, write_trace_csv
from .io import load_model, loads_strict
from .simulate import (SimConfig, gen_input, gen_scheduling, read_signals_csv,
                       sample_noise, simulate_general, simulate_innovation,
                       write_signals_csv)

log = logging.getLogger("lpvss")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_CHECK = 0, 1, 2, 3
DEFAULT_TAUS = (1, 2, 4, 8)


class InputError(Exception):
    pass


def _digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _read_config(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise InputError(f"config file not found: {path}")
    with open(path) as fh:
        try:
            return loads_strict(fh.read())
        except (json.JSONDecodeError, ModelError) as exc:
            raise InputError(f"{path}: {exc}") from None


def _model(args):
    if args.model is None:
        raise InputError("--model is required")
    if not os.path.exists(args.model):
        raise InputError(f"model file not found: {args.model}")
    try:
        model = load_model(args.model)
    except (json.JSONDecodeError, ModelError) as exc:
        raise InputError(f"{args.model}: {exc}") from None
    report = validate_model(model, model.scheduling_set.grid(11))
    if not report.ok:
        raise InputError(f"{args.model}: " + "; ".join(report.violations))
    return model


def _sim_config(args, cfg):
    fields = {f.name for f in dataclasses.fields(SimConfig)}
    kw = {k: v for k, v in cfg.items() if k in fields}
    if args.horizon is not None:
        kw["horizon"] = args.horizon
    if args.seed is not None:
        kw["seed"] = args.seed
    kw.setdefault("horizon", 100)
    for k in ("x0", "scheduling_value"):
        if kw.get(k) is not None:
            kw[k] = tuple(kw[k])
    try:
        return SimConfig(**kw)
    except (TypeError, ModelError) as exc:
        raise InputError(f"invalid simulation config: {exc}") from None


def _ensemble(model, args, cfg):
    base = _sim_config(args, {"scheduling_kind": "uniform-random-walk", **cfg})
    return [gen_scheduling(dataclasses.replace(base, seed=_trial_seed(base.seed, k)),
                           model.scheduling_set)
            for k in range(args.trials)], base


def _trial_seed(seed, k):
    return int(np.random.SeedSequence([int(seed), int(k)]).generate_state(1, np.uint64)[0])


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    raise TypeError(type(o))


def cmd_simulate(args):
    model = _model(args)
    cfg = _sim_config(args, _read_config(args.config))
    traj = gen_scheduling(cfg, model.scheduling_set)
    u = gen_input(cfg, model.nu)
    x0 = None if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    if x0 is not None and np.any(x0):
        log.warning("nonzero x0: outside the known-initial-state assumption of the innovation form")
    if args.form == "innovation":
        trace = compute_trace(model, traj)
        rec = simulate_innovation(model, traj, u, trace, seed=cfg.seed, x0=x0)
    else:
        w, v = sample_noise(model.noise, cfg.horizon, seed=cfg.seed)
        rec = simulate_general(model, traj, u, w, v, x0)
    out = os.path.join(args.out, "signals.csv")
    write_signals_csv(out, rec.p, rec.u, rec.y, traj.t0)
    return {"config": dataclasses.asdict(cfg), "form": args.form}, [out], EXIT_OK


def cmd_filter(args):
    model = _model(args)
    if args.signals is None or not os.path.exists(args.signals):
        raise InputError(f"signals file not found: {args.signals}")
    try:
        data = read_signals_csv(args.signals)
    except (ValueError, ModelError) as exc:
        raise InputError(f"{args.signals}: {exc}") from None
    traj = SchedulingTrajectory(data["p"], int(data["t"][0]) if data["t"].size else 0)
    trace = compute_trace(model, traj)
    run = run_filter(model, trace, traj, data["u"], data["y"])
    e = run.normalized_innovations(trace)
    max_lag = min(10, len(traj) - 1)
    inside = whiteness(e, max_lag=max_lag)
    frac = float(inside.mean())
    paths = [os.path.join(args.out, n) for n in ("trace.csv", "innovations.csv", "whiteness.csv")]
    write_trace_csv(trace, paths[0])
    write_signals_csv(paths[1], data["p"], e, run.xi, traj.t0)
    with open(paths[2], "w") as fh:
        fh.write("max_lag,level,fraction_inside,verdict\n")
        fh.write(f"{max_lag},0.99,{frac!r},{'PASS' if frac >= 0.95 else 'FAIL'}\n")
    return {"whiteness_fraction": frac}, paths, EXIT_OK


def cmd_boundcheck(args):
    model = _model(args)
    cfg = _read_config(args.config)
    ens, base = _ensemble(model, args, cfg)
    taus = sorted(set(args.tau or DEFAULT_TAUS))
    c = estimate_condition_constants(model, ens)
    report = {"constants": c.to_dict(), "taus": taus, "trials": args.trials,
              "config": dataclasses.asdict(base)}
    curve = os.path.join(args.out, "bound_curve.csv")
    rep_path = os.path.join(args.out, "report.json")
    if not c.valid:
        report["verdict"] = "INAPPLICABLE"
        report["reasons"] = c.violations
        with open(curve, "w") as fh:
            fh.write("tau,empirical_max_norm,bound\n")
        _write_json(rep_path, report)
        return report, [curve, rep_path], EXIT_OK
    rows, ok = [], True
    for tau in taus:
        runs = [restart_experiment(model, tr, tau, args.p0_scale, constants=c) for tr in ens]
        emp = max(r.max_diff for r in runs)
        b = covariance_bound(c, model.nx, tau)
        sand = min(float(r.sandwich_min_eig.min()) for r in runs)
        lyap = [lyapunov_decay_check(model, tr, tau, c, n_vectors=20, seed=k)
                for k, tr in enumerate(ens)]
        row = {"tau": tau, "empirical_max_norm": emp, "bound": b,
               "trials_within_bound": sum(r.bound_ok for r in runs),
               "sandwich_min_eig": sand,
               "lyapunov_violations": sum(l.violations for l in lyap)}
        ok &= (row["trials_within_bound"] == len(runs) and sand >= -1e-9
               and row["lyapunov_violations"] == 0)
        rows.append(row)
    bounds = [r["bound"] for r in rows]
    ok &= all(a > b for a, b in zip(bounds, bounds[1:]))
    report["curve"] = rows
    report["verdict"] = "PASS" if ok else "FAIL"
    with open(curve, "w") as fh:
        fh.write("tau,empirical_max_norm,bound\n")
        for r in rows:
            fh.write(f"{r['tau']},{r['empirical_max_norm']!r},{r['bound']!r}\n")
    _write_json(rep_path, report)
    return report, [curve, rep_path], EXIT_OK if ok else EXIT_CHECK


def cmd_gaindecay(args):
    model = _model(args)
    cfg = _read_config(args.config)
    ens, base = _ensemble(model, args, cfg)
    taus = sorted(set(args.tau or DEFAULT_TAUS))
    c = estimate_condition_constants(model, ens)
    if not c.valid:
        raise InputError("condition constants invalid: " + "; ".join(c.violations))
    curve = decay_study(model, ens, taus, args.p0_scale, constants=c)
    path = os.path.join(args.out, "decay.csv")
    write_decay_csv(curve, path)
    frac = curve.overall_decay_fraction
    report = {"taus": taus, "decay_fractions": curve.decay_fraction,
              "overall_decay_fraction": frac, "config": dataclasses.asdict(base),
              "verdict": "PASS" if not frac < 0.9 else "FAIL"}
    rep_path = os.path.join(args.out, "report.json")
    _write_json(rep_path, report)
    return report, [path, rep_path], EXIT_OK if report["verdict"] == "PASS" else EXIT_CHECK


def cmd_example1(args):
    cfg = _read_config(args.config)
    kw = {k: v for k, v in cfg.items() if k in {f.name for f in dataclasses.fields(Example1Config)}}
    if args.horizon is not None:
        kw["horizon"] = args.horizon
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.p_min is not None:
        kw["p_min"] = args.p_min
    try:
        conf = Example1Config(**kw)
    except (TypeError, ModelError) as exc:
        raise InputError(f"invalid example1 config: {exc}") from None
    worst, (y_io, y_ra, y_au) = equivalence_check(conf, trials=args.trials)
    path = os.path.join(args.out, "example1.csv")
    write_comparison_csv(path, y_io, y_ra, y_au)
    ok = worst <= 1e-10
    line = f"max_abs_diff ≤ 1e-10: {'PASS' if ok else 'FAIL'} (max_abs_diff={worst:.3e})"
    print(line)
    verdict = os.path.join(args.out, "verdict.txt")
    with open(verdict, "w") as fh:
        fh.write(line.split(" (")[0] + "\n")
    return ({"config": dataclasses.asdict(conf), "max_abs_diff": worst}, [path, verdict],
            EXIT_OK if ok else EXIT_CHECK)


COMMANDS = {
    "simulate": cmd_simulate,
    "filter": cmd_filter,
    "boundcheck": cmd_boundcheck,
    "gaindecay": cmd_gaindecay,
    "example1": cmd_example1,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="lpvss", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, model=True):
        if model:
            p.add_argument("--model", help="model specification JSON file")
        p.add_argument("--config", help="JSON file with simulation/experiment settings")
        p.add_argument("--seed", type=int, default=None, help="64-bit seed (default 0)")
        p.add_argument("--horizon", type=int, default=None, help="trajectory length")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        return p

    p = common(sub.add_parser("simulate", help="simulate a model and write signals.csv"))
    p.add_argument("--form", choices=("general", "innovation"), default="general")
    p = common(sub.add_parser("filter", help="run the innovation filter on a signals CSV"))
    p.add_argument("--signals", help="signals CSV (as written by simulate)")
    for name, hlp in (("boundcheck", "restart experiment against the convergence bound"),
                      ("gaindecay", "truncated-gain remainder decay study")):
        p = common(sub.add_parser(name, help=hlp))
        p.add_argument("--tau", type=int, action="append",
                       help="window length, repeatable (default 1 2 4 8)")
        p.add_argument("--trials", type=int, default=20, help="number of trajectories (default 20)")
        p.add_argument("--p0-scale", type=float, default=0.5,
                       help="restart matrix as a fraction of its admissible limit (default 0.5)")
    p = common(sub.add_parser("example1", help="three-way realization equivalence"), model=False)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--p-min", type=float, default=None, help="minimum |p| (default 0.1)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    start = time.perf_counter()
    try:
        os.makedirs(args.out, exist_ok=True)
        info, outputs, code = COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ModelError, NumericalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error: %s", exc)
        return EXIT_INTERNAL
    inputs = {}
    for name in ("model", "config", "signals"):
        path = getattr(args, name, None)
        if path:
            inputs[path] = _digest(path)
    manifest = {
        "command": args.command,
        "argv": list(argv) if argv is not None else sys.argv[1:],
        "flags": {k: v for k, v in vars(args).items() if k != "command"},
        "resolved": info,
        "seed": args.seed if args.seed is not None else 0,
        "inputs": inputs,
        "outputs": outputs,
        "exit_code": code,
        "version": __version__,
        "duration_s": time.perf_counter() - start,
    }
    _write_json(os.path.join(args.out, "manifest.json"), manifest)
    return code


if __name__ == "__main__":
    sys.exit(main())
