"""Command-line orchestration: subcommand dispatch and result persistence.

Every output file starts with comment headers naming the config hash,
generator identity and artifact version; bodies are deterministic given
(config, seed), independent of thread count.  Plot data only (CSV and
JSON); rendering is left to external tools.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import fields
from fractions import Fraction

from . import estimators, explore, oracle
from .walk import ballisticity_report, walk as simulate_walk
from .config import (
    ARTIFACT_VERSION,
    SCHEMA,
    SUBCOMMANDS,
    ExperimentConfig,
    config_hash,
    emit_config,
    make_manifest,
    parse_config,
    validate,
)
from .errors import ConfigError, OrthantLabError
from .geometry import Window
from .lattice import GENERATOR_ID, SiteField, subseed


def _header_lines(cfg) -> list:
    return [
        f"# config={config_hash(cfg)}",
        f"# generator={GENERATOR_ID}",
        f"# version={ARTIFACT_VERSION}",
    ]


def _write_csv(path, cfg, fieldnames, rows):
    buf = io.StringIO()
    for line in _header_lines(cfg):
        buf.write(line + "\n")
    writer = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _write_json(path, cfg, payload):
    doc = {
        "config": config_hash(cfg),
        "generator": GENERATOR_ID,
        "version": ARTIFACT_VERSION,
        "result": payload,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(x) -> str:
    return repr(float(x))


def _need(cfg, *keys):
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise ConfigError([f"{cfg.command}: missing required key {k!r}" for k in missing])


def _p_grid(cfg):
    if cfg.p_grid is not None:
        return list(cfg.p_grid)
    if cfg.p is not None:
        return [cfg.p]
    raise ConfigError([f"{cfg.command}: needs p or p_grid"])


def _n_list(cfg):
    if cfg.n_list is not None:
        return list(cfg.n_list)
    if cfg.n is not None:
        return [cfg.n]
    raise ConfigError([f"{cfg.command}: needs n or n_list"])


def _windows_for(cfg, n_list):
    if cfg.window_scale is not None:
        return [Window(cfg.window_scale * n) for n in n_list]
    _need(cfg, "window")
    return Window(cfg.window)


THETA_FIELDS = ["p", "n", "eta", "successes", "trials", "window", "truncation_rate"]
FIT_FIELDS = ["p", "eta", "c_p", "stderr", "r2"]
CRITICAL_FIELDS = ["eta", "p_lo", "p_hi", "n", "window"]
GAMMA_FIELDS = ["u", "n", "gamma_hat", "stderr"]


def _run_theta(cfg, out):
    n_list = _n_list(cfg)
    curve = estimators.estimate_theta(
        _p_grid(cfg), n_list, cfg.eta_fraction(), _windows_for(cfg, n_list),
        cfg.trials, d=cfg.d, master_seed=cfg.seed,
    )
    rows = [
        {**r, "truncation_rate": _fmt(r["truncation_rate"])} for r in curve.rows()
    ]
    path = os.path.join(out, "theta.csv")
    _write_csv(path, cfg, THETA_FIELDS, rows)
    return [path], curve


def _run_sweep(cfg, out):
    paths, curve = _run_theta(cfg, out)
    fit_rows = []
    for p in curve.p_grid:
        try:
            fit = estimators.fit_decay(curve, p, min_successes=cfg.min_successes)
            fit_rows.append({
                "p": p, "eta": str(curve.eta), "c_p": _fmt(fit.c_p),
                "stderr": _fmt(fit.stderr), "r2": _fmt(fit.r2),
            })
        except OrthantLabError as exc:
            fit_rows.append({
                "p": p, "eta": str(curve.eta), "c_p": "", "stderr": "",
                "r2": f"error:{exc.kind}",
            })
    path = os.path.join(out, "fits.csv")
    _write_csv(path, cfg, FIT_FIELDS, fit_rows)
    return paths + [path], None


def _run_critical(cfg, out):
    _need(cfg, "window")
    w = Window(cfg.window)
    if cfg.kind == "ptilde":
        _need(cfg, "n")
        est = estimators.estimate_ptilde(
            cfg.eta_fraction(), cfg.n, w, cfg.trials, cfg.tol, d=cfg.d,
            master_seed=cfg.seed, threshold=cfg.threshold,
        )
        name = "critical_ptilde.csv"
    else:
        est = estimators.estimate_pc(
            w, cfg.trials, cfg.tol, d=cfg.d, master_seed=cfg.seed,
            depth=cfg.depth, threshold=cfg.threshold,
        )
        name = "critical_pc.csv"
    row = {
        "eta": "" if est.eta is None else str(est.eta),
        "p_lo": _fmt(est.p_lo), "p_hi": _fmt(est.p_hi),
        "n": est.n, "window": est.window,
    }
    path = os.path.join(out, name)
    _write_csv(path, cfg, CRITICAL_FIELDS, [row])
    return [path], est


def _run_shape(cfg, out):
    _need(cfg, "u", "window")
    n_list = _n_list(cfg)
    _need(cfg, "p")
    est = estimators.estimate_gamma(
        tuple(cfg.u), n_list, Window(cfg.window), cfg.trials, cfg.p,
        d=cfg.d, master_seed=cfg.seed,
    )
    rows = []
    for n in est.n_list:
        mean, se, cnt, nones = est.per_n[n]
        rows.append({
            "u": ",".join(str(c) for c in est.u), "n": n,
            "gamma_hat": _fmt(mean), "stderr": _fmt(se),
        })
    path = os.path.join(out, "gamma.csv")
    _write_csv(path, cfg, GAMMA_FIELDS, rows)
    return [path], est


def _run_walk(cfg, out):
    _need(cfg, "p")
    stats = ballisticity_report(
        cfg.p, cfg.steps, cfg.walks, d=cfg.d, master_seed=cfg.seed,
        quenched=cfg.quenched,
    )
    payload = {
        "p": stats.p, "steps": stats.steps, "walks": stats.walks,
        "speed": [float(x) for x in stats.speed],
        "speed_stderr": [float(x) for x in stats.speed_stderr],
        "covariance": [[float(x) for x in row] for row in stats.covariance],
        "min_eigenvalue": stats.min_eigenvalue,
        "min_eigenvalue_stderr": stats.min_eigenvalue_stderr,
        "drift_along_ones": stats.drift_along_ones,
        "drift_stderr": stats.drift_stderr,
        "pairwise_speed_diffs": stats.pairwise_speed_diffs,
        "quenched": stats.quenched,
    }
    outputs = []
    path = os.path.join(out, "walk_stats.json")
    _write_json(path, cfg, payload)
    outputs.append(path)
    if cfg.paths:
        env = SiteField(subseed(cfg.seed, 101, 0), cfg.d)
        pth = simulate_walk(env, cfg.p, cfg.steps, subseed(cfg.seed, 202, 0))
        rows = [
            {"step": t, **{f"x{a+1}": int(pth.positions[t, a]) for a in range(cfg.d)}}
            for t in range(pth.steps + 1)
        ]
        ppath = os.path.join(out, "walk_path.csv")
        _write_csv(ppath, cfg, ["step"] + [f"x{a+1}" for a in range(cfg.d)], rows)
        outputs.append(ppath)
    return outputs, stats


def _run_osss(cfg, out):
    _need(cfg, "n", "window")
    rep = explore.osss_check(
        _p_grid(cfg), cfg.n, cfg.eta_fraction(), Window(cfg.window), d=cfg.d,
        exact=cfg.exact, master_seed=cfg.seed, trials=cfg.trials,
    )
    path = os.path.join(out, "osss.json")
    _write_json(path, cfg, rep)
    return [path], rep


def _run_russo(cfg, out):
    _need(cfg, "n", "window")
    rep = explore.russo_check(
        cfg.n, cfg.eta_fraction(), Window(cfg.window), _p_grid(cfg), d=cfg.d,
    )
    path = os.path.join(out, "russo.json")
    _write_json(path, cfg, rep)
    return [path], rep


def _run_oracle(cfg, out):
    _need(cfg, "n", "window")
    poly = oracle.enumerate_theta(cfg.n, cfg.eta_fraction(), Window(cfg.window), cfg.d)
    payload = poly.to_dict()
    payload["eta"] = cfg.eta
    payload["n"] = cfg.n
    payload["window"] = cfg.window
    payload["theta_at"] = {
        repr(p): float(poly.eval_exact(Fraction(p).limit_denominator(10**9)))
        for p in _p_grid(cfg)
    } if (cfg.p is not None or cfg.p_grid is not None) else {}
    path = os.path.join(out, "oracle.json")
    _write_json(path, cfg, payload)
    for key, val in payload["theta_at"].items():
        print(f"theta(p={key}) = {val}")
    return [path], poly


def _run_explore_trace(cfg, out):
    _need(cfg, "n", "window", "k", "p")
    field = SiteField(cfg.seed, cfg.d)
    trace = explore.run_tree(
        field, cfg.p, cfg.n, cfg.eta_fraction(), cfg.k, Window(cfg.window),
        round_cap=cfg.round_cap,
    )
    path = os.path.join(out, "trace.jsonl")
    with open(path, "w") as fh:
        fh.write(json.dumps({
            "config": config_hash(cfg), "generator": GENERATOR_ID,
            "version": ARTIFACT_VERSION, "outcome": trace.outcome,
            "k": trace.k, "n": trace.n, "reveals": len(trace.revealed),
        }, sort_keys=True) + "\n")
        for v, bit, phase, rnd in trace.revealed:
            fh.write(json.dumps({
                "v": list(v), "bit": bit, "phase": phase, "round": rnd,
            }) + "\n")
    return [path], trace


_RUNNERS = {
    "theta": _run_theta,
    "sweep": _run_sweep,
    "critical": _run_critical,
    "shape": _run_shape,
    "walk": _run_walk,
    "osss-check": _run_osss,
    "russo-check": _run_russo,
    "oracle": _run_oracle,
    "explore-trace": _run_explore_trace,
}


def run(cfg: ExperimentConfig):
    """Dispatch a validated config; returns the run manifest."""
    problems = validate(cfg)
    if problems:
        raise ConfigError(problems)
    if cfg.command not in _RUNNERS:
        raise ConfigError([f"unknown command {cfg.command!r}"])
    import numba

    numba.set_num_threads(max(1, min(cfg.threads, numba.config.NUMBA_NUM_THREADS)))
    os.makedirs(cfg.out_dir, exist_ok=True)
    outputs, _ = _RUNNERS[cfg.command](cfg, cfg.out_dir)
    manifest = make_manifest(cfg, [os.path.basename(p) for p in outputs])
    mpath = os.path.join(cfg.out_dir, "manifest.json")
    with open(mpath, "w") as fh:
        fh.write(manifest.to_json() + "\n")
    cpath = os.path.join(cfg.out_dir, "config.txt")
    with open(cpath, "w") as fh:
        fh.write(emit_config(cfg))
    return manifest


def _add_flags(parser):
    for key, (typ, _default) in SCHEMA.items():
        if key == "command":
            continue
        flag = "--" + key.replace("_", "-")
        if typ == "bool":
            parser.add_argument(flag, dest=key, type=str, default=None,
                                metavar="BOOL")
        elif typ in ("float_list", "int_list"):
            parser.add_argument(flag, dest=key, type=str, default=None,
                                metavar="LIST")
        else:
            parser.add_argument(flag, dest=key, type=str, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="orthantlab",
        description="Simulation laboratory for orthant-model percolation",
    )
    parser.add_argument("--config", default=None, help="config file path")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        _add_flags(sp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config:
        with open(args.config) as fh:
            base = parse_config(fh.read())
        values = {
            f.name: getattr(base, f.name)
            for f in fields(base) if getattr(base, f.name) is not None
        }
    values["command"] = args.command
    from .config import _parse_value

    try:
        for key in SCHEMA:
            if key == "command":
                continue
            raw = getattr(args, key, None)
            if raw is not None:
                values[key] = _parse_value(key, raw)
        cfg = ExperimentConfig(**values)
        manifest = run(cfg)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return 2
    except OrthantLabError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc)}),
              file=sys.stderr)
        return 1
    print(f"wrote {len(manifest.outputs)} file(s) to {cfg.out_dir} "
          f"[config {manifest.config_hash}]")
    return 0


if __name__ == "__main__":
    sys.exit(main())
