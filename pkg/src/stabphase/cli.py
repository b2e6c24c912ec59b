"""
Command-line front end.

Every subcommand writes plot-ready CSV files, each with a ``#`` header
describing the run, plus one ``<command>_metadata.json`` file next to them.
Options can also come from a flat ``key = value`` file passed with
``--config``; command-line flags win over file values.

Examples::

    stabphase bayes1q --phi 2 --budget 500 --seed 3 --dump-posterior 1,2,10,500
    stabphase compare --model three_plaquette --methods ccphom,bayes-marginal \\
        --budgets 250,500,1000,2000,4000 --trials 2000 --seed 7
    stabphase oracle-check --samples 100 --seed 1

Exit status: 0 on success, 1 if oracle-check exceeds its tolerance, 2 for an
invalid configuration, 3 for an I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, analysis, models
from .estimators import (BayesConfig, ConfigError, RamseyConfig, bayes_single_adaptive,
                         ramsey_scan)
from .phasecore import bayes_update, uniform_prior
from .simkernel import PRNG_ALGORITHM, spawn_rng

OUTDIR_ENV = "STABPHASE_OUTDIR"
ORACLE_TOLERANCE = 1e-10

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    """Invalid configuration; mapped to exit status 2."""


# parsing

def int_list(text: str):
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def name_list(text: str):
    vals = [v.strip() for v in str(text).split(",") if v.strip()]
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def boolean(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# option name -> (type, default, help); shared by several subcommands
_OPTIONS = {
    "seed": (int, 0, "master seed"),
    "trials": (int, 1000, "Monte-Carlo trials per budget"),
    "budgets": (int_list, [250, 500, 1000, 2000, 4000], "comma-separated budgets n"),
    "workers": (int, None, "worker processes (default: available cores)"),
    "phi": (float, 1.0, "true phase"),
    "budget": (int, 500, "preparations"),
    "grid_bins": (int, 2048, "1-D grid bins"),
    "bins_phase": (int, 512, "2-D grid phase bins"),
    "bins_offset": (int, 256, "2-D grid offset bins"),
    "warmup": (int, 20, "random-selection preparations before adaptive"),
    "selection": (str, None, "measurement selection rule"),
    "scan_points": (int, 10, "scan points M"),
    "shots": (int, 50, "shots per scan point"),
    "iterations": (int_list, [1], "PHOM iterations I (comma-separated for a sweep)"),
    "mpp": (int, None, "fixed measurements per point (PHOM iteration sweep)"),
    "model": (str, "two_plaquette", "two_plaquette or three_plaquette"),
    "methods": (name_list, ["ccphom", "bayes-marginal"], "comma-separated methods"),
    "independent_sampling": (boolean, False, "draw combos independently"),
    "dump_posterior": (int_list, None, "steps at which to write the posterior"),
    "samples": (int, 100, "random (phi, theta) draws per model"),
}

_COMMANDS = {
    "ramsey": ("single-qubit Ramsey scan", ["phi", "scan_points", "shots", "seed"]),
    "bayes1q": ("single-qubit adaptive Bayes",
                ["phi", "budget", "grid_bins", "seed", "dump_posterior"]),
    "phom": ("PHOM variance curve or iteration sweep",
             ["model", "budgets", "trials", "seed", "workers", "scan_points", "iterations", "mpp"]),
    "ccphom": ("constant-cosine PHOM variance curve",
               ["model", "budgets", "trials", "seed", "workers", "scan_points"]),
    "bayes-direct": ("direct constant-cosine Bayes variance curve (two_plaquette)",
                     ["budgets", "trials", "seed", "workers", "bins_phase", "bins_offset",
                      "selection", "scan_points"]),
    "bayes-marginal": ("marginal-likelihood Bayes variance curve",
                       ["model", "budgets", "trials", "seed", "workers", "grid_bins",
                        "selection", "warmup", "independent_sampling"]),
    "compare": ("variance curves of several methods on one model",
                ["model", "methods", "budgets", "trials", "seed", "workers", "grid_bins",
                 "warmup", "scan_points", "bins_phase", "bins_offset"]),
    "oracle-check": ("statevector vs analytic stabilizer expectations", ["samples", "seed"]),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stabphase", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd, (desc, opts) in _COMMANDS.items():
        p = sub.add_parser(cmd, help=desc, description=desc)
        p.add_argument("--config", help="flat key = value file")
        p.add_argument("--out", help=f"output directory (default ${OUTDIR_ENV} or ./results)")
        for name in opts:
            typ, _, hlp = _OPTIONS[name]
            p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ,
                           default=argparse.SUPPRESS, help=hlp)
    return parser


def read_config_file(path: str) -> dict:
    """Flat ``key = value`` (or ``key: value``) lines; ``#`` starts a comment."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise UsageError(f"{path}:{num}: expected key = value")
        key, val = (s.strip() for s in line.split(sep, 1))
        out[key.replace("-", "_")] = val
    return out


def parse_config(argv=None) -> dict:
    """Defaults, then the config file, then flags. Returns a flat dict."""
    args = build_parser().parse_args(argv)
    cmd = args.command
    allowed = _COMMANDS[cmd][1]
    cfg = {name: _OPTIONS[name][1] for name in allowed}
    if args.config:
        for key, raw in read_config_file(args.config).items():
            if key not in allowed:
                raise UsageError(f"unknown config key {key!r} for {cmd}")
            try:
                cfg[key] = _OPTIONS[key][0](raw)
            except (ValueError, argparse.ArgumentTypeError):
                raise UsageError(f"config key {key!r}: invalid value {raw!r}")
    for name in allowed:
        if hasattr(args, name):
            cfg[name] = getattr(args, name)
    cfg["command"] = cmd
    cfg["out"] = args.out or os.environ.get(OUTDIR_ENV) or "results"
    return cfg


# output

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: dict, columns, rows) -> None:
    lines = [f"# {k}: {v}" for k, v in header.items()]
    lines.append(",".join(columns))
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in ("out", "workers")}


def _base_header(cfg: dict) -> dict:
    h = {"stabphase": __version__, "prng": PRNG_ALGORITHM}
    h.update({k: (",".join(map(str, v)) if isinstance(v, list) else v)
              for k, v in _echo(cfg).items()})
    return h


CURVE_COLUMNS = ("n", "sigma2", "stderr", "trials", "diffuse_count")


def _curve_rows(points):
    return [(p.n, p.sigma2, p.stderr, p.trials, p.diffuse_count) for p in points]


# commands

def _cmd_ramsey(cfg, out: Path, meta: dict) -> None:
    rc = RamseyConfig(cfg["scan_points"], cfg["shots"])
    res = ramsey_scan(cfg["phi"], rc, spawn_rng(cfg["seed"], 0))
    thetas, expect = res.flags["scan"]
    stderr = np.sqrt(np.clip(1.0 - expect ** 2, 0.0, None) / rc.shots_per_point)
    write_csv(out / "ramsey_scan.csv", _base_header(cfg), ("theta", "expectation", "stderr"),
              zip(thetas, expect, stderr))
    meta["estimate"] = float(res.phases_est[0])
    meta["fit_variance"] = float(res.variances[0])
    print(f"phi_est = {res.phases_est[0]:.6f}")


def _cmd_bayes1q(cfg, out: Path, meta: dict) -> None:
    bc = BayesConfig(budget=cfg["budget"], grid_bins=cfg["grid_bins"])
    dumps = sorted(set(cfg["dump_posterior"] or ()))
    if dumps and (dumps[0] < 1 or dumps[-1] > bc.budget):
        raise UsageError(f"dump_posterior steps must lie in [1, {bc.budget}]")
    res = bayes_single_adaptive(cfg["phi"], bc, spawn_rng(cfg["seed"], 0), record=bool(dumps))
    meta["grid_bins"] = bc.grid_bins
    meta["estimate"] = float(res.phases_est[0])
    meta["variance"] = float(res.variances[0])
    if dumps:
        # replay the recorded measurements through the reference update
        tt = res.flags["theta_tilde"][:, 0]
        outcomes = [r.outcome for r in res.history]
        grid = uniform_prior(bc.grid_bins)
        header = _base_header(cfg)
        for step in range(1, dumps[-1] + 1):
            o, t = outcomes[step - 1], tt[step - 1]
            grid = bayes_update(grid, lambda phi: 0.5 * (1.0 + o * np.cos(phi - t)))
            if step in dumps:
                write_csv(out / f"bayes1q_posterior_{step}.csv", {**header, "step": step},
                          ("phi_bin", "density"), zip(grid.points, grid.density))
    print(f"phi_est = {res.phases_est[0]:.6f}  sigma2 = {res.variances[0]:.3e}")


def _spec_for(method: str, cfg: dict) -> analysis.EstimatorSpec:
    model = cfg.get("model", "two_plaquette")
    if method in ("phom", "ccphom"):
        params = {"scan_points": cfg["scan_points"]}
        if method == "phom":
            params["iterations"] = cfg["iterations"][0]
    elif method == "bayes-direct":
        model = "two_plaquette"
        params = {"bins_phase": cfg["bins_phase"], "bins_offset": cfg["bins_offset"],
                  "scan_points": cfg["scan_points"]}
        if cfg.get("selection"):
            params["selection"] = cfg["selection"]
    elif method == "bayes-marginal":
        params = {"grid_bins": cfg["grid_bins"], "warmup": cfg["warmup"]}
        if cfg.get("selection"):
            params["selection"] = cfg["selection"]
        if cfg.get("independent_sampling"):
            params["independent_sampling"] = True
    else:
        raise UsageError(f"method {method!r} is not available here")
    return analysis.EstimatorSpec(method, model, params)


def _curve(method: str, cfg: dict, out: Path, meta: dict, stem: str) -> None:
    spec = _spec_for(method, cfg)
    points = analysis.monte_carlo_curve(spec, cfg["budgets"], cfg["trials"], cfg["seed"],
                                        cfg.get("workers"))
    header = {**_base_header(cfg), "method": method, "model": spec.model}
    write_csv(out / f"{stem}.csv", header, CURVE_COLUMNS, _curve_rows(points))
    entry = {"model": spec.model, "params": spec.params,
             "n": [p.n for p in points]}
    if len(points) >= 4:
        c, resid = analysis.fit_inverse_n([(p.n, p.sigma2) for p in points])
        entry.update(fitted_c=c, fit_residual=resid)
        print(f"{method} ({spec.model}): sigma2 ~ {c:.4g}/n  (rms rel. residual {resid:.3f})")
    else:
        for p in points:
            print(f"{method} ({spec.model}): n={p.n} sigma2={p.sigma2:.4g} +- {p.stderr:.2g}")
    if method == "phom":
        m = models.build_model(spec.model)
        entry["designated_qubits"] = {c.id: c.designated_qubit for c in m.combos}
    if method == "bayes-direct":
        entry["grid"] = [cfg["bins_phase"], cfg["bins_offset"]]
    meta.setdefault("curves", {})[stem] = entry


def _cmd_phom_sweep(cfg, out: Path, meta: dict) -> None:
    """Variance at fixed mpp for each listed iteration count."""
    model = models.build_model(cfg["model"])
    rows = []
    for it in cfg["iterations"]:
        n = len(model.combos) * cfg["scan_points"] * cfg["mpp"] * it
        spec = analysis.EstimatorSpec("phom", cfg["model"],
                                      {"scan_points": cfg["scan_points"], "iterations": it})
        p = analysis.monte_carlo_variance(spec, n, cfg["trials"], cfg["seed"], cfg.get("workers"))
        rows.append((it, p.n, p.sigma2, p.stderr, p.trials, p.diffuse_count))
        print(f"I={it}: n={p.n} sigma2={p.sigma2:.4g} +- {p.stderr:.2g}")
    write_csv(out / "phom_iterations.csv", _base_header(cfg),
              ("iterations",) + CURVE_COLUMNS, rows)
    meta["designated_qubits"] = {c.id: c.designated_qubit for c in model.combos}


def _cmd_oracle(cfg, out: Path, meta: dict) -> int:
    rng = spawn_rng(cfg["seed"], 0).generator
    worst = 0.0
    for name in ("two_plaquette", "three_plaquette"):
        m = models.build_model(name)
        dev = 0.0
        for _ in range(cfg["samples"]):
            phi = rng.uniform(-np.pi, np.pi, m.num_phases)
            theta = rng.uniform(-np.pi, np.pi, m.num_angles)
            sv = models.statevector_expectations(models.statevector_build(phi, theta, m), m)
            an = np.array([c.likelihood.expectation(phi, theta) for c in m.combos])
            dev = max(dev, float(np.max(np.abs(sv - an))))
        meta.setdefault("max_deviation", {})[name] = dev
        print(f"{name}: max |statevector - analytic| = {dev:.3e}")
        worst = max(worst, dev)
    print(f"max deviation: {worst:.3e}")
    return EXIT_OK if worst <= ORACLE_TOLERANCE else EXIT_TOLERANCE


def run(cfg: dict) -> int:
    cmd = cfg["command"]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    meta = {"config": _echo(cfg), "prng": PRNG_ALGORITHM, "version": __version__,
            "reduction": "per-trial results summed in trial order (worker-count independent)"}
    start = time.perf_counter()
    status = EXIT_OK
    if cmd == "ramsey":
        _cmd_ramsey(cfg, out, meta)
    elif cmd == "bayes1q":
        _cmd_bayes1q(cfg, out, meta)
    elif cmd == "phom" and cfg.get("mpp"):
        _cmd_phom_sweep(cfg, out, meta)
    elif cmd == "phom" and len(cfg["iterations"]) > 1:
        raise UsageError("a list of iterations needs --mpp")
    elif cmd in ("phom", "ccphom", "bayes-direct", "bayes-marginal"):
        _curve(cmd, cfg, out, meta, cmd.replace("-", "_"))
    elif cmd == "compare":
        for method in cfg["methods"]:
            _curve(method, cfg, out, meta, f"compare_{cfg['model']}_{method.replace('-', '_')}")
    elif cmd == "oracle-check":
        status = _cmd_oracle(cfg, out, meta)
    meta["duration_s"] = time.perf_counter() - start
    with open(out / f"{cmd.replace('-', '_')}_metadata.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, default=_json_default)
        fh.write("\n")
    return status


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return str(obj)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
