"""``nngp-ldp`` command line: run or validate a JSON experiment config.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import platform
import sys
from dataclasses import replace
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from . import io
from .chain import simulate_chain
from .config import (build_grid, build_network, build_seed, build_tolerances, config_hash, load_config)
from .diagnostics import clt_diagnostic, singvalue_tail_check
from .errors import ConfigError
from .nngp import NngpOptions, lln_distance_curve, nngp_chain
from .operators import Grid
from .posterior import (SearchOptions, TrainingSet, estimate_I0, mf_rate, posterior_resample)
from .rate import RateOptions, TailEvent, chain_rate, tail_slope

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _rate_options(params: dict, seed) -> RateOptions:
    keys = ("mc_samples", "max_iter", "gtol", "ess_floor", "rank")
    return RateOptions(seed=seed, **{k: params[k] for k in keys if k in params})


def _training(params: dict, base: Path) -> TrainingSet:
    t = params["training"]
    if "csv" in t:
        p = Path(t["csv"])
        return TrainingSet.from_csv(p if p.is_absolute() else base / p, t["beta"])
    return TrainingSet(np.asarray(t["inputs"], dtype=float), np.asarray(t["y"], dtype=float), t["beta"])


def _grid_for(cfg, train: TrainingSet | None = None) -> Grid:
    if "grid" in cfg:
        return build_grid(cfg["grid"])
    # no grid given: the training inputs themselves, unit weights
    return Grid(train.inputs, np.ones(train.P))


def _nngp_opts(cfg, params) -> NngpOptions:
    return NngpOptions(hermite_nodes=params.get("hermite_nodes", 40), tol=build_tolerances(cfg))


def run_simulate(cfg, out: Path, workers: int):
    net, grid, seed, p = build_network(cfg), build_grid(cfg["grid"]), build_seed(cfg), cfg["params"]
    lines = []
    for r in range(p.get("reps", 1)):
        ch = simulate_chain(net, p["N"], grid, seed.child("rep", r))
        io.write_chain(out / f"chain_{r:04d}", ch)
        lines.append(f"rep {r}: traces " + ", ".join(f"{np.trace(K.sym):.6g}" for K in ch.operators))
    return lines


def run_nngp(cfg, out: Path, workers: int):
    net, grid = build_network(cfg), build_grid(cfg["grid"])
    Ks = nngp_chain(net, grid, _nngp_opts(cfg, cfg["params"]))
    for layer, K in enumerate(Ks, start=2):
        io.write_kernel_csv(out / f"kernel_layer{layer}.csv", K.kernel_grid())
    return [f"layer {layer}: trace {np.trace(K.sym):.6g}" for layer, K in enumerate(Ks, start=2)]


def run_lln(cfg, out: Path, workers: int):
    net, grid, p = build_network(cfg), build_grid(cfg["grid"]), cfg["params"]
    curve = lln_distance_curve(net, grid, p["Ns"], p["reps"], build_seed(cfg), _nngp_opts(cfg, p), workers)
    io.write_table(out / "distance_curve.csv", curve.rows(), ["N", "layer", "median", "iqr"])
    return [f"N={r['N']} layer={r['layer']}: median {r['median']:.6g}" for r in curve.rows()]


def run_rate(cfg, out: Path, workers: int):
    net, grid, p, seed = build_network(cfg), build_grid(cfg["grid"]), cfg["params"], build_seed(cfg)
    if p.get("path", "nngp") == "simulated":
        if "N" not in p:
            raise ConfigError("params.N", "required when path is 'simulated'")
        Ks = simulate_chain(net, p["N"], grid, seed.child("path")).operators
    else:
        Ks = nngp_chain(net, grid, _nngp_opts(cfg, p))
    cr = chain_rate(Ks, net, _rate_options(p, seed.child("rate")))
    for layer, est in enumerate(cr.per_layer, start=1):
        io.write_rate(out / f"rate_layer{layer}", est)
    io.write_json(out / "rate_total.json", {"total": cr.total, "stderr": cr.stderr, "per_layer": cr.values})
    return [f"total rate {cr.total:.6g} (stderr {cr.stderr:.3g})"] + [
        f"layer {i}: {v:.6g}" for i, v in enumerate(cr.values, start=1)]


def run_tail(cfg, out: Path, workers: int):
    net, grid, p = build_network(cfg), build_grid(cfg["grid"]), cfg["params"]
    ev = p["event"]
    event = TailEvent(ev["threshold"], ev.get("functional", "trace"), ev.get("layer", 2),
                      ev.get("direction", ">="), tuple(ev.get("entry", (0, 0))))
    fit = tail_slope(event, net, grid, p["Ns"], p["reps"], build_seed(cfg), p.get("min_hits", 5))
    io.write_table(out / "tail.csv", fit.rows(), ["N", "reps", "hits", "prob", "neg_log_prob", "used"])
    io.write_json(out / "tail_fit.json", {"slope": fit.slope, "stderr": fit.stderr, "intercept": fit.intercept})
    return [f"tail slope {fit.slope:.6g} (stderr {fit.stderr:.3g})"]


def run_posterior(cfg, out: Path, workers: int):
    net, p, seed = build_network(cfg), cfg["params"], build_seed(cfg)
    train = _training(p, _base(cfg))
    grid = _grid_for(cfg, train)
    prior = [simulate_chain(net, p["N"], grid, seed.child("prior", r)) for r in range(p["reps"])]
    ens = posterior_resample(prior, train, p.get("mean_field", False), p["N"], seed.child("posterior"),
                             p.get("resample", False))
    io.write_posterior(out / "posterior", ens)
    return [f"ess {ens.ess:.6g} of {len(prior)}; log-weight spread {ens.spread:.6g}"]


def run_mf(cfg, out: Path, workers: int):
    net, p, seed = build_network(cfg), cfg["params"], build_seed(cfg)
    train = _training(p, _base(cfg))
    grid = _grid_for(cfg, train)
    opts = _rate_options(p, seed.child("rate"))
    search = SearchOptions(**p.get("search", {}))
    est = estimate_I0(net, grid, train, search, opts, seed.child("I0"))
    io.write_json(out / "I0.json", est.to_dict())
    rows = []
    N = p.get("N", 64)
    for r in range(p.get("chains", 0)):
        ch = simulate_chain(net, N, grid, seed.child("chain", r))
        v = mf_rate(ch.operators, train, net, est.I0_upper, replace(opts, seed=seed.child("mf", r)))
        rows.append({"chain": r, "mf_rate": v.value, "prior_rate": v.prior_rate, "quad_term": v.quad_term,
                     "stderr": v.stderr})
    io.write_table(out / "mf_rates.csv", rows, ["chain", "mf_rate", "prior_rate", "quad_term", "stderr"])
    return [f"I0 upper bound {est.I0_upper:.6g} (search exhausted: {est.exhausted})"]


def run_diagnostics(cfg, out: Path, workers: int):
    p, seed = cfg["params"], build_seed(cfg)
    lines = []
    if "clt" in p:
        c = p["clt"]
        rep = clt_diagnostic(build_network(cfg), c["inputs"], c["N"], c.get("M", 1), c["reps"], seed.child("clt"),
                             c.get("level", 0.01), c.get("method", "chain"), c.get("bootstrap", 200))
        io.write_table(out / "clt_coordinates.csv", rep.rows(),
                       ["coordinate", "skewness", "excess_kurtosis", "pvalue", "pass"])
        io.write_json(out / "clt.json", rep.to_dict())
        lines.append(f"CLT energy p-value {rep.energy_pvalue:.4g}: {'pass' if rep.passed else 'fail'}")
    if "singvalue" in p:
        s = p["singvalue"]
        rows = singvalue_tail_check(s["n1"], s["n2"], s.get("lam", 1.0), s["t_values"], s["reps"], s["C"],
                                    seed.child("singvalue"))
        cols = ["t", "threshold", "exceed", "reps", "empirical", "ci_low", "ci_high", "bound", "violated"]
        io.write_table(out / "singvalue_tail.csv", [vars(r) for r in rows], cols)
        lines.append(f"singular-value tail violations: {sum(r.violated for r in rows)}")
    return lines


RUNNERS = {
    "simulate": run_simulate, "nngp": run_nngp, "lln": run_lln, "rate": run_rate, "tail": run_tail,
    "posterior": run_posterior, "mf": run_mf, "diagnostics": run_diagnostics,
}


def _base(cfg) -> Path:
    return Path(cfg.get("_config_dir", "."))


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"nngp_ldp": pkg, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_experiment(config_path, seed: int | None = None, out: str | None = None, workers: int | None = None) -> Path:
    """Validate, run and write artifacts plus ``manifest.json`` and ``summary.txt``."""
    cfg = load_config(config_path)
    if seed is not None:
        cfg["seed"] = int(seed)
    if out is not None:
        cfg["out"] = out
    out_dir = Path(cfg.get("out") or Path(config_path).with_suffix("").name + "_out")
    if workers is None:
        workers = int(cfg.get("workers") or os.environ.get("NNGP_LDP_WORKERS", 1))
    recorded = {k: v for k, v in cfg.items() if k not in ("out", "workers")}
    cfg_hash = config_hash(recorded)
    cfg["_config_dir"] = str(Path(config_path).resolve().parent)
    out_dir.mkdir(parents=True, exist_ok=True)
    def manifest(status, error=None):
        files = sorted(p for p in out_dir.rglob("*") if p.is_file() and p.name != "manifest.json")
        body = {
            "config": recorded,
            "config_sha256": cfg_hash,
            "seed": cfg["seed"],
            "status": status,
            "versions": _versions(),
            "files": {str(p.relative_to(out_dir)): _sha256(p) for p in files},
        }
        if error:
            body["error"] = error
        io.write_json(out_dir / "manifest.json", body)

    try:
        lines = RUNNERS[cfg["kind"]](cfg, out_dir, max(1, workers))
    except Exception as exc:
        manifest("failed", f"{type(exc).__name__}: {exc}")
        raise
    (out_dir / "summary.txt").write_text(
        f"kind: {cfg['kind']}\nseed: {cfg['seed']}\n" + "\n".join(lines) + "\n", encoding="utf-8")
    manifest("ok")
    return out_dir


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nngp-ldp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--workers", type=int)
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            load_config(args.config)
            print(f"{args.config}: ok")
            return EXIT_OK
        out = run_experiment(args.config, args.seed, args.out, args.workers)
        print((out / "summary.txt").read_text(encoding="utf-8"), end="")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 -- any failure during a run maps to the runtime exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
