"""Command-line front end.

``sgld-stream run|check|drift|minorize|tv --config PATH [--out DIR] [--threads N] [--seed S]``

Exit codes: 0 pass, 1 check violation, 2 configuration error, 3 every chain
diverged, 4 step size above the drift threshold.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .assumptions import check_dissipativity, check_growth, default_grid, fit_constants
from .chain import ChainConfig, run_ensemble
from .config import ConfigError, ExperimentConfig, load_config
from .convergence import derive_seed, ensemble_moments, two_start_decay
from .diagnostics import (EmptySet, Ball, HalfBall, StepSizeError, drift_constants,
                          minorization_cert, moment_bound, verify_drift_mc, verify_minorization_mc)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_DIVERGED, EXIT_STEP = 0, 1, 2, 3, 4

# randomness sub-streams of the master seed, one per command
_RUN, _CHECK, _DRIFT, _MINORIZE, _TV = range(5)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(type(o))


def _clean(o):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    return o


def _dumps(obj) -> str:
    obj = json.loads(json.dumps(obj, default=_json_default))
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_run(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    model, stream, noise = cfg.build_model(), cfg.build_stream(), cfg.build_noise()
    ch = cfg.chain
    seed = derive_seed(cfg.seed, _RUN)
    ccfg = ChainConfig(ch["lambda"], ch["horizon"], ch["theta0"], seed, ch["checkpoints"])
    res = run_ensemble(model, stream, noise, ccfg, ch["n_chains"], threads)

    d = cfg.d
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["chain_id", "t"] + [f"theta_{j}" for j in range(d)])
    for i in range(res.n_chains):
        for k, t in enumerate(res.times):
            w.writerow([i, int(t)] + [_fmt(v) for v in res.snapshots[k, i]])
    _write(out / "snapshots.csv", buf.getvalue())

    moments = [None if m is None else m.to_dict() for m in ensemble_moments(res)]
    summary = {"command": "run", "master_seed": cfg.seed, "run_seed": seed,
               "chain_seed_scheme": "Philox(SeedSequence(run_seed, spawn_key=(chain_id, 0|1)))",
               "n_chains": res.n_chains, "n_diverged": res.n_diverged,
               "diverged_at": {str(i): int(t) for i, t in enumerate(res.diverged_at) if t >= 0},
               "checkpoints": res.times.tolist(), "moments": moments,
               "config": cfg.to_dict()}
    _write(out / "summary.json", _dumps(summary))
    return EXIT_DIVERGED if res.n_diverged == res.n_chains else EXIT_OK


def _grid(cfg: ExperimentConfig, model, stream):
    rng = np.random.default_rng(derive_seed(cfg.seed, _CHECK))
    ck = cfg.check
    return default_grid(model.d, stream, rng, ck["radii"], ck["n_directions"], ck["n_y"]), rng


def cmd_check(cfg: ExperimentConfig, out: Path | None = None, threads: int = 1) -> int:
    model, stream = cfg.build_model(), cfg.build_stream()
    grid, rng = _grid(cfg, model, stream)
    consts = cfg.declared_constants(model)
    result = {"command": "check"}
    if consts is not None:
        a1 = check_dissipativity(model, consts.Delta, consts.b, grid)
        a2 = check_growth(model, consts.K1, consts.K2, consts.K3, consts.beta, grid)
        result["source"] = "declared"
    else:
        fit = fit_constants(model, grid, rng)
        a1, a2 = fit.dissipativity, fit.growth
        result["source"] = "fitted"
        result["messages"] = fit.messages
    reports = [r.to_dict() for r in (a1, a2) if r is not None]
    passed = a1 is not None and a2 is not None and a1.passed and a2.passed
    result.update(passed=passed, reports=reports)
    text = _dumps(result)
    sys.stdout.write(text)
    if out is not None:
        _write(out / "check.json", text)
    return EXIT_OK if passed else EXIT_VIOLATION


def _require_constants(cfg, model):
    consts = cfg.declared_constants(model)
    if consts is None:
        raise ConfigError("constants", "model declares no constants; supply a 'constants' section")
    return consts


def _stream_moments(cfg, consts, stream):
    dr = cfg.drift
    M_b = dr["M_b"] if dr["M_b"] is not None else consts.b.expectation(stream.abs_moment)
    M_y = dr["M_y"] if dr["M_y"] is not None else stream.abs_moment(2.0 * consts.beta)
    return M_b, M_y


def cmd_drift(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    model, stream, noise = cfg.build_model(), cfg.build_stream(), cfg.build_noise()
    c = _require_constants(cfg, model)
    try:
        cert = drift_constants(c.Delta, c.K1, c.K2, c.K3, c.beta, c.b, noise.sigma2, cfg.lam)
    except StepSizeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        sys.stdout.write(_dumps({"command": "drift", "error": "step_size", "lambda": exc.lam,
                                 "threshold": exc.threshold}))
        return EXIT_STEP
    dr = cfg.drift
    rng = np.random.default_rng(derive_seed(cfg.seed, _DRIFT))
    rep = verify_drift_mc(model, noise, cfg.lam, cert, dr["theta_grid"], dr["y_grid"],
                          dr["n_samples"], rng)
    M_b, M_y = _stream_moments(cfg, c, stream)
    mb = None
    if M_b is not None and M_y is not None:
        mb = moment_bound(cfg.chain["theta0"], cert, M_b, M_y).to_dict()
    result = {"command": "drift", "certificate": cert.to_dict(), "verification": rep.to_dict(),
              "moment_bound": mb}
    text = _dumps(result)
    _write(out / "certificate.json", text)
    sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_VIOLATION


def cmd_minorize(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    model, noise = cfg.build_model(), cfg.build_noise()
    c = _require_constants(cfg, model)
    mn = cfg.minorize
    try:
        cert = minorization_cert(c.K1, c.K2, c.K3, c.beta, cfg.lam, noise, mn["n"])
    except ValueError as exc:
        raise ConfigError("noise", str(exc)) from None
    sets = {"ball": Ball(tuple([0.0] * cfg.d), mn["n"]), "upper_half": HalfBall(mn["n"]),
            "empty": EmptySet()}
    checks = []
    pts = [(th, y, s) for th in mn["theta_grid"] for y in mn["y_grid"] for s in mn["sets"]]
    gens = np.random.default_rng(derive_seed(cfg.seed, _MINORIZE)).spawn(len(pts))
    for (th, y, s), g in zip(pts, gens):
        chk = verify_minorization_mc(model, noise, cert, th, y, sets[s], mn["n_samples"], g)
        checks.append(dict(chk.to_dict(), theta=th, y=y, set=s))
    passed = all(ch["passed"] for ch in checks)
    result = {"command": "minorize", "certificate": cert.to_dict(), "passed": passed,
              "checks": checks}
    text = _dumps(result)
    _write(out / "certificate.json", text)
    sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_VIOLATION


def cmd_tv(cfg: ExperimentConfig, out: Path, threads: int = 1) -> int:
    model, stream, noise = cfg.build_model(), cfg.build_stream(), cfg.build_noise()
    tv = cfg.tv
    rep = two_start_decay(model, stream, noise, cfg.lam, tv["theta0_A"], tv["theta0_B"],
                          tv["checkpoints"], tv["n_chains"], derive_seed(cfg.seed, _TV),
                          tv["bins"], threads=threads)
    rows = ["t,tv,tv_se,noise_floor\n"]
    for p in rep.points:
        rows.append(f"{p.t},{_fmt(p.tv.value)},{_fmt(p.tv.std_error)},{_fmt(p.floor.value)}\n")
    _write(out / "tv_series.csv", "".join(rows))
    final, floor = rep.points[-1].tv.value, rep.points[-1].floor.value
    passed = final < tv["threshold"] or final <= 2.0 * floor
    result = {"command": "tv", "passed": passed, "final_tv": final, "final_noise_floor": floor,
              "diverged": rep.diverged, "seeds": rep.seeds,
              "series": [p.to_dict() for p in rep.points]}
    text = _dumps(result)
    _write(out / "tv_summary.json", text)
    sys.stdout.write(text)
    return EXIT_OK if passed else EXIT_VIOLATION


COMMANDS = {"run": cmd_run, "check": cmd_check, "drift": cmd_drift, "minorize": cmd_minorize,
            "tv": cmd_tv}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sgld-stream", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="experiment configuration (JSON)")
    p.add_argument("--out", default=".", help="output directory (default: current directory)")
    p.add_argument("--threads", type=int, default=1, help="threads for random number generation")
    p.add_argument("--seed", type=int, default=None, help="override the configuration seed")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed", "must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        if args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        return COMMANDS[args.command](cfg, Path(args.out), args.threads)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
