"""Experiment configuration: JSON schema, validation and object builders.

A configuration is a JSON object with ``schema_version`` 1. Parsing fills in
every default, so ``parse(serialize(parse(x))) == parse(x)``. Validation
errors name the offending field with a dotted path.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from typing import Any

import numpy as np

from .models import (ACTIVATIONS, DeclaredConstants, MLPSpec, PowerB, RegressionSpec,
                     UpdateModel, anti_dissipative_model, linear_model, regression_model,
                     tamed_mlp_model, untamed_mlp_model, zero_model)
from .noise import NoiseModel
from .streams import (AR1Stream, BoundedStream, IIDGaussianStream, RegressionStream,
                      StationaryStream, ZeroStream)

__all__ = ["SCHEMA_VERSION", "ConfigError", "ExperimentConfig", "load_config", "parse_config"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _req(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}", "required field is missing")
    return d[key]


def _num(v, path, lo=None, hi=None, lo_open=False, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer:
        if int(v) != v:
            raise ConfigError(path, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
        if not np.isfinite(v):
            raise ConfigError(path, "must be finite")
    if lo is not None and (v <= lo if lo_open else v < lo):
        raise ConfigError(path, f"must be {'>' if lo_open else '>='} {lo}, got {v}")
    if hi is not None and v > hi:
        raise ConfigError(path, f"must be <= {hi}, got {v}")
    return v


def _vec(v, path, length=None):
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a non-empty list of numbers")
    out = [_num(x, f"{path}[{i}]") for i, x in enumerate(v)]
    if length is not None and len(out) != length:
        raise ConfigError(path, f"expected length {length}, got {len(out)}")
    return out


def _matrix(v, path, cols=None):
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a non-empty list of vectors")
    return [_vec(row, f"{path}[{i}]", cols) for i, row in enumerate(v)]


def _unknown(d: dict, allowed: set, path: str):
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown field")


def _section(d, key, path):
    v = d.get(key)
    if v is None:
        return None
    if not isinstance(v, dict):
        raise ConfigError(f"{path}.{key}", "expected an object")
    return v


# --------------------------------------------------------------------------------------


def _parse_model(m: dict) -> dict:
    p = "model"
    kind = _req(m, "kind", p)
    if kind == "linear":
        _unknown(m, {"kind", "d"}, p)
        return {"kind": kind, "d": _num(m.get("d", 1), f"{p}.d", 1, integer=True)}
    if kind in ("zero", "anti_dissipative"):
        _unknown(m, {"kind", "d", "m"}, p)
        return {"kind": kind, "d": _num(m.get("d", 1), f"{p}.d", 1, integer=True),
                "m": _num(m.get("m", 1), f"{p}.m", 1, integer=True)}
    act = m.get("activation", "tanh")
    if act not in ACTIVATIONS:
        raise ConfigError(f"{p}.activation", f"unknown activation {act!r}")
    if kind == "regression":
        _unknown(m, {"kind", "d0", "d1", "kappa", "activation"}, p)
        return {"kind": kind, "d0": _num(_req(m, "d0", p), f"{p}.d0", 1, integer=True),
                "d1": _num(_req(m, "d1", p), f"{p}.d1", 1, integer=True),
                "kappa": _num(m.get("kappa", 0.1), f"{p}.kappa", 0, lo_open=True),
                "activation": act}
    if kind in ("tamed_mlp", "untamed_mlp"):
        _unknown(m, {"kind", "dims", "eta", "r", "quartic_b", "activation"}, p)
        dims = _req(m, "dims", p)
        if not isinstance(dims, list) or len(dims) < 3:
            raise ConfigError(f"{p}.dims", "need at least three layer sizes")
        dims = [_num(x, f"{p}.dims[{i}]", 1, integer=True) for i, x in enumerate(dims)]
        quartic = m.get("quartic_b", False)
        if not isinstance(quartic, bool):
            raise ConfigError(f"{p}.quartic_b", "expected true or false")
        r = m.get("r")
        r = MLPSpec.default_r(len(dims) - 1, quartic) if r is None else _num(r, f"{p}.r", 0)
        return {"kind": kind, "dims": dims, "eta": _num(m.get("eta", 1.0), f"{p}.eta", 0, lo_open=True),
                "r": r, "quartic_b": quartic, "activation": act}
    raise ConfigError(f"{p}.kind", f"unknown model kind {kind!r}")


def _parse_stream(s: dict, path="stream") -> dict:
    kind = _req(s, "kind", path)
    if kind in ("zero", "iid_gaussian"):
        _unknown(s, {"kind", "m"}, path)
        return {"kind": kind, "m": _num(s.get("m", 1), f"{path}.m", 1, integer=True)}
    if kind == "ar1":
        _unknown(s, {"kind", "m", "rho"}, path)
        rho = _num(s.get("rho", 0.0), f"{path}.rho")
        if not abs(rho) < 1:
            raise ConfigError(f"{path}.rho", "must satisfy |rho| < 1")
        return {"kind": kind, "m": _num(s.get("m", 1), f"{path}.m", 1, integer=True), "rho": rho}
    if kind == "bounded":
        _unknown(s, {"kind", "bound", "inner"}, path)
        inner = _section(s, "inner", path) or {"kind": "iid_gaussian", "m": 1}
        return {"kind": kind, "bound": _num(s.get("bound", 1.0), f"{path}.bound", 0, lo_open=True),
                "inner": _parse_stream(inner, f"{path}.inner")}
    if kind == "regression":
        _unknown(s, {"kind", "weights", "bias", "rho", "label_sd", "activation"}, path)
        W = _matrix(_req(s, "weights", path), f"{path}.weights")
        if len({len(r) for r in W}) != 1:
            raise ConfigError(f"{path}.weights", "rows must have equal length")
        bias = s.get("bias")
        bias = [0.0] * len(W) if bias is None else _vec(bias, f"{path}.bias", len(W))
        rho = _num(s.get("rho", 0.0), f"{path}.rho")
        if not abs(rho) < 1:
            raise ConfigError(f"{path}.rho", "must satisfy |rho| < 1")
        act = s.get("activation", "tanh")
        if act not in ACTIVATIONS:
            raise ConfigError(f"{path}.activation", f"unknown activation {act!r}")
        return {"kind": kind, "weights": W, "bias": bias, "rho": rho,
                "label_sd": _num(s.get("label_sd", 0.1), f"{path}.label_sd", 0), "activation": act}
    raise ConfigError(f"{path}.kind", f"unknown stream kind {kind!r}")


def _parse_noise(n: dict) -> dict:
    p = "noise"
    _unknown(n, {"kind", "scale"}, p)
    kind = n.get("kind", "gaussian")
    if kind not in ("gaussian", "gaussian2", "laplace", "zero"):
        raise ConfigError(f"{p}.kind", f"unsupported noise kind {kind!r}")
    out = {"kind": kind}
    if kind == "laplace":
        out["scale"] = _num(n.get("scale", 1.0), f"{p}.scale", 0, lo_open=True)
    return out


def _parse_b(b, path):
    if not isinstance(b, dict):
        raise ConfigError(path, "expected an object with scale, degree, offset")
    _unknown(b, {"scale", "degree", "offset"}, path)
    return {"scale": _num(b.get("scale", 0.5), f"{path}.scale", 0),
            "degree": _num(b.get("degree", 2.0), f"{path}.degree", 0),
            "offset": _num(b.get("offset", 0.0), f"{path}.offset", 0)}


def _parse_constants(c: dict | None, path: str) -> dict | None:
    if c is None:
        return None
    keys = {"Delta", "b", "K1", "K2", "K3", "beta"}
    _unknown(c, keys, path)
    missing = keys - set(c)
    if missing:
        raise ConfigError(f"{path}.{sorted(missing)[0]}", "required field is missing")
    return {"Delta": _num(c["Delta"], f"{path}.Delta", 0, lo_open=True),
            "b": _parse_b(c["b"], f"{path}.b"),
            "K1": _num(c["K1"], f"{path}.K1", 0), "K2": _num(c["K2"], f"{path}.K2", 0),
            "K3": _num(c["K3"], f"{path}.K3", 0), "beta": _num(c["beta"], f"{path}.beta", 1)}


def _model_dim(model: dict) -> int:
    k = model["kind"]
    if k in ("linear", "zero", "anti_dissipative"):
        return model["d"]
    if k == "regression":
        return model["d0"] * model["d1"] + model["d1"]
    dims = model["dims"]
    return sum(a * b for a, b in zip(dims, dims[1:]))


def _theta0(v, model: dict, seed: int) -> list:
    """An explicit vector, ``{"fill": c}`` or ``{"norm": r}`` (seeded random direction)."""
    path = "chain.theta0"
    if isinstance(v, list):
        return _vec(v, path)
    if not isinstance(v, dict) or len(v) != 1 or not set(v) <= {"fill", "norm"}:
        raise ConfigError(path, 'expected a list, {"fill": c} or {"norm": r}')
    d = _model_dim(model)
    if "fill" in v:
        return [_num(v["fill"], f"{path}.fill")] * d
    r = _num(v["norm"], f"{path}.norm", 0)
    u = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(99,))).standard_normal(d)
    return (r * u / np.linalg.norm(u)).tolist()


@dataclass
class ExperimentConfig:
    seed: int
    model: dict
    stream: dict
    noise: dict
    chain: dict
    constants: dict | None = None
    check: dict = field(default_factory=dict)
    drift: dict = field(default_factory=dict)
    minorize: dict = field(default_factory=dict)
    tv: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    # -- builders --------------------------------------------------------------------
    @property
    def lam(self) -> float:
        return self.chain["lambda"]

    @property
    def d(self) -> int:
        return len(self.chain["theta0"])

    def build_model(self) -> UpdateModel:
        m = self.model
        k = m["kind"]
        if k == "linear":
            return linear_model(m["d"])
        if k == "zero":
            return zero_model(m["d"], m["m"])
        if k == "anti_dissipative":
            return anti_dissipative_model(m["d"], m["m"])
        act = ACTIVATIONS[m["activation"]]
        if k == "regression":
            return regression_model(RegressionSpec(m["d0"], m["d1"], m["kappa"], act))
        spec = MLPSpec(tuple(m["dims"]), m["eta"], self.lam, m["r"], act, m["quartic_b"])
        return tamed_mlp_model(spec) if k == "tamed_mlp" else untamed_mlp_model(spec)

    def build_stream(self, s: dict | None = None) -> StationaryStream:
        s = self.stream if s is None else s
        k = s["kind"]
        if k == "zero":
            return ZeroStream(s["m"])
        if k == "iid_gaussian":
            return IIDGaussianStream(s["m"])
        if k == "ar1":
            return AR1Stream(s["rho"], s["m"])
        if k == "bounded":
            return BoundedStream(self.build_stream(s["inner"]), s["bound"])
        return RegressionStream(np.array(s["weights"]), np.array(s["bias"]), s["rho"],
                                s["label_sd"], ACTIVATIONS[s["activation"]])

    def build_noise(self) -> NoiseModel:
        return NoiseModel(self.d, self.noise["kind"], self.noise.get("scale", 1.0))

    def declared_constants(self, model: UpdateModel | None = None) -> DeclaredConstants | None:
        if self.constants is not None:
            c = self.constants
            return DeclaredConstants(c["Delta"], PowerB(**c["b"]), c["K1"], c["K2"], c["K3"], c["beta"])
        model = self.build_model() if model is None else model
        return model.constants


def parse_config(raw: Any) -> ExperimentConfig:
    """Validate a decoded JSON object and fill in defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("$", "configuration must be a JSON object")
    _unknown(raw, {"schema_version", "seed", "model", "stream", "noise", "chain", "constants",
                   "check", "drift", "minorize", "tv"}, "$")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    seed = _num(raw.get("seed", 0), "seed", 0, 2 ** 64 - 1, integer=True)
    for key in ("model", "stream", "chain"):
        if not isinstance(raw.get(key), dict):
            raise ConfigError(key, "required object is missing")
    model = _parse_model(raw["model"])
    stream = _parse_stream(raw["stream"])
    noise = _parse_noise(raw.get("noise") or {"kind": "gaussian"})

    c = raw["chain"]
    _unknown(c, {"lambda", "horizon", "theta0", "checkpoints", "n_chains"}, "chain")
    lam = _num(_req(c, "lambda", "chain"), "chain.lambda", 0, 1, lo_open=True)
    horizon = _num(_req(c, "horizon", "chain"), "chain.horizon", 0, integer=True)
    theta0 = _theta0(_req(c, "theta0", "chain"), model, seed)
    cps = c.get("checkpoints")
    if cps is None:
        cps = [0] if horizon == 0 else [0, horizon]
    if not isinstance(cps, list) or not cps:
        raise ConfigError("chain.checkpoints", "expected a non-empty list")
    cps = [_num(x, f"chain.checkpoints[{i}]", 0, horizon, integer=True) for i, x in enumerate(cps)]
    if any(b <= a for a, b in zip(cps, cps[1:])):
        raise ConfigError("chain.checkpoints", "must be strictly increasing")
    chain = {"lambda": lam, "horizon": horizon, "theta0": theta0, "checkpoints": cps,
             "n_chains": _num(c.get("n_chains", 1), "chain.n_chains", 1, integer=True)}

    cfg = ExperimentConfig(seed, model, stream, noise, chain,
                           _parse_constants(_section(raw, "constants", "$"), "constants"))
    try:
        built = cfg.build_model()
        strm = cfg.build_stream()
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None
    if built.d != len(theta0):
        raise ConfigError("chain.theta0", f"length {len(theta0)} does not match model dimension {built.d}")
    if built.m != strm.m:
        raise ConfigError("stream", f"data dimension {strm.m} does not match model m={built.m}")
    d, m = built.d, built.m

    ck = _section(raw, "check", "$") or {}
    _unknown(ck, {"radii", "n_directions", "n_y"}, "check")
    radii = ck.get("radii", [0.1, 1.0, 10.0, 100.0, 1000.0])
    cfg.check = {"radii": _vec(radii, "check.radii"),
                 "n_directions": _num(ck.get("n_directions", 64), "check.n_directions", 1, integer=True),
                 "n_y": _num(ck.get("n_y", 1000), "check.n_y", 1, integer=True)}

    dr = _section(raw, "drift", "$") or {}
    _unknown(dr, {"theta_grid", "y_grid", "n_samples", "M_b", "M_y"}, "drift")
    cfg.drift = {"theta_grid": _matrix(dr.get("theta_grid", [[0.0] * d]), "drift.theta_grid", d),
                 "y_grid": _matrix(dr.get("y_grid", [[0.0] * m]), "drift.y_grid", m),
                 "n_samples": _num(dr.get("n_samples", 10 ** 5), "drift.n_samples", 1000, integer=True),
                 "M_b": None if dr.get("M_b") is None else _num(dr["M_b"], "drift.M_b", 0),
                 "M_y": None if dr.get("M_y") is None else _num(dr["M_y"], "drift.M_y", 0)}

    mn = _section(raw, "minorize", "$") or {}
    _unknown(mn, {"n", "theta_grid", "y_grid", "sets", "n_samples"}, "minorize")
    n_ball = _num(mn.get("n", 1), "minorize.n", 1)
    sets = mn.get("sets", ["ball", "upper_half"])
    if not isinstance(sets, list) or any(s not in ("ball", "upper_half", "empty") for s in sets):
        raise ConfigError("minorize.sets", "entries must be 'ball', 'upper_half' or 'empty'")
    cfg.minorize = {"n": n_ball,
                    "theta_grid": _matrix(mn.get("theta_grid", [[0.0] * d]), "minorize.theta_grid", d),
                    "y_grid": _matrix(mn.get("y_grid", [[0.0] * m]), "minorize.y_grid", m),
                    "sets": sets,
                    "n_samples": _num(mn.get("n_samples", 10 ** 6), "minorize.n_samples", 1, integer=True)}

    tv = _section(raw, "tv", "$") or {}
    _unknown(tv, {"theta0_A", "theta0_B", "checkpoints", "n_chains", "bins", "threshold"}, "tv")
    tcps = tv.get("checkpoints", cps)
    if not isinstance(tcps, list) or not tcps:
        raise ConfigError("tv.checkpoints", "expected a non-empty list")
    tcps = [_num(x, f"tv.checkpoints[{i}]", 0, integer=True) for i, x in enumerate(tcps)]
    if any(b <= a for a, b in zip(tcps, tcps[1:])):
        raise ConfigError("tv.checkpoints", "must be strictly increasing")
    cfg.tv = {"theta0_A": _vec(tv.get("theta0_A", theta0), "tv.theta0_A", d),
              "theta0_B": _vec(tv.get("theta0_B", theta0), "tv.theta0_B", d),
              "checkpoints": tcps,
              "n_chains": _num(tv.get("n_chains", chain["n_chains"]), "tv.n_chains", 1, integer=True),
              "bins": _num(tv.get("bins", 50), "tv.bins", 1, integer=True),
              "threshold": _num(tv.get("threshold", 0.05), "tv.threshold", 0)}
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("$", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON: {exc}") from None
    return parse_config(raw)
