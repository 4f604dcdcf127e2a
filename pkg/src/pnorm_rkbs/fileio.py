"""Datasets, configuration files and model files.

Model files are JSON with every float written to 17 significant digits, so a
save -> load -> save cycle reproduces the file byte for byte.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np
import yaml

from . import expansion, learn
from .expansion import ExpansionFamily

__all__ = [
    "InputError",
    "Dataset",
    "read_csv",
    "kernel_spec",
    "family_from_spec",
    "Config",
    "DEFAULT_CONFIG",
    "load_config",
    "parse_config",
    "model_to_dict",
    "model_from_dict",
    "dumps",
    "save_model",
    "load_model",
]

MODEL_FORMAT = "pnorm-rkbs-model"
MODEL_VERSION = 1


class InputError(ValueError):
    """Malformed user input: bad CSV, config or model file."""


# --------------------------------------------------------------------------
# CSV data
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    targets: Optional[np.ndarray]
    columns: tuple
    target_name: Optional[str] = None

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _parse_cell(text: str, path: str, line: int, col: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise InputError(f"{path}:{line}: column {col!r}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise InputError(f"{path}:{line}: column {col!r}: non-finite value {text!r}")
    return v


def read_csv(path: str, target: Optional[str] = None, has_target: bool = True,
             allow_duplicates: bool = False) -> Dataset:
    """Read a headed CSV of reals.

    The target is the column named ``target``, else the last column; with
    ``has_target=False`` every column is a coordinate.  Non-numeric or
    non-finite cells, ragged rows, empty files and repeated points raise
    :class:`InputError` naming line and column.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    # drop blank lines but keep the physical line numbers
    numbered = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not numbered:
        raise InputError(f"{path}: no header and no rows")
    hline, header = numbered[0]
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        raise InputError(f"{path}:{hline}: repeated column name in header")
    body = numbered[1:]
    if not body:
        raise InputError(f"{path}: no rows")
    if target is not None and target not in header:
        raise InputError(f"{path}:{hline}: no column named {target!r}")
    tidx = None
    if has_target or target is not None:
        if len(header) < 2:
            raise InputError(f"{path}:{hline}: need at least one feature column and a target")
        tidx = header.index(target) if target is not None else len(header) - 1
    vals = np.empty((len(body), len(header)))
    for r, (line, row) in enumerate(body):
        if len(row) != len(header):
            raise InputError(f"{path}:{line}: expected {len(header)} fields, found {len(row)}")
        for j, cell in enumerate(row):
            vals[r, j] = _parse_cell(cell.strip(), path, line, header[j])
    feat = [j for j in range(len(header)) if j != tidx]
    X = vals[:, feat]
    Y = vals[:, tidx] if tidx is not None else None
    if not allow_duplicates:
        seen: Dict[bytes, int] = {}
        for r, (line, _) in enumerate(body):
            key = X[r].tobytes()
            if key in seen:
                raise InputError(f"{path}:{line}: duplicate data point {X[r].tolist()} "
                                 f"(first seen on line {seen[key]})")
            seen[key] = line
    return Dataset(X, Y, tuple(header[j] for j in feat),
                   header[tidx] if tidx is not None else None)


# --------------------------------------------------------------------------
# kernel blocks
# --------------------------------------------------------------------------


def kernel_spec(family: ExpansionFamily) -> Dict[str, Any]:
    """Serializable description of a built-in family."""
    if family.kind == "custom":
        raise ValueError("custom families cannot be serialized")
    spec: Dict[str, Any] = {"kind": family.kind, "dim": family.dim, "truncation": family.truncation}
    if family.kind in ("gaussian-eigen", "gaussian-integral", "gaussian-taylor"):
        spec["theta"] = [float(t) for t in family.theta]
        spec["half_width"] = float(family.upper[0])
    if family.kind == "power-series":
        spec["eta"] = family.eta
        if family.eta == "geometric":
            spec["theta"] = float(family.eta_param)
        if family.eta == "coefficients":
            spec["coeffs"] = [float(c) for c in family.coeffs]
    return spec


_KERNEL_KEYS = {"kind", "dim", "truncation", "theta", "half_width", "eta", "coeffs"}


def family_from_spec(spec: Dict[str, Any]) -> ExpansionFamily:
    if not isinstance(spec, dict):
        raise InputError("kernel block must be a mapping")
    unknown = set(spec) - _KERNEL_KEYS
    if unknown:
        raise InputError(f"kernel block: unknown keys {sorted(unknown)}")
    kind = spec.get("kind")
    dim = spec.get("dim")
    trunc = spec.get("truncation")
    try:
        if dim is not None:
            dim = int(dim)
        if trunc is not None:
            trunc = int(trunc)
        if kind == "min-integral":
            return expansion.min_integral(dim or 1, trunc)
        if kind in ("gaussian-eigen", "gaussian-integral", "gaussian-taylor"):
            if "theta" not in spec:
                raise InputError(f"kernel block: {kind} needs theta")
            ctor = {"gaussian-eigen": expansion.gaussian_eigen,
                    "gaussian-integral": expansion.gaussian_integral,
                    "gaussian-taylor": expansion.gaussian_taylor}[kind]
            return ctor(spec["theta"], dim, trunc, float(spec.get("half_width", 6.0)))
        if kind == "power-series":
            eta = spec.get("eta", "exp")
            return expansion.power_series(
                eta, dim or 1, float(spec.get("theta", 0.5)), trunc,
                spec.get("coeffs") if eta == "coefficients" else None)
    except InputError:
        raise
    except (TypeError, ValueError) as exc:
        raise InputError(f"kernel block: {exc}") from None
    raise InputError(f"kernel block: unknown kind {kind!r}")


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


DEFAULT_CONFIG: Dict[str, Any] = {
    "kernel": {"kind": "min-integral", "dim": 1, "truncation": 64},
    "loss": {"kind": "least-square", "delta": 1e-2},
    "regularizer": {"sigma": 1e-2, "power": 2.0},
    "solver": {"p": 2.0, "max_iters": 500, "grad_tol": 1e-10, "residual_tol": 1e-9,
               "shrink": 0.5, "initial_step": 1.0, "seed": 0},
    "homotopy": {"schedule": [1]},
    "sparse": {"weighting": "inverse-sqrt", "accelerated": False, "tol": 1e-8,
               "max_iters": 200000, "homotopy_depth": 16},
}

_BLOCKS = {
    "kernel": None,
    "loss": {"kind", "delta"},
    "regularizer": {"sigma", "power"},
    "solver": {"p", "max_iters", "grad_tol", "residual_tol", "shrink", "initial_step", "seed",
               "armijo", "max_backtracks", "cond_cap"},
    "homotopy": {"schedule"},
    "sparse": {"weighting", "accelerated", "tol", "max_iters", "step", "homotopy_depth"},
}


@dataclass(frozen=True, eq=False)
class Config:
    family: ExpansionFamily
    train: learn.TrainConfig
    sparse: Dict[str, Any] = field(default_factory=dict)
    raw: Dict[str, Any] = field(default_factory=dict)

    @property
    def schedule(self) -> tuple:
        return self.train.schedule

    def with_overrides(self, schedule: Optional[Sequence[int]] = None,
                       seed: Optional[int] = None) -> "Config":
        from dataclasses import replace

        train = self.train
        if schedule is not None:
            train = replace(train, schedule=_check_schedule(schedule))
        if seed is not None:
            train = replace(train, seed=int(seed))
        return replace(self, train=train)


def _check_schedule(schedule) -> tuple:
    if isinstance(schedule, (int, float)):
        schedule = [schedule]
    try:
        out = tuple(int(m) for m in schedule)
    except (TypeError, ValueError):
        raise InputError(f"homotopy schedule must be a list of integers, got {schedule!r}") from None
    if not out or any(m < 1 for m in out):
        raise InputError("homotopy schedule needs positive integers")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise InputError("homotopy schedule must be strictly increasing")
    return out


def _merge(raw: Dict[str, Any]) -> Dict[str, Any]:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise InputError("configuration must be a mapping of blocks")
    unknown = set(raw) - set(_BLOCKS)
    if unknown:
        raise InputError(f"unknown configuration blocks {sorted(unknown)}")
    merged = {}
    for name, keys in _BLOCKS.items():
        block = raw.get(name, {}) or {}
        if not isinstance(block, dict):
            raise InputError(f"{name} block must be a mapping")
        if keys is not None:
            bad = set(block) - keys
            if bad:
                raise InputError(f"{name} block: unknown keys {sorted(bad)}")
            merged[name] = {**DEFAULT_CONFIG[name], **block}
        else:
            merged[name] = dict(block) if block else dict(DEFAULT_CONFIG[name])
    return merged


def parse_config(raw: Optional[Dict[str, Any]]) -> Config:
    cfg = _merge(raw)
    family = family_from_spec(cfg["kernel"])
    s = cfg["solver"]
    try:
        loss = learn.Loss(str(cfg["loss"]["kind"]), float(cfg["loss"]["delta"]))
        reg = learn.Regularizer(float(cfg["regularizer"]["sigma"]), float(cfg["regularizer"]["power"]))
        extra = {k: s[k] for k in ("armijo", "max_backtracks", "cond_cap") if k in s}
        train = learn.TrainConfig(
            loss=loss, reg=reg, p=float(s["p"]), max_iters=int(s["max_iters"]),
            grad_tol=float(s["grad_tol"]), residual_tol=float(s["residual_tol"]),
            shrink=float(s["shrink"]), initial_step=float(s["initial_step"]),
            schedule=_check_schedule(cfg["homotopy"]["schedule"]), seed=int(s["seed"]),
            **extra,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"configuration: {exc}") from None
    sp = cfg["sparse"]
    if sp["weighting"] not in ("inverse-sqrt", "literal"):
        raise InputError(f"sparse block: unknown weighting {sp['weighting']!r}")
    return Config(family, train, sp, cfg)


def load_config(path: Optional[str]) -> Config:
    """Read a YAML configuration; ``None`` gives the built-in defaults."""
    if path is None:
        return parse_config({})
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f":{mark.line + 1}:{mark.column + 1}" if mark is not None else ""
        raise InputError(f"{path}{where}: malformed configuration") from None
    return parse_config(raw)


# --------------------------------------------------------------------------
# model files
# --------------------------------------------------------------------------


def _emit(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError("model files hold finite numbers only")
        text = "%.17g" % v
        # keep floats recognisable as floats after a reload
        if all(ch not in text for ch in ".en"):
            text += ".0"
        return text
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_emit(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_emit(v, indent, level + 1) for v in seq) + "]"
        if not seq:
            return "[]"
        items = [pad + _emit(v, indent, level + 1) for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return _emit(obj, 2, 0) + "\n"


def model_to_dict(model: learn.RepresenterModel, schedule: Sequence[int] = (1,),
                  train: Optional[learn.TrainConfig] = None) -> Dict[str, Any]:
    train = train or learn.TrainConfig(loss=model.loss, reg=model.reg)
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kernel": kernel_spec(model.family),
        "p": float(model.p),
        "q": float(model.q),
        "X": [[float(v) for v in row] for row in model.X],
        "c": [float(v) for v in model.c],
        "risk": float(model.risk),
        "norm": float(model.norm),
        "iterations": int(model.iterations),
        "converged": bool(model.converged),
        "grad_norm": float(model.grad_norm),
        "residual_norm": float(model.residual_norm),
        "training": {
            "loss": {"kind": model.loss.kind, "delta": float(model.loss.delta)},
            "regularizer": {"sigma": float(model.reg.sigma), "power": float(model.reg.power)},
            "schedule": [int(m) for m in schedule],
            "grad_tol": float(train.grad_tol),
            "residual_tol": float(train.residual_tol),
            "max_iters": int(train.max_iters),
            "seed": int(train.seed),
        },
    }


def model_from_dict(d: Dict[str, Any]) -> learn.RepresenterModel:
    if not isinstance(d, dict) or d.get("format") != MODEL_FORMAT:
        raise InputError("not a model file")
    if d.get("version") != MODEL_VERSION:
        raise InputError(f"unsupported model version {d.get('version')!r}")
    try:
        family = family_from_spec(d["kernel"])
        X = np.asarray(d["X"], dtype=float).reshape(-1, family.dim)
        c = np.asarray(d["c"], dtype=float).ravel()
        tr = d["training"]
        if c.size != X.shape[0]:
            raise InputError("model file: one coefficient per data point required")
        return learn.RepresenterModel(
            family=family, X=X, c=c, p=float(d["p"]), risk=float(d["risk"]),
            norm=float(d["norm"]), iterations=int(d["iterations"]),
            converged=bool(d["converged"]), grad_norm=float(d["grad_norm"]),
            residual_norm=float(d["residual_norm"]),
            loss=learn.Loss(tr["loss"]["kind"], float(tr["loss"]["delta"])),
            reg=learn.Regularizer(float(tr["regularizer"]["sigma"]), float(tr["regularizer"]["power"])),
        )
    except KeyError as exc:
        raise InputError(f"model file: missing field {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InputError):
            raise
        raise InputError(f"model file: {exc}") from None


def save_model(path: str, model: learn.RepresenterModel, schedule: Sequence[int] = (1,),
               train: Optional[learn.TrainConfig] = None, meta: Optional[Dict[str, Any]] = None) -> str:
    """Write the model file and return its text.

    ``meta`` replaces the generated training block when re-saving a loaded file.
    """
    d = model_to_dict(model, schedule, train)
    if meta is not None:
        d["training"] = meta
    text = dumps(d)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return text


def read_model_dict(path: str) -> Dict[str, Any]:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: malformed model file") from None


def load_model(path: str):
    """Return ``(model, training_block)`` from a model file."""
    d = read_model_dict(path)
    model = model_from_dict(d)
    return model, d.get("training", {})
