"""Experiment configuration: a strict JSON schema with field-path errors.

Top-level keys:

    problem     one of the problem objects below (required)
    algorithm   "sgd" | "amsgrad" | "accsgd" (required)
    rate        step-size source object (required)
    steps       non-negative int (required)
    seed        int (required)
    batch_size  positive int, default 100
    test_every  positive int, default 50
    limit       positive int or null, default null (training-subset cap)
    amsgrad     {"beta1", "beta2", "beta1_schedule"} (optional)
    accsgd      {"kappa", "xi", "m0"} (optional)

Problem objects (key "kind" selects):

    {"kind": "quadratic", "dim", "curvature" | "curvatures",
     "n_samples", "center_scale"?, "x0_scale"?}
    {"kind": "mlp-classification", "layers", "images", "labels",
     "test_images"?, "test_labels"?, "l2"?, "num_classes"?}
    {"kind": "mlp-reconstruction", "layers", "images", "test_images"?, "l2"?}

Rate objects:

    {"kind": "fixed", "eta"}
    {"kind": "fixed-decay", "eta0"}
    {"kind": "pls", "eta0", "eps1"?, "eps2"?, "decay"?, "per_group"?,
     "allow_negative_eta0"?}

Unknown keys are rejected everywhere. ``from_dict`` raises ConfigError
with the offending key path, so CLI failures name the exact field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .errors import ConfigError

ALGORITHMS = ("sgd", "amsgrad", "accsgd")
RATE_KINDS = ("fixed", "fixed-decay", "pls")
PROBLEM_KINDS = ("quadratic", "mlp-classification", "mlp-reconstruction")


def _require(d: dict, key: str, path: str) -> Any:
    if key not in d:
        raise ConfigError(f"{path}{key}", "missing required key")
    return d[key]


def _reject_unknown(d: dict, allowed: set[str], path: str) -> None:
    for key in d:
        if key not in allowed:
            raise ConfigError(f"{path}{key}", "unknown key")


def _number(value, path: str, *, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and v <= 0.0:
        raise ConfigError(path, f"must be positive, got {value!r}")
    if nonneg and v < 0.0:
        raise ConfigError(path, f"must be non-negative, got {value!r}")
    return v


def _integer(value, path: str, *, positive=False, nonneg=False) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(path, f"expected a positive integer, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(path, f"expected a non-negative integer, got {value!r}")
    return value


def _string(value, path: str, choices=None) -> str:
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(path, f"expected one of {choices}, got {value!r}")
    return value


@dataclass
class QuadraticSpec:
    dim: int
    curvatures: list[float]
    n_samples: int
    center_scale: float = 1.0
    x0_scale: float = 1.0
    kind: str = "quadratic"

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "QuadraticSpec":
        _reject_unknown(
            d,
            {"kind", "dim", "curvature", "curvatures", "n_samples", "center_scale", "x0_scale"},
            path,
        )
        dim = _integer(_require(d, "dim", path), path + "dim", positive=True)
        if "curvatures" in d:
            raw = d["curvatures"]
            if not isinstance(raw, list) or len(raw) != dim:
                raise ConfigError(path + "curvatures", f"expected a list of {dim} numbers")
            curvatures = [
                _number(c, f"{path}curvatures[{i}]", positive=True) for i, c in enumerate(raw)
            ]
        elif "curvature" in d:
            curvatures = [_number(d["curvature"], path + "curvature", positive=True)] * dim
        else:
            raise ConfigError(path + "curvature", "missing required key")
        return cls(
            dim=dim,
            curvatures=curvatures,
            n_samples=_integer(_require(d, "n_samples", path), path + "n_samples", positive=True),
            center_scale=_number(d.get("center_scale", 1.0), path + "center_scale", nonneg=True),
            x0_scale=_number(d.get("x0_scale", 1.0), path + "x0_scale", nonneg=True),
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "dim": self.dim,
            "curvatures": self.curvatures,
            "n_samples": self.n_samples,
            "center_scale": self.center_scale,
            "x0_scale": self.x0_scale,
        }


@dataclass
class MlpSpec:
    kind: str
    layers: list[int]
    images: str
    labels: str | None
    test_images: str | None
    test_labels: str | None
    l2: float
    num_classes: int

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "MlpSpec":
        kind = d["kind"]
        allowed = {"kind", "layers", "images", "test_images", "l2"}
        if kind == "mlp-classification":
            allowed |= {"labels", "test_labels", "num_classes"}
        _reject_unknown(d, allowed, path)
        raw_layers = _require(d, "layers", path)
        if not isinstance(raw_layers, list) or len(raw_layers) < 2:
            raise ConfigError(path + "layers", "expected a list of at least two sizes")
        layers = [
            _integer(s, f"{path}layers[{i}]", positive=True) for i, s in enumerate(raw_layers)
        ]
        num_classes = 10
        labels = test_labels = None
        if kind == "mlp-classification":
            labels = _string(_require(d, "labels", path), path + "labels")
            if "test_labels" in d:
                test_labels = _string(d["test_labels"], path + "test_labels")
            num_classes = _integer(d.get("num_classes", 10), path + "num_classes", positive=True)
            if layers[-1] != num_classes:
                raise ConfigError(
                    path + "layers", f"output size {layers[-1]} must equal num_classes {num_classes}"
                )
        else:
            if layers[0] != layers[-1]:
                raise ConfigError(
                    path + "layers", "reconstruction needs matching input and output sizes"
                )
        return cls(
            kind=kind,
            layers=layers,
            images=_string(_require(d, "images", path), path + "images"),
            labels=labels,
            test_images=_string(d["test_images"], path + "test_images")
            if "test_images" in d
            else None,
            test_labels=test_labels,
            l2=_number(d.get("l2", 0.0), path + "l2", nonneg=True),
            num_classes=num_classes,
        )

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind, "layers": self.layers, "images": self.images}
        if self.labels is not None:
            out["labels"] = self.labels
        if self.test_images is not None:
            out["test_images"] = self.test_images
        if self.test_labels is not None:
            out["test_labels"] = self.test_labels
        out["l2"] = self.l2
        if self.kind == "mlp-classification":
            out["num_classes"] = self.num_classes
        return out

    @property
    def task(self) -> str:
        return "classification" if self.kind == "mlp-classification" else "reconstruction"


@dataclass
class RateSpec:
    kind: str
    eta: float | None = None
    eta0: float | None = None
    eps1: float = 0.01
    eps2: float = 0.01
    decay: str = "constant"
    per_group: bool = True
    allow_negative_eta0: bool = False

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "RateSpec":
        kind = _string(_require(d, "kind", path), path + "kind", RATE_KINDS)
        if kind == "fixed":
            _reject_unknown(d, {"kind", "eta"}, path)
            return cls(kind=kind, eta=_number(_require(d, "eta", path), path + "eta", positive=True))
        if kind == "fixed-decay":
            _reject_unknown(d, {"kind", "eta0"}, path)
            return cls(
                kind=kind, eta0=_number(_require(d, "eta0", path), path + "eta0", positive=True)
            )
        _reject_unknown(
            d,
            {"kind", "eta0", "eps1", "eps2", "decay", "per_group", "allow_negative_eta0"},
            path,
        )
        allow_negative = d.get("allow_negative_eta0", False)
        if not isinstance(allow_negative, bool):
            raise ConfigError(path + "allow_negative_eta0", "expected a boolean")
        eta0 = _number(_require(d, "eta0", path), path + "eta0")
        if eta0 <= 0.0 and not allow_negative:
            raise ConfigError(
                path + "eta0",
                "must be positive unless allow_negative_eta0 is set",
            )
        per_group = d.get("per_group", True)
        if not isinstance(per_group, bool):
            raise ConfigError(path + "per_group", "expected a boolean")
        return cls(
            kind=kind,
            eta0=eta0,
            eps1=_number(d.get("eps1", 0.01), path + "eps1", positive=True),
            eps2=_number(d.get("eps2", 0.01), path + "eps2", positive=True),
            decay=_string(d.get("decay", "constant"), path + "decay", ("constant", "sqrt_t")),
            per_group=per_group,
            allow_negative_eta0=allow_negative,
        )

    def to_dict(self) -> dict:
        if self.kind == "fixed":
            return {"kind": self.kind, "eta": self.eta}
        if self.kind == "fixed-decay":
            return {"kind": self.kind, "eta0": self.eta0}
        out = {
            "kind": self.kind,
            "eta0": self.eta0,
            "eps1": self.eps1,
            "eps2": self.eps2,
            "decay": self.decay,
            "per_group": self.per_group,
        }
        if self.allow_negative_eta0:
            out["allow_negative_eta0"] = True
        return out


@dataclass
class AmsgradSpec:
    beta1: float = 0.9
    beta2: float = 0.999
    beta1_schedule: str = "constant"

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "AmsgradSpec":
        _reject_unknown(d, {"beta1", "beta2", "beta1_schedule"}, path)
        beta1 = _number(d.get("beta1", 0.9), path + "beta1", positive=True)
        beta2 = _number(d.get("beta2", 0.999), path + "beta2", positive=True)
        if beta1 >= 1.0 or beta2 >= 1.0:
            raise ConfigError(path + "beta1", "moment factors must lie in (0, 1)")
        return cls(
            beta1=beta1,
            beta2=beta2,
            beta1_schedule=_string(
                d.get("beta1_schedule", "constant"),
                path + "beta1_schedule",
                ("constant", "over_t"),
            ),
        )

    def to_dict(self) -> dict:
        return {"beta1": self.beta1, "beta2": self.beta2, "beta1_schedule": self.beta1_schedule}


@dataclass
class AccsgdSpec:
    kappa: float = 1000.0
    xi: float = 10.0
    m0: str = "x0"

    @classmethod
    def from_dict(cls, d: dict, path: str) -> "AccsgdSpec":
        _reject_unknown(d, {"kappa", "xi", "m0"}, path)
        kappa = _number(d.get("kappa", 1000.0), path + "kappa", positive=True)
        xi = _number(d.get("xi", 10.0), path + "xi", positive=True)
        if kappa < 1.0:
            raise ConfigError(path + "kappa", "must be at least 1")
        if xi > math.sqrt(kappa):
            raise ConfigError(path + "xi", "must not exceed sqrt(kappa)")
        return cls(kappa=kappa, xi=xi, m0=_string(d.get("m0", "x0"), path + "m0", ("x0", "zero")))

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "xi": self.xi, "m0": self.m0}


@dataclass
class ExperimentConfig:
    problem: QuadraticSpec | MlpSpec
    algorithm: str
    rate: RateSpec
    steps: int
    seed: int
    batch_size: int = 100
    test_every: int = 50
    limit: int | None = None
    amsgrad: AmsgradSpec = field(default_factory=AmsgradSpec)
    accsgd: AccsgdSpec = field(default_factory=AccsgdSpec)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        _reject_unknown(
            d,
            {
                "problem",
                "algorithm",
                "rate",
                "steps",
                "seed",
                "batch_size",
                "test_every",
                "limit",
                "amsgrad",
                "accsgd",
            },
            "",
        )
        problem_raw = _require(d, "problem", "")
        if not isinstance(problem_raw, dict):
            raise ConfigError("problem", "expected an object")
        kind = _string(_require(problem_raw, "kind", "problem."), "problem.kind", PROBLEM_KINDS)
        if kind == "quadratic":
            problem = QuadraticSpec.from_dict(problem_raw, "problem.")
        else:
            problem = MlpSpec.from_dict(problem_raw, "problem.")

        algorithm = _string(_require(d, "algorithm", ""), "algorithm", ALGORITHMS)
        rate_raw = _require(d, "rate", "")
        if not isinstance(rate_raw, dict):
            raise ConfigError("rate", "expected an object")
        rate = RateSpec.from_dict(rate_raw, "rate.")
        if rate.kind == "pls" and rate.eta0 is not None and rate.eta0 <= 0.0:
            if algorithm != "accsgd":
                raise ConfigError(
                    "rate.eta0", "negative base rates are only supported for accsgd"
                )

        limit = d.get("limit")
        if limit is not None:
            limit = _integer(limit, "limit", positive=True)

        amsgrad = AmsgradSpec.from_dict(d.get("amsgrad", {}), "amsgrad.")
        accsgd = AccsgdSpec.from_dict(d.get("accsgd", {}), "accsgd.")
        return cls(
            problem=problem,
            algorithm=algorithm,
            rate=rate,
            steps=_integer(_require(d, "steps", ""), "steps", nonneg=True),
            seed=_integer(_require(d, "seed", ""), "seed"),
            batch_size=_integer(d.get("batch_size", 100), "batch_size", positive=True),
            test_every=_integer(d.get("test_every", 50), "test_every", positive=True),
            limit=limit,
            amsgrad=amsgrad,
            accsgd=accsgd,
        )

    def to_dict(self) -> dict:
        return {
            "problem": self.problem.to_dict(),
            "algorithm": self.algorithm,
            "rate": self.rate.to_dict(),
            "steps": self.steps,
            "seed": self.seed,
            "batch_size": self.batch_size,
            "test_every": self.test_every,
            "limit": self.limit,
            "amsgrad": self.amsgrad.to_dict(),
            "accsgd": self.accsgd.to_dict(),
        }

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError("<file>", f"not valid JSON: {exc}") from exc
        return cls.from_dict(raw)
