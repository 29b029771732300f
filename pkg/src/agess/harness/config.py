"""Experiment configuration: JSON schema, validation and object builders.

A config file is a JSON object::

    {
      "name": "demo",
      "chains": 2, "base_seed": 1, "workers": 1, "out": "runs/demo",
      "iterations": 10000, "burn_in": 2000, "window": 1.0,
      "target": {"name": "gaussian", "dim": 2},
      "sampler": {"kind": "agess", "family": "t", "nu": 6}
    }

or, instead of ``target``/``sampler``, a list ``"arms"`` whose entries hold
``label``, ``target``, ``sampler`` and optionally ``iterations``,
``burn_in`` and ``window``.  Every CLI flag overrides the matching key.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..adaptation import SCALAR_SCALE, AdaptConfig, SupportTransform
from ..elliptical import EllipticalFamily
from ..errors import ConfigurationError
from .. import targets as T

OUTPUT_ENV = "AGESS_OUTPUT_DIR"
DEFAULT_OUTPUT = "agess_runs"
SAMPLER_KINDS = ("ess", "agess", "agess-scalar", "arw")
TARGET_NAMES = ("gaussian", "volcano", "banana", "twinbanana", "relu", "horseshoe", "deepgp")


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)


@dataclass
class Arm:
    """One (target, sampler) combination run for every chain."""

    label: str
    target: dict
    sampler: dict
    iterations: int
    burn_in: int = 0
    window: float = 1.0

    def validate(self):
        if self.iterations < 2 or not 0 <= self.burn_in < self.iterations:
            raise ConfigurationError(f"arm {self.label!r}: need iterations > burn_in >= 0")
        if not 0.0 < self.window <= 1.0:
            raise ConfigurationError(f"arm {self.label!r}: window must lie in (0, 1]")
        name = self.target.get("name")
        if name not in TARGET_NAMES:
            raise ConfigurationError(f"arm {self.label!r}: unknown target {name!r}; choose from {TARGET_NAMES}")
        kind = self.sampler.get("kind")
        if kind not in SAMPLER_KINDS:
            raise ConfigurationError(f"arm {self.label!r}: unknown sampler {kind!r}; choose from {SAMPLER_KINDS}")
        path = self.target.get("dataset")
        if path is not None and not Path(path).with_suffix(".csv").exists():
            raise ConfigurationError(f"arm {self.label!r}: dataset not found: {path}")


@dataclass
class ExperimentConfig:
    arms: list[Arm]
    chains: int = 1
    base_seed: int = 0
    workers: int = 1
    out: str = field(default_factory=default_output_dir)
    name: str = "experiment"
    preset: str | None = None

    def __post_init__(self):
        if self.chains < 1:
            raise ConfigurationError("chains must be >= 1")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        if not self.arms:
            raise ConfigurationError("config defines no arms")
        labels = [a.label for a in self.arms]
        if len(set(labels)) != len(labels):
            raise ConfigurationError("arm labels must be unique")
        for a in self.arms:
            a.validate()

    @property
    def samplers(self) -> list[dict]:
        return [a.sampler for a in self.arms]

    def arm(self, label: str) -> Arm:
        for a in self.arms:
            if a.label == label:
                return a
        raise KeyError(label)

    def find(self, **criteria) -> list[Arm]:
        """Arms whose target/sampler entries match all ``criteria`` (e.g. ``kind="arw", d=10``)."""
        out = []
        for a in self.arms:
            merged = {**a.target, **a.sampler}
            if all(merged.get(k) == v for k, v in criteria.items()):
                out.append(a)
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "preset": self.preset,
            "chains": self.chains,
            "base_seed": self.base_seed,
            "workers": self.workers,
            "out": self.out,
            "arms": [vars(a) for a in self.arms],
        }

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigurationError("config must be a JSON object")
    known = {"name", "preset", "chains", "base_seed", "workers", "out", "arms", "target", "sampler",
             "iterations", "burn_in", "window"}
    unknown = set(d) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    try:
        if "arms" in d:
            arms = [
                Arm(
                    label=str(a.get("label", f"arm{i}")),
                    target=dict(a["target"]),
                    sampler=dict(a["sampler"]),
                    iterations=int(a.get("iterations", d.get("iterations", 0))),
                    burn_in=int(a.get("burn_in", d.get("burn_in", 0))),
                    window=float(a.get("window", d.get("window", 1.0))),
                )
                for i, a in enumerate(d["arms"])
            ]
        else:
            arms = [Arm(label=str(d.get("name", "main")), target=dict(d["target"]), sampler=dict(d["sampler"]),
                        iterations=int(d["iterations"]), burn_in=int(d.get("burn_in", 0)),
                        window=float(d.get("window", 1.0)))]
    except KeyError as exc:
        raise ConfigurationError(f"missing config key {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None
    return ExperimentConfig(
        arms=arms,
        chains=int(d.get("chains", 1)),
        base_seed=int(d.get("base_seed", 0)),
        workers=int(d.get("workers", 1)),
        out=str(d.get("out", default_output_dir())),
        name=str(d.get("name", "experiment")),
        preset=d.get("preset"),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(d)


# ---------------------------------------------------------------------------
# builders


MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def chain_seed(base_seed: int, chain: int) -> int:
    return splitmix64((base_seed & MASK64) ^ chain)


@dataclass
class BuiltTarget:
    """A target plus its natural starting point and default ellipse parameters."""

    target: object
    transform: SupportTransform | None
    mu0: np.ndarray
    sigma0: np.ndarray
    x0: np.ndarray
    dataset: object = None


def _dataset(spec, make):
    if spec.get("dataset"):
        return T.Dataset.load(spec["dataset"])
    return make(np.random.default_rng(int(spec.get("data_seed", 0))))


def build_target(spec: dict) -> BuiltTarget:
    name = spec["name"]
    if name == "gaussian":
        P = int(spec["dim"])
        mean = np.asarray(spec.get("mean", np.zeros(P)), float)
        cov = _matrix(spec.get("cov", 1.0), P)
        t = T.gaussian_target(mean, cov)
        return BuiltTarget(t, None, np.zeros(P), np.eye(P), mean.copy())
    if name == "volcano":
        P = int(spec["dim"])
        t = T.volcano_target(P)
        return BuiltTarget(t, None, np.zeros(P), np.eye(P), t.reference_point.copy())
    if name in ("banana", "twinbanana"):
        if spec.get("dataset"):
            y = T.Dataset.load(spec["dataset"]).y
        else:
            rng = np.random.default_rng(int(spec.get("data_seed", 0)))
            gen = T.banana_data if name == "banana" else T.twin_banana_data
            y = gen(int(spec.get("n_data", 1 if name == "banana" else 10)), rng)
        build = T.banana_target if name == "banana" else T.twin_banana_target
        t = build(y, float(spec.get("mu1", 0.0)), float(spec.get("mu2", 0.0)))
        mu0 = np.array([0.0, 0.5]) if name == "banana" else np.zeros(2)
        return BuiltTarget(t, None, mu0, 4.0 * np.eye(2), mu0.copy())
    if name == "relu":
        d = int(spec.get("d", 2))
        data = _dataset(spec, lambda r: T.relu_data(int(spec.get("n", 1000)), d, r))
        t = T.relu_regression_target(data)
        return BuiltTarget(t, None, np.zeros(data.d), np.eye(data.d), np.zeros(data.d), data)
    if name == "horseshoe":
        d = int(spec.get("d", 20))
        data = _dataset(spec, lambda r: T.horseshoe_data(int(spec.get("n", 50)), d, r))
        t = T.horseshoe_target(data)
        P = t.dim
        return BuiltTarget(t, T.horseshoe_transform(data.d), np.zeros(P), np.eye(P), np.zeros(P), data)
    if name == "deepgp":
        data = T.deep_gp_data(int(spec.get("n", 50)))
        t = T.deep_gp_target(data.X, data.y, float(spec.get("g_w", 1e-8)), float(spec.get("g_y", 1e-8)),
                             float(spec.get("nu", 6.0)), prior_mean=float(spec.get("prior_mean", 0.0)),
                             prior_sd=float(spec.get("prior_sd", 1.0)))
        x0 = t.reference_point.copy()
        return BuiltTarget(t, T.deep_gp_transform(data.n), x0.copy(), np.eye(t.dim), x0, data)
    raise ConfigurationError(f"unknown target {name!r}")


def _matrix(v, P) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(P)
    if a.ndim == 1:
        if a.size != P:
            raise ConfigurationError(f"diagonal of length {a.size} does not match dimension {P}")
        return np.diag(a)
    if a.shape != (P, P):
        raise ConfigurationError(f"matrix must be {P}x{P}")
    return a


def resolve_start(built: BuiltTarget, sampler: dict, chain_rng: np.random.Generator):
    """``(mu0, sigma0, x0)`` after applying sampler overrides."""
    P = built.target.dim
    mu0 = np.asarray(sampler["mu0"], float) if "mu0" in sampler else built.mu0
    if "alpha" in sampler:
        sigma0 = (1.0 + float(sampler["alpha"])) * np.eye(P)
    elif "sigma0" in sampler:
        sigma0 = _matrix(sampler["sigma0"], P)
    else:
        sigma0 = built.sigma0
    x0 = sampler.get("x0", "default")
    if isinstance(x0, str):
        if x0 == "default":
            x0 = built.x0
        elif x0 == "mu0":
            x0 = mu0
        elif x0 == "random_lengthscales":
            x0 = built.x0.copy()
            x0[-3:] = chain_rng.standard_normal(3)
            if sampler.get("center_at_x0", True):
                mu0 = x0.copy()
        else:
            raise ConfigurationError(f"unknown x0 rule {x0!r}")
    x0 = np.asarray(x0, float)
    if mu0.shape != (P,) or x0.shape != (P,):
        raise ConfigurationError(f"mu0/x0 must have length {P}")
    return mu0, sigma0, x0


def family_of(sampler: dict) -> EllipticalFamily:
    fam = sampler.get("family", "gaussian" if sampler["kind"] in ("ess", "agess-scalar") else "t")
    if fam in ("t", "student_t"):
        return EllipticalFamily.student_t(float(sampler.get("nu", 6.0)))
    if fam == "gaussian":
        return EllipticalFamily.gaussian()
    raise ConfigurationError(f"unknown family {fam!r}")


def adapt_config(sampler: dict, iterations: int, burn_in: int) -> AdaptConfig:
    kind = sampler["kind"]
    extra = {"max_iter": int(sampler["max_iter"])} if "max_iter" in sampler else {}
    if kind == "ess":
        return AdaptConfig(n_iter=iterations, n_burn=burn_in, eps_a=0.0, eps_b=0.0, burn_1d_fraction=0.0,
                           adapt=False, **extra)
    kw = {k: sampler[k] for k in ("beta", "eps_a", "eps_b", "burn_1d_fraction", "min_eig") if k in sampler}
    kw.update(extra)
    if kind == "agess-scalar":
        kw["variant"] = SCALAR_SCALE
    if sampler.get("adapt") is False:
        kw["adapt"] = False
    return AdaptConfig(n_iter=iterations, n_burn=burn_in, **kw)

