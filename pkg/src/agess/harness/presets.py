"""Named experiment presets at desk scale."""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigurationError
from .config import Arm, ExperimentConfig, default_output_dir

FIG1_DIMS = (2, 10, 50, 100, 250, 500)
FIG1_ALPHAS = (0, 1, 9)
RELU_DIMS = (2, 10, 50)
_DATA_SEED = 20240601  # fixed seed for preset dataset parameters


def _fig1(iterations: int = 20_000) -> list[Arm]:
    arms = []
    for P in FIG1_DIMS:
        tgt = {"name": "gaussian", "dim": P}
        for a in FIG1_ALPHAS:
            arms.append(Arm(f"P{P}-ess-alpha{a}", tgt, {"kind": "ess", "alpha": a}, iterations, 0, 0.4))
        arms.append(Arm(f"P{P}-arw", tgt, {"kind": "arw", "sigma0": 10.0}, iterations, 0, 0.4))
        arms.append(Arm(f"P{P}-agess-gaussian", tgt, {"kind": "agess", "family": "gaussian", "sigma0": 10.0},
                        iterations, 0, 0.4))
        arms.append(Arm(f"P{P}-agess-t", tgt, {"kind": "agess", "family": "t", "nu": 6, "sigma0": 10.0},
                        iterations, 0, 0.4))
    return arms


def _volcano(iterations: int = 50_000) -> list[Arm]:
    arms = []
    for P in (10, 100):
        tgt = {"name": "volcano", "dim": P}
        opt = 1.0 + 1.0 / math.sqrt(P)
        arms += [
            Arm(f"P{P}-optimal", tgt, {"kind": "ess", "sigma0": opt}, iterations, 0, 0.4),
            Arm(f"P{P}-frozen2", tgt, {"kind": "ess", "sigma0": 2.0}, iterations, 0, 0.4),
            Arm(f"P{P}-agess-scalar", tgt, {"kind": "agess-scalar", "sigma0": 2.0}, iterations, 0, 0.4),
            Arm(f"P{P}-agess-t", tgt, {"kind": "agess", "family": "t", "nu": 6, "sigma0": 2.0}, iterations, 0, 0.4),
        ]
    return arms


def _relu(datasets: int = 1) -> list[Arm]:
    arms = []
    for D in RELU_DIMS:
        for k in range(datasets):
            tgt = {"name": "relu", "d": D, "n": 1000, "data_seed": _DATA_SEED + 100 * D + k}
            burn = 2500 * D
            arms += [
                Arm(f"D{D}-data{k}-arw", tgt, {"kind": "arw", "sigma0": 1.0}, 30_000 * D, burn),
                Arm(f"D{D}-data{k}-ess", tgt, {"kind": "ess"}, 10_000 * D, burn),
                Arm(f"D{D}-data{k}-agess", tgt, {"kind": "agess", "family": "t", "nu": 6}, 10_000 * D, burn),
            ]
    return arms


def _bananas(name: str, datasets: int, iterations: int, burn: int) -> list[Arm]:
    rng = np.random.default_rng(_DATA_SEED + (0 if name == "banana" else 1))
    arms = []
    for k in range(datasets):
        mu1, mu2 = (float(v) for v in rng.normal(0.0, 3.0, size=2))
        tgt = {"name": name, "mu1": mu1, "mu2": mu2, "data_seed": _DATA_SEED + k}
        arms += [
            Arm(f"data{k}-ess", tgt, {"kind": "ess"}, iterations, burn),
            Arm(f"data{k}-agess", tgt, {"kind": "agess", "family": "t", "nu": 6}, iterations, burn),
            Arm(f"data{k}-arw", tgt, {"kind": "arw"}, iterations, burn),
        ]
    return arms


def preset(name: str) -> ExperimentConfig:
    """Fully populated :class:`ExperimentConfig` for a named study."""
    out = default_output_dir()
    if name == "fig1":
        return ExperimentConfig(_fig1(), chains=1, base_seed=1, out=f"{out}/fig1", name=name, preset=name)
    if name == "volcano":
        return ExperimentConfig(_volcano(), chains=1, base_seed=2, out=f"{out}/volcano", name=name, preset=name)
    if name == "relu":
        return ExperimentConfig(_relu(), chains=2, base_seed=3, out=f"{out}/relu", name=name, preset=name)
    if name == "banana":
        return ExperimentConfig(_bananas("banana", 3, 200_000, 100_000), chains=1, base_seed=4,
                                out=f"{out}/banana", name=name, preset=name)
    if name == "twinbanana":
        return ExperimentConfig(_bananas("twinbanana", 3, 500_000, 250_000), chains=1, base_seed=5,
                                out=f"{out}/twinbanana", name=name, preset=name)
    if name == "horseshoe-desk":
        tgt = {"name": "horseshoe", "d": 20, "n": 50, "data_seed": _DATA_SEED}
        arms = [Arm("agess", tgt, {"kind": "agess", "family": "t", "nu": 6}, 300_000, 100_000)]
        return ExperimentConfig(arms, chains=4, base_seed=6, out=f"{out}/horseshoe-desk", name=name, preset=name)
    if name == "deepgp":
        tgt = {"name": "deepgp", "n": 50, "g_w": 1e-8, "g_y": 1e-8, "nu": 6.0}
        sampler = {"kind": "agess", "family": "t", "nu": 6, "x0": "random_lengthscales", "sigma0": 0.1}
        arms = [Arm("agess", tgt, sampler, 50_000, 25_000)]
        return ExperimentConfig(arms, chains=3, base_seed=7, out=f"{out}/deepgp", name=name, preset=name)
    raise ConfigurationError(f"unknown preset {name!r}; choose from {PRESETS}")


PRESETS = ("fig1", "volcano", "relu", "banana", "twinbanana", "horseshoe-desk", "deepgp")
