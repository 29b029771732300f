"""Simulated datasets with CSV storage and a JSON sidecar for metadata."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError, ContractViolation


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


@dataclass
class Dataset:
    """Design matrix ``X`` (N x D), response ``y`` (N,) and generation metadata."""

    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X[:, None]
        self.y = np.asarray(self.y, dtype=float).reshape(-1)
        if self.X.shape[0] != self.y.size:
            raise ContractViolation(f"X has {self.X.shape[0]} rows but y has {self.y.size} entries")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise ContractViolation("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def save(self, path) -> tuple[Path, Path]:
        """Write ``<path>.csv`` and ``<path>.json``; returns both paths."""
        path = Path(path)
        csv_path, meta_path = path.with_suffix(".csv"), path.with_suffix(".json")
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        columns = [f"x_{j + 1}" for j in range(self.d)] + ["y"]
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(columns)
            for row, yi in zip(self.X, self.y):
                w.writerow([repr(float(v)) for v in row] + [repr(float(yi))])
        with open(meta_path, "w") as fh:
            json.dump({"columns": columns, "meta": _jsonable(self.meta)}, fh, indent=2)
        return csv_path, meta_path

    @classmethod
    def load(cls, path) -> "Dataset":
        path = Path(path)
        csv_path, meta_path = path.with_suffix(".csv"), path.with_suffix(".json")
        if not csv_path.exists():
            raise ConfigurationError(f"dataset file not found: {csv_path}")
        data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        meta = {}
        if meta_path.exists():
            with open(meta_path) as fh:
                meta = json.load(fh).get("meta", {})
        return cls(data[:, :-1], data[:, -1], meta)
