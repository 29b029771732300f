"""Chain output container shared by the drivers, diagnostics and harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation

TAGS = ("init", "adaptive_full", "nonadaptive_full", "coord_sweep", "arw")
TAG_CODE = {name: i for i, name in enumerate(TAGS)}


@dataclass
class Trace:
    """States of one chain (original space) plus per-iteration metadata.

    Row 0 is the initial state; its loop count is 0 and its tag ``init``.
    ``commits`` holds ``(iteration, mean, scale)`` snapshots of the adaptive
    parameters, ``timings`` wall-clock seconds per phase.
    """

    states: np.ndarray
    loop_counts: np.ndarray
    kernel_tags: np.ndarray
    burn_in: int = 0
    accepted: np.ndarray | None = None
    commits: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    n_evals: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        n = self.states.shape[0]
        self.loop_counts = np.asarray(self.loop_counts, dtype=np.int64)
        self.kernel_tags = np.asarray(self.kernel_tags, dtype=np.int8)
        if self.loop_counts.shape != (n,) or self.kernel_tags.shape != (n,):
            raise ContractViolation("per-iteration metadata must match the number of states")

    @classmethod
    def from_states(cls, states, **kwargs) -> "Trace":
        states = np.asarray(states, dtype=float)
        n = states.shape[0]
        kwargs.setdefault("loop_counts", np.zeros(n, dtype=np.int64))
        kwargs.setdefault("kernel_tags", np.zeros(n, dtype=np.int8))
        return cls(states=states, **kwargs)

    @property
    def n(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def sampling_states(self) -> np.ndarray:
        return self.states[self.burn_in :]

    def final_fraction(self, fraction: float) -> np.ndarray:
        """The last ``fraction`` of all states (burn-in included in the count)."""
        k = int(round(self.n * fraction))
        return self.states[self.n - k :]

    def tag_counts(self, start: int = 1) -> dict[str, int]:
        codes, counts = np.unique(self.kernel_tags[start:], return_counts=True)
        return {TAGS[c]: int(k) for c, k in zip(codes, counts)}

    def mean_loop_count(self, start: int | None = None) -> float:
        start = max(1, self.burn_in if start is None else start)
        lc = self.loop_counts[start:]
        return float(lc.mean()) if lc.size else float("nan")
