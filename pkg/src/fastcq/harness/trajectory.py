"""Run results: one record per accepted step, plus counters and metadata."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Trajectory"]


@dataclass
class Trajectory:
    """Times, step sizes and per-step diagnostics of one solver run.

    ``rows[i]`` corresponds to ``columns``; times are strictly increasing
    with one record per accepted step.  ``final_state`` carries whole
    solution vectors at the end of the run (or at recorded checkpoints),
    ``meta`` the run status and parameters, ``counters`` the engine tallies.
    """

    experiment: str
    columns: list
    rows: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    final_state: dict = field(default_factory=dict)

    def append(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.rows.append([float(v) for v in values])

    def column(self, name: str) -> np.ndarray:
        idx = self.columns.index(name)
        return np.array([r[idx] for r in self.rows])

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def step_sizes(self) -> np.ndarray:
        return self.column("h")

    def validate(self) -> None:
        t = self.times
        if np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times are not strictly increasing")

    def to_csv(self, path) -> None:
        """Full-precision CSV (17 significant digits) with a header row."""
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    def counters_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.counters, fh, indent=2, sort_keys=True)
            fh.write("\n")
