"""Result containers shared by the two synthesis pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .marginals import MarginalErrorReport


@dataclass(frozen=True)
class SynthDataset:
    """Synthetic rows plus the domain they live in and how they were made.

    ``domain`` is "boolean" for {0,1}-valued rows and "unit_cube" for rows in
    [0,1]^p.  ``provenance`` records the generating parameters, including the
    resolved seed, so a run can be replayed.
    """

    rows: np.ndarray
    domain: str
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError("rows must be 2-d")
        if self.domain not in ("boolean", "unit_cube"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.domain == "boolean" and np.any((rows != 0.0) & (rows != 1.0)):
            raise ValueError("boolean dataset contains non-binary entries")
        if self.domain == "unit_cube" and (rows.min() < 0.0 or rows.max() > 1.0):
            raise ValueError("unit_cube dataset has entries outside [0, 1]")
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    @property
    def n_columns(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class RunResult:
    """A finished synthesis run: the data, its error report, and run metadata."""

    dataset: SynthDataset
    report: MarginalErrorReport
    manifest: Dict
