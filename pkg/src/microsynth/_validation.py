"""Input validation helpers used by the public entry points."""

from __future__ import annotations

from typing import Optional, Sequence, Union

import numpy as np

RngLike = Union[None, int, np.integer, np.random.Generator]


def check_matrix(data, name: str = "data") -> np.ndarray:
    """Coerce to a 2-d float64 array with at least one row and column."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got ndim={arr.ndim}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_boolean_matrix(data, name: str = "data") -> np.ndarray:
    arr = check_matrix(data, name)
    bad = (arr != 0.0) & (arr != 1.0)
    if np.any(bad):
        row, col = np.argwhere(bad)[0]
        raise ValueError(
            f"{name} must contain only 0/1 entries; found {arr[row, col]!r} "
            f"at row {row}, column {col}"
        )
    return arr


def check_unit_rows(data: np.ndarray, name: str = "data", tol: float = 1e-9) -> None:
    """Require every row to lie in the Euclidean unit ball."""
    norms = np.linalg.norm(data, axis=1)
    worst = float(norms.max(initial=0.0))
    if worst > 1.0 + tol:
        raise ValueError(
            f"rows of {name} must have Euclidean norm <= 1 (max norm {worst:.6g}); "
            "scale the input first"
        )


def check_indices(indices: Sequence[int], dimension: int) -> tuple:
    """Validate a strictly increasing tuple of column indices."""
    idx = tuple(int(j) for j in indices)
    if len(idx) == 0:
        raise ValueError("index tuple must be non-empty")
    for j in idx:
        if not 0 <= j < dimension:
            raise ValueError(f"index {j} out of range for dimension {dimension}")
    if any(a >= b for a, b in zip(idx, idx[1:])):
        raise ValueError(f"indices must be strictly increasing, got {idx}")
    return idx


def check_symmetric(mat, name: str = "matrix", tol: float = 1e-8) -> np.ndarray:
    arr = np.asarray(mat, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    gap = float(np.abs(arr - arr.T).max(initial=0.0))
    if gap > tol:
        raise ValueError(f"{name} must be symmetric (max asymmetry {gap:.3g})")
    return 0.5 * (arr + arr.T)


def resolve_seed(random_state: RngLike) -> int:
    """Resolve a user-facing seed argument to a concrete integer seed.

    ``None`` draws a fresh seed from OS entropy so that the resolved value can
    still be recorded for replay.
    """
    if random_state is None:
        return int(np.random.SeedSequence().entropy % (2**63))
    if isinstance(random_state, np.random.Generator):
        return int(random_state.integers(2**63))
    seed = int(random_state)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    return seed
