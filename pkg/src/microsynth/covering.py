"""Geometric partitioning of unit-ball point clouds.

The pipeline implemented here takes rows scaled into the Euclidean unit
ball, projects them onto a low-dimensional subspace, covers the projected
ball with a scaled integer lattice, groups rows by their nearest covering
point, and finally rebalances the groups into blocks of exactly equal size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from ._validation import check_matrix, check_symmetric
from .exceptions import NumericalError, ResourceLimitError

# Refuse lattice enumerations beyond this many points.
MAX_COVERING_POINTS = 10**6


def second_moment(data) -> np.ndarray:
    """Uncentered second moment (1/n) X^T X, symmetrized exactly."""
    arr = check_matrix(data)
    s = arr.T @ arr / arr.shape[0]
    return 0.5 * (s + s.T)


@dataclass(frozen=True)
class SpectralProjection:
    """Orthogonal projection onto the span of ``basis`` columns.

    ``basis`` has shape (p, rank) with orthonormal columns; rank 0 encodes
    the zero projection.  ``spectrum`` optionally carries the descending
    eigenvalues of the matrix the projection was derived from.
    """

    basis: np.ndarray
    spectrum: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        b = np.asarray(self.basis, dtype=np.float64)
        if b.ndim != 2:
            raise ValueError("basis must be 2-d (dimension, rank)")
        object.__setattr__(self, "basis", b)
        gram = b.T @ b
        if gram.size and np.abs(gram - np.eye(self.rank)).max() > 1e-8:
            raise ValueError("basis columns must be orthonormal")

    @property
    def dimension(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    @property
    def matrix(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        return (rows @ self.basis) @ self.basis.T

    def coordinates(self, rows: np.ndarray) -> np.ndarray:
        """Coefficients of the projected rows in the basis (n, rank)."""
        return np.asarray(rows, dtype=np.float64) @ self.basis


def top_t_projection(moment: np.ndarray, rank: int) -> SpectralProjection:
    """Projection onto the ``rank`` leading eigenvectors of a symmetric matrix."""
    s = check_symmetric(moment, "moment")
    p = s.shape[0]
    if not 0 <= rank <= p:
        raise ValueError(f"rank must lie in [0, {p}], got {rank}")
    try:
        eigvals, eigvecs = np.linalg.eigh(s)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigendecomposition failed for {p}x{p} moment matrix "
            f"(Frobenius norm {np.linalg.norm(s):.3g}): {exc}"
        ) from exc
    order = np.argsort(eigvals)[::-1]
    spectrum = eigvals[order]
    basis = np.ascontiguousarray(eigvecs[:, order[:rank]])
    residual_sq = float(np.sum(spectrum[rank:] ** 2))
    if rank >= 1 and float(np.trace(s)) <= 1.0 + 1e-9:
        # For a PSD matrix with trace at most 1, the discarded spectrum has
        # squared Frobenius mass at most 1/rank.
        if residual_sq > 1.0 / rank + 1e-9:
            raise NumericalError(
                f"spectral residual {residual_sq:.6g} exceeds 1/rank for a "
                "trace-bounded moment matrix"
            )
    return SpectralProjection(basis=basis, spectrum=spectrum)


@dataclass(frozen=True)
class LatticeCovering:
    """Scaled-lattice covering of the unit ball of a projection's range.

    ``coords`` holds the covering points in basis coordinates (size, rank);
    ``points`` holds the same points in ambient coordinates (size, dimension).
    Every point of the range's unit ball lies strictly within ``alpha`` of
    some covering point.
    """

    projection: SpectralProjection
    alpha: float
    coords: np.ndarray
    points: np.ndarray

    @property
    def size(self) -> int:
        return self.points.shape[0]


def _enumerate_ball_lattice(rank: int, step: float, cap: int) -> np.ndarray:
    """Integer-lattice points z with ||step * z||_2 <= 1, in lexicographic order."""
    radius_sq = 1.0 / (step * step)
    out: List[Tuple[int, ...]] = []
    vec = [0] * rank

    def recurse(axis: int, remaining_sq: float) -> None:
        bound = int(math.floor(math.sqrt(max(remaining_sq, 0.0))))
        for z in range(-bound, bound + 1):
            rest = remaining_sq - z * z
            if rest < 0:
                continue
            vec[axis] = z
            if axis + 1 == rank:
                out.append(tuple(vec))
                if len(out) > cap:
                    raise ResourceLimitError(
                        f"lattice covering would exceed {cap} points"
                    )
            else:
                recurse(axis + 1, rest)

    recurse(0, radius_sq)
    return np.array(out, dtype=np.float64)


def lattice_covering(
    projection: SpectralProjection,
    alpha: float,
    max_points: int = MAX_COVERING_POINTS,
) -> LatticeCovering:
    """Cover the unit ball of the projection's range at resolution ``alpha``.

    The covering is the intersection of the ball with the integer lattice
    scaled by alpha / sqrt(rank), mapped to ambient coordinates through the
    projection basis.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    t = projection.rank
    if t < 1:
        raise ValueError("projection rank must be at least 1")
    step = alpha / math.sqrt(t)
    coords = _enumerate_ball_lattice(t, step, max_points) * step
    points = coords @ projection.basis.T
    bound = (7.0 / alpha) ** t
    if coords.shape[0] > bound:
        raise NumericalError(
            f"covering size {coords.shape[0]} exceeds the guaranteed bound {bound:.3g}"
        )
    return LatticeCovering(
        projection=projection, alpha=alpha, coords=coords, points=points
    )


def single_point_covering(dimension: int, alpha: float) -> LatticeCovering:
    """Degenerate covering used when the projection rank is zero.

    All rows project to the origin, which the single covering point matches
    exactly, so nearest-point grouping puts every row in one block.
    """
    projection = SpectralProjection(basis=np.zeros((dimension, 0)))
    return LatticeCovering(
        projection=projection,
        alpha=alpha,
        coords=np.zeros((1, 0)),
        points=np.zeros((1, dimension)),
    )


@dataclass(frozen=True)
class Partition:
    """Disjoint index blocks covering range(n).  Blocks may be empty."""

    blocks: Tuple[np.ndarray, ...]
    n: int
    equal_sized: bool = False

    def __post_init__(self) -> None:
        blocks = tuple(
            np.asarray(b, dtype=np.int64).reshape(-1) for b in self.blocks
        )
        object.__setattr__(self, "blocks", blocks)
        if self.n < 1:
            raise ValueError("partition ground set must be non-empty")
        if blocks:
            merged = np.concatenate(blocks)
        else:
            merged = np.array([], dtype=np.int64)
        if merged.size != self.n or not np.array_equal(
            np.sort(merged), np.arange(self.n)
        ):
            raise ValueError("blocks must partition range(n) exactly")
        if self.equal_sized:
            sizes = {b.size for b in blocks}
            if len(sizes) != 1:
                raise ValueError("equal_sized partition has unequal blocks")

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b.size for b in self.blocks], dtype=np.int64)

    @property
    def assignments(self) -> np.ndarray:
        """Index of the block containing each element (length n)."""
        out = np.empty(self.n, dtype=np.int64)
        for j, block in enumerate(self.blocks):
            out[block] = j
        return out


def nearest_point_partition(data, covering: LatticeCovering) -> Partition:
    """Group rows by their nearest covering point.

    Rows are projected onto the covering's subspace first; distances are
    taken in ambient coordinates and ties resolve to the lowest covering
    index.  Rows must lie in the unit ball after projection.
    """
    arr = check_matrix(data)
    if arr.shape[1] != covering.points.shape[1]:
        raise ValueError(
            f"data dimension {arr.shape[1]} does not match covering "
            f"dimension {covering.points.shape[1]}"
        )
    projected = covering.projection.project(arr)
    norms = np.linalg.norm(projected, axis=1)
    if norms.max(initial=0.0) > 1.0 + 1e-9:
        raise ValueError("projected rows must lie in the unit ball")
    sq = (
        (projected**2).sum(axis=1)[:, None]
        - 2.0 * projected @ covering.points.T
        + (covering.points**2).sum(axis=1)[None, :]
    )
    assign = np.argmin(sq, axis=1)
    blocks = tuple(
        np.flatnonzero(assign == j) for j in range(covering.size)
    )
    return Partition(blocks=blocks, n=arr.shape[0])


def verify_block_spread(
    data,
    partition: Partition,
    projection: SpectralProjection,
    alpha: float,
    tol: float = 1e-9,
) -> float:
    """Check that projected rows sit within 2*alpha of their block's mean.

    Returns the worst distance; raises if the guarantee fails.  This is the
    cheap per-run certificate that the covering stage did its job.
    """
    arr = check_matrix(data)
    projected = projection.project(arr)
    worst = 0.0
    for block in partition.blocks:
        if block.size == 0:
            continue
        centroid = projected[block].mean(axis=0)
        dist = np.linalg.norm(projected[block] - centroid, axis=1).max()
        worst = max(worst, float(dist))
    if worst > 2.0 * alpha + tol:
        raise NumericalError(
            f"projected block spread {worst:.6g} exceeds 2*alpha = {2 * alpha:.6g}"
        )
    return worst


def equipartition(partition: Partition, k: int) -> Partition:
    """Rebalance a partition into exactly k blocks of equal size.

    Each input block is carved, in index order, into chunks of size n/k;
    leftovers are concatenated in block order and re-carved into chunks of
    the same size.  Requires k to divide n.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if partition.n % k != 0:
        raise ValueError(f"k={k} must divide the ground-set size {partition.n}")
    size = partition.n // k
    chunks: List[np.ndarray] = []
    leftovers: List[np.ndarray] = []
    for block in partition.blocks:
        ordered = np.sort(block)
        full = ordered.size // size
        for c in range(full):
            chunks.append(ordered[c * size : (c + 1) * size])
        if ordered.size % size:
            leftovers.append(ordered[full * size :])
    if leftovers:
        pool = np.concatenate(leftovers)
        for c in range(pool.size // size):
            chunks.append(pool[c * size : (c + 1) * size])
    return Partition(blocks=tuple(chunks), n=partition.n, equal_sized=True)
