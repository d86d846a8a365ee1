"""Low-degree marginal statistics and error metrics for point-cloud datasets.

A dataset is an (n, p) array whose rows are records.  The degree-d marginal
for a strictly increasing index tuple (j_1 < ... < j_d) is the mean over rows
of the product of the selected coordinates.  For Boolean data this is the
fraction of records with ones in all selected columns, the quantity a
contingency-table query would return.

Fidelity between a reference dataset and a synthetic one is measured through
the tensor of marginal differences.  Two reductions of that tensor are
exposed:

* ``avg_marginal_error``: the average of squared differences over strictly
  increasing index tuples.
* ``off_diagonal_error_sq``: the sum of squared differences over all ordered
  tuples of distinct indices.

Per-tuple streaming keeps memory at O(n) regardless of dimension; the dense
``tensor_moment`` oracle exists for desk-scale cross-checks only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from ._validation import check_indices, check_matrix
from .exceptions import ResourceLimitError

# Dense moment tensors above this entry count are refused.
MAX_DENSE_ENTRIES = 10**7

# Reports fall back to Monte-Carlo tuple sampling above this many index sets.
DEFAULT_TUPLE_CAP = 20000


@dataclass(frozen=True)
class MarginalSpec:
    """Degree/dimension pair for a marginal query family."""

    degree: int
    dimension: int

    def __post_init__(self) -> None:
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        if self.degree > self.dimension:
            raise ValueError(
                f"degree {self.degree} exceeds dimension {self.dimension}"
            )

    @property
    def n_index_sets(self) -> int:
        return math.comb(self.dimension, self.degree)

    def require_balanced(self) -> None:
        # The comparison between increasing-index averages and distinct-index
        # sums is only meaningful when the dimension is at least twice the
        # degree; callers relying on that bound must check it first.
        if 2 * self.degree > self.dimension:
            raise ValueError(
                f"dimension {self.dimension} must be at least twice the "
                f"degree {self.degree} for balanced-index comparisons"
            )


@dataclass(frozen=True)
class DegreeErrors:
    """Error summary for a single marginal degree."""

    degree: int
    avg_sym_sq: float
    off_sq: float
    worst_entry: float
    n_tuples: int
    sampled: bool = False
    standard_error: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "avg_sym_sq": self.avg_sym_sq,
            "off_sq": self.off_sq,
            "worst_entry": self.worst_entry,
            "n_tuples": self.n_tuples,
            "sampled": self.sampled,
            "standard_error": self.standard_error,
        }


@dataclass(frozen=True)
class MarginalErrorReport:
    """Per-degree marginal error summaries for a (reference, synthetic) pair."""

    by_degree: Dict[int, DegreeErrors] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {str(d): e.to_dict() for d, e in sorted(self.by_degree.items())}


def _product_mean(data: np.ndarray, indices: Tuple[int, ...]) -> float:
    """Mean over rows of the product of the selected columns.

    Products are taken left to right in the given index order and accumulated
    with exact (correctly rounded) summation, so the result does not depend on
    row order.
    """
    cols = data[:, indices]
    prods = cols[:, 0].copy()
    for j in range(1, cols.shape[1]):
        prods *= cols[:, j]
    return math.fsum(prods.tolist()) / data.shape[0]


def marginal(data, indices: Sequence[int]) -> float:
    """Degree-d marginal of ``data`` at a strictly increasing index tuple."""
    arr = check_matrix(data)
    idx = check_indices(indices, arr.shape[1])
    return _product_mean(arr, idx)


def _check_pair(true_data, synth_data) -> Tuple[np.ndarray, np.ndarray]:
    a = check_matrix(true_data, "true_data")
    b = check_matrix(synth_data, "synth_data")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"datasets must share a column dimension, got {a.shape[1]} and {b.shape[1]}"
        )
    return a, b


def avg_marginal_error(true_data, synth_data, degree: int) -> float:
    """Average squared marginal difference over strictly increasing tuples.

    For Boolean inputs every marginal lies in [0, 1], so the result is
    bounded by 1.
    """
    a, b = _check_pair(true_data, synth_data)
    spec = MarginalSpec(degree, a.shape[1])
    squares = [
        (_product_mean(a, idx) - _product_mean(b, idx)) ** 2
        for idx in itertools.combinations(range(spec.dimension), degree)
    ]
    return math.fsum(squares) / spec.n_index_sets


def off_diagonal_error_sq(true_data, synth_data, degree: int) -> float:
    """Sum of squared marginal differences over ordered distinct-index tuples.

    Every ordering of every distinct-index set is evaluated independently;
    nothing here assumes symmetry of the difference tensor.
    """
    a, b = _check_pair(true_data, synth_data)
    spec = MarginalSpec(degree, a.shape[1])
    squares = [
        (_product_mean(a, idx) - _product_mean(b, idx)) ** 2
        for idx in itertools.permutations(range(spec.dimension), degree)
    ]
    return math.fsum(squares)


def tensor_moment(data, degree: int, max_entries: int = MAX_DENSE_ENTRIES) -> np.ndarray:
    """Dense degree-d moment tensor: the mean over rows of d-fold outer powers.

    Desk-scale oracle.  Entries are computed once per sorted index tuple and
    scattered to all permutations, so the output is exactly symmetric.  Sizes
    above ``max_entries`` are refused.
    """
    arr = check_matrix(data)
    p = arr.shape[1]
    if degree < 1:
        raise ValueError(f"degree must be >= 1, got {degree}")
    if p**degree > max_entries:
        raise ResourceLimitError(
            f"dense moment tensor would hold {p**degree} entries "
            f"(limit {max_entries}); use the streaming metrics instead"
        )
    out = np.empty((p,) * degree, dtype=np.float64)
    for idx in itertools.combinations_with_replacement(range(p), degree):
        cols = arr[:, idx]
        prods = cols[:, 0].copy()
        for j in range(1, degree):
            prods *= cols[:, j]
        value = float(np.sum(prods)) / arr.shape[0]
        for perm in set(itertools.permutations(idx)):
            out[perm] = value
    return out


def increasing_index_norm_sq(tensor: np.ndarray) -> float:
    """Sum of squared entries over strictly increasing index tuples."""
    t = np.asarray(tensor, dtype=np.float64)
    d = t.ndim
    p = t.shape[0]
    if any(s != p for s in t.shape):
        raise ValueError(f"tensor must be cubical, got shape {t.shape}")
    idx = list(itertools.combinations(range(p), d))
    if not idx:
        return 0.0
    gathered = t[tuple(np.array(idx).T)]
    return float(np.sum(gathered**2))


def distinct_index_norm_sq(tensor: np.ndarray) -> float:
    """Sum of squared entries over ordered tuples of distinct indices."""
    t = np.asarray(tensor, dtype=np.float64)
    d = t.ndim
    p = t.shape[0]
    if any(s != p for s in t.shape):
        raise ValueError(f"tensor must be cubical, got shape {t.shape}")
    idx = list(itertools.permutations(range(p), d))
    if not idx:
        return 0.0
    gathered = t[tuple(np.array(idx).T)]
    return float(np.sum(gathered**2))


def _sample_index_sets(
    p: int, degree: int, count: int, rng: np.random.Generator
) -> Iterable[Tuple[int, ...]]:
    """Draw ``count`` distinct strictly increasing tuples uniformly."""
    seen = set()
    attempts = 0
    cap = 50 * count + 1000
    while len(seen) < count:
        attempts += 1
        if attempts > cap:
            raise ResourceLimitError(
                f"could not draw {count} distinct index tuples in {cap} attempts"
            )
        pick = tuple(sorted(rng.choice(p, size=degree, replace=False).tolist()))
        seen.add(pick)
    return sorted(seen)


def _degree_errors_exact(a: np.ndarray, b: np.ndarray, degree: int) -> DegreeErrors:
    p = a.shape[1]
    errors = [
        _product_mean(a, idx) - _product_mean(b, idx)
        for idx in itertools.combinations(range(p), degree)
    ]
    worst = max(errors, key=abs, default=0.0)
    avg = math.fsum(e * e for e in errors) / math.comb(p, degree)
    off = off_diagonal_error_sq(a, b, degree)
    return DegreeErrors(
        degree=degree,
        avg_sym_sq=avg,
        off_sq=off,
        worst_entry=float(worst),
        n_tuples=math.comb(p, degree),
    )


def _degree_errors_sampled(
    a: np.ndarray, b: np.ndarray, degree: int, count: int, rng: np.random.Generator
) -> DegreeErrors:
    p = a.shape[1]
    tuples = _sample_index_sets(p, degree, count, rng)
    errors = np.array(
        [_product_mean(a, idx) - _product_mean(b, idx) for idx in tuples]
    )
    squares = errors**2
    worst = float(errors[int(np.argmax(np.abs(errors)))])
    avg = float(np.mean(squares))
    se = float(np.std(squares, ddof=1) / math.sqrt(len(tuples))) if len(tuples) > 1 else 0.0
    # The difference tensor is symmetric, so its distinct-index mass is d!
    # times the total increasing-index mass; with the average estimated by
    # sampling, the same relation gives the estimate below.
    off = math.factorial(degree) * math.comb(p, degree) * avg
    return DegreeErrors(
        degree=degree,
        avg_sym_sq=avg,
        off_sq=off,
        worst_entry=worst,
        n_tuples=len(tuples),
        sampled=True,
        standard_error=se,
    )


def error_report(
    true_data,
    synth_data,
    degrees: Sequence[int] = (1, 2, 3),
    max_tuples: int = DEFAULT_TUPLE_CAP,
    seed: int = 0,
) -> MarginalErrorReport:
    """Marginal error summaries for the requested degrees.

    Degrees whose index-set count exceeds ``max_tuples`` are estimated by
    uniform tuple sampling without replacement and carry a standard error.
    """
    a, b = _check_pair(true_data, synth_data)
    if max_tuples < 2:
        raise ValueError("max_tuples must be at least 2")
    by_degree: Dict[int, DegreeErrors] = {}
    rng = np.random.default_rng(seed)
    for degree in degrees:
        spec = MarginalSpec(int(degree), a.shape[1])
        if spec.n_index_sets <= max_tuples:
            by_degree[spec.degree] = _degree_errors_exact(a, b, spec.degree)
        else:
            by_degree[spec.degree] = _degree_errors_sampled(
                a, b, spec.degree, max_tuples, rng
            )
    return MarginalErrorReport(by_degree=by_degree)
