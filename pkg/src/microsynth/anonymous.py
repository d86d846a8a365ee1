"""Anonymous synthetic Boolean data via equal-block microaggregation.

Rows are scaled into the unit ball, projected onto a few leading directions
of their second moment, grouped by nearest covering point, rebalanced into
exactly k blocks of n/k records each, and replaced by block means.  Synthetic
rows are bootstrapped from the k means and rounded back to {0,1}.  Every
released atom is the average of exactly n/k input records, so no output
depends on fewer than n/k people.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._rng import derive_rng
from ._validation import check_boolean_matrix, check_matrix, check_unit_rows, resolve_seed
from .covering import (
    LatticeCovering,
    Partition,
    equipartition,
    lattice_covering,
    nearest_point_partition,
    second_moment,
    single_point_covering,
    top_t_projection,
    verify_block_spread,
)
from .marginals import DEFAULT_TUPLE_CAP, error_report
from .results import RunResult, SynthDataset


@dataclass(frozen=True)
class AggregationProfile:
    """Geometry parameters derived from the block count k.

    ``base`` is floor(sqrt(k)): the budget for covering cells, chosen so that
    leftover mass from rebalancing stays below 1/sqrt(k).
    """

    base: int
    alpha: float
    rank: int


def aggregation_profile(k: int) -> AggregationProfile:
    """Covering resolution and projection rank for a block count k.

    The asymptotic rule alpha = (log log base / log base)^(1/4) only starts
    to bite for large base; below base 16 it is clamped to 0.99, which keeps
    every finite-sample guarantee intact (any alpha in (0, 1) does).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    base = math.isqrt(k)
    if base < 16:
        alpha = 0.99
    else:
        alpha = (math.log(math.log(base)) / math.log(base)) ** 0.25
    rank = int(math.log(base) / math.log(7.0 / alpha)) if base > 1 else 0
    return AggregationProfile(base=base, alpha=alpha, rank=rank)


@dataclass(frozen=True)
class MicroaggregateResult:
    """Output of the aggregation stage, in scaled coordinates."""

    centroids: np.ndarray
    blocks: Partition
    anonymity_level: int
    alpha: float
    covering: LatticeCovering
    nearest: Partition


def microaggregate(scaled_rows, k: int) -> MicroaggregateResult:
    """Aggregate unit-ball rows into k equal blocks and return block means.

    Requires k dividing n.  The nearest-point grouping is checked on every
    run: projected rows must sit within 2*alpha of their group mean.
    """
    arr = check_matrix(scaled_rows, "scaled_rows")
    check_unit_rows(arr, "scaled_rows")
    n, p = arr.shape
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if n % k != 0:
        raise ValueError(f"k={k} must divide the number of rows n={n}")
    profile = aggregation_profile(k)
    rank = min(profile.rank, p)
    if rank == 0:
        covering = single_point_covering(p, profile.alpha)
    else:
        projection = top_t_projection(second_moment(arr), rank)
        covering = lattice_covering(projection, profile.alpha)
    nearest = nearest_point_partition(arr, covering)
    verify_block_spread(arr, nearest, covering.projection, profile.alpha)
    blocks = equipartition(nearest, k)
    size = n // k
    centroids = np.stack([arr[block].sum(axis=0) / size for block in blocks.blocks])
    return MicroaggregateResult(
        centroids=centroids,
        blocks=blocks,
        anonymity_level=size,
        alpha=profile.alpha,
        covering=covering,
        nearest=nearest,
    )


def bootstrap(
    vectors,
    m: int,
    rng: np.random.Generator,
    weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Sample m rows independently with replacement from the given atoms."""
    atoms = check_matrix(vectors, "vectors")
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    s = atoms.shape[0]
    if weights is None:
        idx = rng.integers(0, s, size=m)
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.size != s:
            raise ValueError(f"weights length {w.size} does not match {s} atoms")
        if w.min() < 0.0 or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be a probability vector")
        idx = rng.choice(s, size=m, p=w / w.sum())
    return atoms[idx]


def randomized_round(rows, rng: np.random.Generator) -> np.ndarray:
    """Round each entry to 1 with probability equal to the entry itself.

    Entries must lie in [0, 1] up to 1e-12 slack; the result is unbiased
    coordinate-wise and exactly reproduces products over distinct columns in
    expectation, because distinct coordinates round independently.
    """
    arr = check_matrix(rows, "rows")
    if arr.min() < -1e-12 or arr.max() > 1.0 + 1e-12:
        raise ValueError(
            f"entries must lie in [0, 1] (found range "
            f"[{arr.min():.3g}, {arr.max():.3g}])"
        )
    probs = np.clip(arr, 0.0, 1.0)
    return (rng.random(probs.shape) < probs).astype(np.float64)


class AnonymousSynthesizer(BaseEstimator):
    """Synthesizer releasing bootstrapped block means of k equal groups.

    Parameters
    ----------
    k : number of aggregation blocks; must satisfy 9 <= k and k | n.
    m : number of synthetic rows to draw; defaults to n.
    degrees : marginal degrees evaluated by ``generate_anonymous`` reports.
    random_state : seed for the bootstrap and rounding stages.
    """

    def __init__(
        self,
        k: int,
        m: Optional[int] = None,
        degrees: Sequence[int] = (1, 2, 3),
        random_state=None,
    ):
        self.k = k
        self.m = m
        self.degrees = degrees
        self.random_state = random_state

    def fit(self, X, y=None):
        data = check_boolean_matrix(X)
        n, p = data.shape
        # the aggregation op itself accepts any k >= 1; the pipeline contract
        # starts at k = 9 so the covering-budget rule floor(sqrt(k)) is sound
        if self.k < 9:
            raise ValueError(f"the pipeline needs k >= 9, got {self.k}")
        self.n_samples_, self.n_features_in_ = n, p
        self.scale_ = math.sqrt(p)
        self.seed_ = resolve_seed(self.random_state)
        self.result_ = microaggregate(data / self.scale_, self.k)
        self.centroids_ = self.result_.centroids
        return self

    def sample(self, m: Optional[int] = None, random_state=None) -> np.ndarray:
        """Draw synthetic Boolean rows; replays identically for a fixed seed."""
        check_is_fitted(self, "result_")
        m = m if m is not None else (self.m if self.m is not None else self.n_samples_)
        seed = self.seed_ if random_state is None else resolve_seed(random_state)
        picked = bootstrap(self.centroids_, m, derive_rng(seed, "bootstrap"))
        return randomized_round(picked * self.scale_, derive_rng(seed, "round"))

    def fit_sample(self, X, m: Optional[int] = None) -> np.ndarray:
        return self.fit(X).sample(m)


def generate_anonymous(
    data,
    k: int,
    m: Optional[int] = None,
    degrees: Sequence[int] = (1, 2, 3),
    seed=None,
    max_tuples: int = DEFAULT_TUPLE_CAP,
) -> RunResult:
    """Run the anonymous pipeline end to end and report marginal errors."""
    resolved = resolve_seed(seed)
    timings = {}
    start = time.perf_counter()
    synth = AnonymousSynthesizer(
        k=k, m=m, degrees=degrees, random_state=resolved
    ).fit(data)
    timings["aggregate"] = time.perf_counter() - start

    start = time.perf_counter()
    rows = synth.sample()
    timings["sample"] = time.perf_counter() - start

    start = time.perf_counter()
    report = error_report(
        data, rows, degrees=degrees, max_tuples=max_tuples, seed=resolved
    )
    timings["report"] = time.perf_counter() - start

    manifest = {
        "mode": "anonymous",
        "n": synth.n_samples_,
        "p": synth.n_features_in_,
        "k": k,
        "m": rows.shape[0],
        "seed": resolved,
        "degrees": [int(d) for d in degrees],
        "alpha": synth.result_.alpha,
        "rank": synth.result_.covering.projection.rank,
        "covering_size": synth.result_.covering.size,
        "anonymity_level": synth.result_.anonymity_level,
        "stage_seconds": timings,
    }
    dataset = SynthDataset(rows=rows, domain="boolean", provenance=dict(manifest))
    return RunResult(dataset=dataset, report=report, manifest=manifest)
