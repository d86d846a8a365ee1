"""Independent oracles for auditing the synthesis pipelines.

Everything here recomputes a guarantee from first principles: covariance
losses from explicit distributions, sensitivity bounds by exhaustive
enumeration of neighboring datasets, privacy ratios from empirical output
histograms, sphere-sampler distributions against quadrature, and the
lower-bound fixture by brute-force search over all partitions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate
from scipy.stats import chi2 as chi2_dist

from ._validation import check_matrix, check_symmetric
from .covering import (
    Partition,
    SpectralProjection,
    lattice_covering,
    nearest_point_partition,
)
from .exceptions import NumericalError, ResourceLimitError
from .mechanisms import sample_bingham_many


@dataclass(frozen=True)
class OracleConfig:
    """Knobs for the statistical oracles; defaults suit desk-scale audits."""

    significance: float = 0.01
    probe_trials: int = 200_000
    gof_trials: int = 20_000
    bins: int = 60
    seed: int = 0
    sensitivity_rows: int = 4


def brute_covariance_loss(atoms, partition: Partition, max_n: int = 4096) -> float:
    """Covariance loss of conditioning a uniform atom distribution on blocks.

    X is uniform on the given rows; Y replaces each row by its block mean.
    Returns the Frobenius norm of Cov(X) - Cov(Y), cross-checked against the
    conditional-difference identity Cov(X) - Cov(Y) = E (X-Y)(X-Y)^T.
    """
    arr = check_matrix(atoms, "atoms")
    n = arr.shape[0]
    if n > max_n:
        raise ResourceLimitError(
            f"{n} rows exceeds the brute-force oracle cap of {max_n}"
        )
    if partition.n != n:
        raise ValueError("partition does not match the atom count")
    block_means = np.zeros_like(arr)
    for block in partition.blocks:
        if block.size:
            block_means[block] = arr[block].mean(axis=0)
    sx = arr.T @ arr / n
    sy = block_means.T @ block_means / n
    direct = sx - sy
    residual = arr - block_means
    conditional = residual.T @ residual / n
    gap = float(np.abs(direct - conditional).max(initial=0.0))
    if gap > 1e-10 * max(1.0, float(np.abs(direct).max(initial=0.0))):
        raise NumericalError(
            f"covariance-loss identity violated (entrywise gap {gap:.3g})"
        )
    return float(np.linalg.norm(direct))


def _all_patterns(p: int) -> np.ndarray:
    """All Boolean patterns in {0,1}^p as a (2^p, p) array, lexicographic."""
    return np.array(
        list(itertools.product((0.0, 1.0), repeat=p)), dtype=np.float64
    )


def reachable_assignments(p: int) -> List[np.ndarray]:
    """Pattern-to-block maps induced by actual coverings, for sensitivity audits.

    Includes the trivial single-block map, the nearest-point split along each
    coordinate axis, and the nearest-point partition under the all-ones
    direction with a genuine lattice covering.
    """
    patterns = _all_patterns(p) / math.sqrt(p)
    maps: List[np.ndarray] = [np.zeros(2**p, dtype=np.int64)]
    for axis in range(p):
        basis = np.zeros((p, 1))
        basis[axis, 0] = 1.0
        covering = lattice_covering(SpectralProjection(basis=basis), 0.9)
        maps.append(nearest_point_partition(patterns, covering).assignments)
    ones = np.full((p, 1), 1.0 / math.sqrt(p))
    covering = lattice_covering(SpectralProjection(basis=ones), 0.6)
    maps.append(nearest_point_partition(patterns, covering).assignments)
    return maps


@dataclass(frozen=True)
class SensitivityAudit:
    """Exhaustive neighboring-pair deviation for one pipeline stage."""

    stage: str
    bound: float
    max_deviation: float
    pairs_checked: int

    @property
    def attainment(self) -> float:
        return self.max_deviation / self.bound if self.bound > 0 else 0.0

    @property
    def within_bound(self) -> bool:
        return self.max_deviation <= self.bound * (1.0 + 1e-12) + 1e-15

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "bound": self.bound,
            "max_deviation": self.max_deviation,
            "pairs_checked": self.pairs_checked,
            "attainment": self.attainment,
            "within_bound": self.within_bound,
        }


def _enumerate_datasets(n: int, n_patterns: int) -> np.ndarray:
    """All length-n tuples over the pattern alphabet, shape (N, n)."""
    total = n_patterns**n
    if total > 2**22:
        raise ResourceLimitError(
            f"{total} datasets is beyond the exhaustive-enumeration budget"
        )
    grids = np.meshgrid(*([np.arange(n_patterns)] * n), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def enumerate_sensitivity(
    stage: str,
    n: int,
    p: int,
    damping: float = 1.0,
    assignment: Optional[np.ndarray] = None,
) -> SensitivityAudit:
    """Exhaustively check a stage's sensitivity bound over all neighbor pairs.

    Every dataset of n rows over {0,1}^p (scaled by 1/sqrt(p)) is paired with
    every dataset obtained by replacing one row; the maximal output deviation
    is compared against the stage bound.  The pattern-to-block ``assignment``
    fixes the partition geometry; memberships are recomputed per dataset.
    """
    if stage not in ("weights", "vectors", "second_moment"):
        raise ValueError(f"unknown stage {stage!r}")
    if damping <= 0.0:
        raise ValueError("damping must be positive")
    n_patterns = 2**p
    patterns = _all_patterns(p) / math.sqrt(p)
    if assignment is None:
        assignment = np.zeros(n_patterns, dtype=np.int64)
    assignment = np.asarray(assignment, dtype=np.int64)
    if assignment.shape != (n_patterns,):
        raise ValueError(f"assignment must map all {n_patterns} patterns")
    s = int(assignment.max()) + 1

    datasets = _enumerate_datasets(n, n_patterns)
    big_n = datasets.shape[0]
    pattern_counts = np.zeros((big_n, n_patterns), dtype=np.int64)
    for row in range(n):
        np.add.at(pattern_counts, (np.arange(big_n), datasets[:, row]), 1)

    block_of_pattern = assignment
    membership = np.zeros((n_patterns, s))
    membership[np.arange(n_patterns), block_of_pattern] = 1.0

    def block_outputs(counts: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Weights (N, s) and damped vectors (N, s, p) from pattern counts."""
        block_counts = counts @ membership
        weights = block_counts / n
        sums = np.einsum("Nq,qs,qp->Nsp", counts, membership, patterns)
        denom = np.maximum(block_counts, damping)[:, :, None]
        return weights, sums / denom

    if stage == "second_moment":
        # The second-moment difference for a single-row swap depends only on
        # the two patterns involved, so the exhaustive maximum over datasets
        # equals the maximum over ordered pattern pairs; each pair occurs in
        # some neighboring pair as long as n >= 1.
        outers = np.einsum("qi,qj->qij", patterns, patterns)
        worst = 0.0
        for old in range(n_patterns):
            for new in range(n_patterns):
                diff = (outers[new] - outers[old]) / n
                worst = max(worst, float(np.linalg.norm(diff, 2)))
        pairs = big_n * n * n_patterns
        return SensitivityAudit(
            stage=stage, bound=2.0 / n, max_deviation=worst, pairs_checked=pairs
        )

    base_weights, base_vectors = block_outputs(pattern_counts)
    worst = 0.0
    pairs = 0
    for row in range(n):
        old_patterns = datasets[:, row]
        for new in range(n_patterns):
            new_counts = pattern_counts.copy()
            np.subtract.at(new_counts, (np.arange(big_n), old_patterns), 1)
            new_counts[:, new] += 1
            new_weights, new_vectors = block_outputs(new_counts)
            pairs += big_n
            if stage == "weights":
                dev = np.abs(new_weights - base_weights).sum(axis=1)
            else:
                dev = np.abs(new_vectors - base_vectors).sum(axis=(1, 2))
            worst = max(worst, float(dev.max()))
    if stage == "weights":
        bound = 2.0 / n
    else:
        bound = 4.0 * math.sqrt(p) / damping
    return SensitivityAudit(
        stage=stage, bound=bound, max_deviation=worst, pairs_checked=pairs
    )


def _wilson(count: int, total: int, z: float) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if total <= 0:
        return 0.0, 1.0
    phat = count / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = (
        z
        * math.sqrt(phat * (1.0 - phat) / total + z * z / (4 * total * total))
        / denom
    )
    return max(center - half, 0.0), min(center + half, 1.0)


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of an empirical privacy probe on one neighboring pair."""

    epsilon: float
    trials: int
    bins_used: int
    excluded_bins: int
    max_log_ratio: float
    upper_band: float
    lower_band: float
    slack: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "trials": self.trials,
            "bins_used": self.bins_used,
            "excluded_bins": self.excluded_bins,
            "max_log_ratio": self.max_log_ratio,
            "upper_band": self.upper_band,
            "lower_band": self.lower_band,
            "slack": self.slack,
            "passed": self.passed,
        }


def _default_binner(
    out_a: np.ndarray, out_b: np.ndarray, bins: int
) -> Tuple[np.ndarray, np.ndarray, int]:
    """Equal-width interior bins over the pooled central range, open tails."""
    pooled = np.concatenate([out_a, out_b])
    lo, hi = np.percentile(pooled, [0.5, 99.5])
    if hi <= lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins - 1)
    return (
        np.searchsorted(edges, out_a),
        np.searchsorted(edges, out_b),
        bins,
    )


def empirical_dp_probe(
    mechanism: Callable[[object, np.random.Generator, int], np.ndarray],
    dataset_a,
    dataset_b,
    epsilon: float,
    trials: int = 10**6,
    bins: int = 60,
    seed: int = 0,
    binner: Optional[Callable] = None,
    min_count: Optional[int] = None,
    slack: Optional[float] = None,
    z: float = 2.576,
) -> ProbeResult:
    """Histogram-ratio check of an epsilon guarantee on a neighboring pair.

    Runs the mechanism ``trials`` times on each dataset, bins the outputs
    jointly, and compares per-bin frequencies.  Bins with fewer than
    ``min_count`` observations on either side are excluded (and counted).
    The probe passes if the Wilson upper band of the worst log ratio stays
    within epsilon plus a trials-dependent slack, in both directions.
    """
    if trials < 10**5:
        raise ValueError("probe needs at least 1e5 trials to be meaningful")
    rng_a = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 1])))
    rng_b = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 2])))
    out_a = np.asarray(mechanism(dataset_a, rng_a, trials))
    out_b = np.asarray(mechanism(dataset_b, rng_b, trials))
    if binner is None:
        ids_a, ids_b, n_bins = _default_binner(out_a, out_b, bins)
    else:
        ids_a, ids_b, n_bins = binner(out_a, out_b)
    if n_bins > 1000:
        raise ValueError(f"binning produced {n_bins} cells (limit 1000)")
    counts_a = np.bincount(ids_a, minlength=n_bins)
    counts_b = np.bincount(ids_b, minlength=n_bins)

    if min_count is None:
        min_count = max(200, trials // 500)
    if slack is None:
        slack = 10.0 / math.sqrt(min_count)

    max_point = 0.0
    upper = 0.0
    lower = 0.0
    used = 0
    excluded = 0
    for ca, cb in zip(counts_a.tolist(), counts_b.tolist()):
        if ca == 0 and cb == 0:
            continue
        if ca < min_count or cb < min_count:
            excluded += 1
            continue
        used += 1
        lo_a, hi_a = _wilson(ca, trials, z)
        lo_b, hi_b = _wilson(cb, trials, z)
        pa, pb = ca / trials, cb / trials
        max_point = max(max_point, abs(math.log(pa / pb)))
        upper = max(upper, math.log(hi_a / lo_b), math.log(hi_b / lo_a))
        lower = max(
            lower,
            math.log(lo_a / hi_b) if lo_a > 0 else 0.0,
            math.log(lo_b / hi_a) if lo_b > 0 else 0.0,
            0.0,
        )
    if used == 0:
        raise NumericalError("privacy probe had no adequately sampled bins")
    return ProbeResult(
        epsilon=epsilon,
        trials=trials,
        bins_used=used,
        excluded_bins=excluded,
        max_log_ratio=max_point,
        upper_band=upper,
        lower_band=lower,
        slack=slack,
        passed=upper <= epsilon + slack,
    )


@dataclass(frozen=True)
class GofResult:
    """Chi-square comparison of sphere-sampler draws against quadrature."""

    statistic: float
    pvalue: float
    bins_used: int
    trials: int

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "pvalue": self.pvalue,
            "bins_used": self.bins_used,
            "trials": self.trials,
        }


def bingham_gof(
    operator,
    trials: int = 10**5,
    bins: int = 60,
    seed: int = 0,
    min_expected: float = 10.0,
) -> GofResult:
    """Goodness of fit of the sphere sampler in dimension 2.

    Bins sampled angles on the circle and compares against bin probabilities
    obtained by numerical quadrature of exp(<A u(theta), u(theta)>).  Bins
    with expected count below ``min_expected`` are merged into their
    neighbor before the chi-square statistic is formed.
    """
    a = check_symmetric(operator, "operator")
    if a.shape[0] != 2:
        raise ValueError("goodness-of-fit oracle is implemented for dimension 2 only")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 3])))
    draws = sample_bingham_many(a, trials, rng)
    angles = np.arctan2(draws[:, 1], draws[:, 0])

    edges = np.linspace(-math.pi, math.pi, bins + 1)
    observed = np.histogram(angles, bins=edges)[0].astype(np.float64)

    peak = float(np.linalg.eigvalsh(a)[-1])

    def density(theta: float) -> float:
        u = np.array([math.cos(theta), math.sin(theta)])
        return math.exp(float(u @ a @ u) - peak)

    masses = np.array(
        [integrate.quad(density, edges[i], edges[i + 1])[0] for i in range(bins)]
    )
    expected = masses / masses.sum() * trials

    # Merge under-populated bins circularly so the chi-square approximation
    # stays valid for concentrated operators.
    obs_list = observed.tolist()
    exp_list = expected.tolist()
    while len(exp_list) > 2 and min(exp_list) < min_expected:
        i = int(np.argmin(exp_list))
        j = (i + 1) % len(exp_list)
        exp_list[j] += exp_list[i]
        obs_list[j] += obs_list[i]
        del exp_list[i], obs_list[i]
    obs_arr = np.array(obs_list)
    exp_arr = np.array(exp_list)
    statistic = float(np.sum((obs_arr - exp_arr) ** 2 / exp_arr))
    dof = len(exp_list) - 1
    pvalue = float(chi2_dist.sf(statistic, dof))
    return GofResult(
        statistic=statistic, pvalue=pvalue, bins_used=len(exp_list), trials=trials
    )


def optimality_fixture(
    p: int, k: int, seed: int = 0, max_attempts: int = 1000
) -> np.ndarray:
    """Scaled Boolean points witnessing that aggregation must lose covariance.

    Draws 2k uniform Boolean points until all pairwise Euclidean distances
    exceed sqrt(p)/2, then scales by 1/sqrt(p).  Requires p large enough
    relative to k for such a draw to exist with high probability.
    """
    n_points = 2 * k
    if p <= 16.0 * math.log(2 * n_points):
        raise ValueError(
            f"dimension p={p} too small for {n_points} separated points; "
            f"need p > {16.0 * math.log(2 * n_points):.1f}"
        )
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 4])))
    threshold_sq = p / 4.0
    for _ in range(max_attempts):
        pts = rng.integers(0, 2, size=(n_points, p)).astype(np.float64)
        ok = True
        for i in range(n_points):
            diffs = pts[i + 1 :] - pts[i]
            if diffs.size and float((diffs**2).sum(axis=1).min()) <= threshold_sq:
                ok = False
                break
        if ok:
            return pts / math.sqrt(p)
    raise ResourceLimitError(
        f"could not draw {n_points} separated Boolean points in {max_attempts} tries"
    )


def iter_partitions(n: int, max_blocks: int):
    """All set partitions of range(n) into at most max_blocks non-empty blocks."""
    assignment = [0] * n

    def recurse(i: int, used: int):
        if i == n:
            blocks = [
                np.array([j for j in range(n) if assignment[j] == b], dtype=np.int64)
                for b in range(used)
            ]
            yield Partition(blocks=tuple(blocks), n=n)
            return
        for b in range(min(used + 1, max_blocks)):
            assignment[i] = b
            yield from recurse(i + 1, max(used, b + 1))

    yield from recurse(0, 0)


def min_partition_covariance_loss(points, max_blocks: int) -> Tuple[float, int]:
    """Brute-force minimum covariance loss over all small partitions."""
    arr = check_matrix(points, "points")
    best = math.inf
    count = 0
    for partition in iter_partitions(arr.shape[0], max_blocks):
        count += 1
        best = min(best, brute_covariance_loss(arr, partition))
    return best, count


def run_audit_suite(data, epsilon: float = 0.5, config: Optional[OracleConfig] = None) -> Dict:
    """Small structural audit sized for CLI runs; returns a JSON-ready dict."""
    cfg = config or OracleConfig()
    arr = check_matrix(data, "data")
    n, p = arr.shape
    report: Dict = {"epsilon": epsilon, "seed": cfg.seed}

    # Covariance-loss identity on a light subsample with an index-parity split.
    sub = arr[: min(n, 64)]
    half = Partition(
        blocks=(
            np.arange(0, sub.shape[0], 2),
            np.arange(1, sub.shape[0], 2),
        ),
        n=sub.shape[0],
    )
    report["covariance_loss_identity"] = {
        "loss": brute_covariance_loss(sub / math.sqrt(p), half),
        "checked": True,
    }

    # Sensitivity enumeration at toy scale with reachable geometries.
    toy_p = min(p, 3)
    toy_n = min(cfg.sensitivity_rows, 4)
    damping = math.sqrt(toy_p * toy_n ** (2.0 / 3.0) / epsilon)
    stages = {}
    for stage in ("weights", "vectors", "second_moment"):
        worst_dev = 0.0
        bound = 0.0
        pairs = 0
        for assignment in reachable_assignments(toy_p):
            audit = enumerate_sensitivity(
                stage, toy_n, toy_p, damping=damping, assignment=assignment
            )
            worst_dev = max(worst_dev, audit.max_deviation)
            bound = audit.bound
            pairs += audit.pairs_checked
        stages[stage] = {
            "bound": bound,
            "max_deviation": worst_dev,
            "pairs_checked": pairs,
            "within_bound": worst_dev <= bound * (1 + 1e-12) + 1e-15,
        }
    report["sensitivity"] = stages

    # Laplace mechanism probe on a sensitivity-one counting query.
    def counting_mechanism(value, rng, size):
        return rng.laplace(float(value), 1.0 / epsilon, size)

    probe = empirical_dp_probe(
        counting_mechanism,
        0.0,
        1.0,
        epsilon,
        trials=cfg.probe_trials,
        bins=cfg.bins,
        seed=cfg.seed,
    )
    report["laplace_probe"] = probe.to_dict()

    # Sphere-sampler distribution check at moderate concentration.
    gof = bingham_gof(
        np.diag([4.0, 0.0]), trials=cfg.gof_trials, bins=cfg.bins, seed=cfg.seed
    )
    report["bingham_gof"] = gof.to_dict()
    report["bingham_gof"]["passed"] = gof.pvalue >= cfg.significance
    return report
