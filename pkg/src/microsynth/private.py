"""Differentially private synthetic Boolean data.

The pipeline scales rows into the unit ball, draws a low-rank projection
with an exponential-mechanism sphere sampler, covers the projected ball,
partitions rows by nearest covering point, computes damped block averages
and block weights, perturbs both with calibrated Laplace noise, projects the
results back onto the probability simplex and the scaled cube, and finally
bootstraps and rounds.  The privacy budget is split evenly between the
projection, the weight noise, and the vector noise.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._rng import derive_rng
from ._validation import check_boolean_matrix, check_matrix, resolve_seed
from .anonymous import bootstrap, randomized_round
from .covering import (
    LatticeCovering,
    Partition,
    lattice_covering,
    nearest_point_partition,
    second_moment,
    single_point_covering,
    verify_block_spread,
)
from .exceptions import NumericalError
from .marginals import DEFAULT_TUPLE_CAP, error_report, tensor_moment
from .mechanisms import (
    laplace_vector,
    private_projection,
    project_box_l2,
    project_simplex_l1,
)
from .results import RunResult, SynthDataset


@dataclass(frozen=True)
class DpParams:
    """Derived parameters of a private run.

    ``damping`` is the denominator floor for small blocks; it balances the
    damping bias against the vector noise.  The two noise scales equal the
    l1 sensitivity of their stage divided by that stage's budget of
    epsilon / 3.
    """

    n: int
    p: int
    epsilon: float
    kappa: float
    alpha: float
    rank: int
    damping: float
    weight_noise_scale: float
    vector_noise_scale: float

    @classmethod
    def derive(cls, n: int, p: int, epsilon: float, kappa: float = 1.0 / 3.0) -> "DpParams":
        if n < 3:
            raise ValueError(f"need at least 3 rows, got {n}")
        if p < 1:
            raise ValueError(f"dimension must be >= 1, got {p}")
        if not 0.0 < epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
        if not 0.0 < kappa < 1.0:
            raise ValueError(f"kappa must lie in (0, 1), got {kappa}")
        alpha = math.log(n) ** -0.25
        rank = int(kappa * math.log(n) / math.log(7.0 / alpha))
        rank = min(rank, p)
        damping = math.sqrt(p * n ** (1.0 - kappa) / epsilon)
        return cls(
            n=n,
            p=p,
            epsilon=epsilon,
            kappa=kappa,
            alpha=alpha,
            rank=rank,
            damping=damping,
            weight_noise_scale=6.0 / (n * epsilon),
            vector_noise_scale=12.0 * math.sqrt(p) / (damping * epsilon),
        )

    def budget_ledger(self) -> list:
        third = self.epsilon / 3.0
        return [["projection", third], ["weights", third], ["vectors", third]]


@dataclass(frozen=True)
class WeightedAtoms:
    """Probability weights over atoms living in the synthesis domain."""

    weights: np.ndarray
    atoms: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        a = np.asarray(self.atoms, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != w.size:
            raise ValueError("atoms must be (s, p) with one weight per atom")
        if w.min(initial=0.0) < 0.0 or abs(float(w.sum()) - 1.0) > 1e-9:
            raise ValueError("weights must form a probability vector")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "atoms", a)

    @property
    def size(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class NoiseRecord:
    """Realized noise of one run, kept for diagnostics and accuracy audits."""

    weight_noise: np.ndarray
    vector_noise: np.ndarray

    @property
    def weight_l1(self) -> float:
        return float(np.abs(self.weight_noise).sum())

    def weighted_vector_l2(self, weights: np.ndarray) -> float:
        norms = np.linalg.norm(self.vector_noise, axis=1)
        return float(np.dot(np.asarray(weights, dtype=np.float64), norms))


def damped_microaggregate(
    scaled_rows, partition: Partition, damping: float
) -> tuple:
    """Block weights |F_j|/n and damped block sums.

    Small blocks are averaged with denominator ``damping`` instead of their
    size, which caps the influence of any single row; empty blocks get weight
    zero and the origin as their vector.
    """
    arr = check_matrix(scaled_rows, "scaled_rows")
    if damping <= 0.0:
        raise ValueError(f"damping must be positive, got {damping}")
    if partition.n != arr.shape[0]:
        raise ValueError("partition does not match the data")
    n, p = arr.shape
    weights = partition.sizes / n
    vectors = np.zeros((partition.num_blocks, p))
    for j, block in enumerate(partition.blocks):
        if block.size:
            vectors[j] = arr[block].sum(axis=0) / max(block.size, damping)
    return weights, vectors


def noise_and_project(
    weights,
    vectors,
    params: DpParams,
    seed: int,
    body_projection: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> tuple:
    """Perturb weights and vectors with Laplace noise, then project back.

    Weights go through the l1 projection onto the simplex, vectors through
    the Euclidean projection onto the synthesis body (by default the cube
    [0, 1/sqrt(p)]^p).  A zero noise scale injects no noise; that degenerate
    setting exists for tests only.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    v = check_matrix(vectors, "vectors")
    if v.shape[0] != w.size:
        raise ValueError("weights and vectors disagree on the number of blocks")
    s, p = v.shape
    if params.weight_noise_scale < 0.0 or params.vector_noise_scale < 0.0:
        raise ValueError("noise scales must be non-negative")
    if params.weight_noise_scale > 0.0:
        rho = laplace_vector(params.weight_noise_scale, s, derive_rng(seed, "weight_noise"))
    else:
        rho = np.zeros(s)
    if params.vector_noise_scale > 0.0:
        flat = laplace_vector(params.vector_noise_scale, s * p, derive_rng(seed, "vector_noise"))
        vec_noise = flat.reshape(s, p)
    else:
        vec_noise = np.zeros((s, p))
    if body_projection is None:
        upper = 1.0 / math.sqrt(p)
        body_projection = lambda rows: project_box_l2(rows, 0.0, upper)
    atoms = WeightedAtoms(
        weights=project_simplex_l1(w + rho),
        atoms=body_projection(v + vec_noise),
    )
    return atoms, NoiseRecord(weight_noise=rho, vector_noise=vec_noise)


def _weighted_moment(weights: np.ndarray, atoms: np.ndarray, degree: int) -> np.ndarray:
    """Dense tensor sum_j w_j * atom_j^(outer degree)."""
    p = atoms.shape[1]
    out = np.zeros((p,) * degree)
    for w, row in zip(weights, atoms):
        if w == 0.0:
            continue
        t = np.array(w)
        for _ in range(degree):
            t = np.multiply.outer(t, row)
        out += t
    return out


@dataclass(frozen=True)
class AccuracyCertificate:
    """Per-run check of the tensor-error decomposition at one degree.

    ``bound`` sums a projection/covering term, a damping term, and the two
    realized noise terms; the theorem behind the pipeline promises
    ``error <= bound`` for every run, not just on average.
    """

    degree: int
    error: float
    bound: float
    terms: Dict[str, float]

    @property
    def satisfied(self) -> bool:
        return self.error <= self.bound + 1e-9

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "error": self.error,
            "bound": self.bound,
            "terms": dict(self.terms),
            "satisfied": self.satisfied,
        }


class PrivateSynthesizer(BaseEstimator):
    """Differentially private synthesizer for Boolean rows.

    Parameters
    ----------
    epsilon : total privacy budget, in (0, 1).
    kappa : trade-off exponent in (0, 1); larger values spend more of the
        sample on covering resolution, smaller ones on noise damping.
    m : number of synthetic rows; defaults to n.
    degrees : marginal degrees evaluated by ``generate_private`` reports.
    certificate_degrees : degrees at which fit() stores reference moments so
        ``accuracy_certificate`` can be evaluated later.
    random_state : seed for the projection, noise, bootstrap, and rounding.
    """

    def __init__(
        self,
        epsilon: float,
        kappa: float = 1.0 / 3.0,
        m: Optional[int] = None,
        degrees: Sequence[int] = (1, 2, 3),
        certificate_degrees: Sequence[int] = (1, 2),
        random_state=None,
    ):
        self.epsilon = epsilon
        self.kappa = kappa
        self.m = m
        self.degrees = degrees
        self.certificate_degrees = certificate_degrees
        self.random_state = random_state

    def fit(self, X, y=None):
        data = check_boolean_matrix(X)
        n, p = data.shape
        params = DpParams.derive(n, p, self.epsilon, self.kappa)
        self.n_samples_, self.n_features_in_ = n, p
        self.params_ = params
        self.scale_ = math.sqrt(p)
        self.seed_ = resolve_seed(self.random_state)
        scaled = data / self.scale_
        timings: Dict[str, float] = {}

        start = time.perf_counter()
        moment = second_moment(scaled)
        timings["second_moment"] = time.perf_counter() - start

        start = time.perf_counter()
        if params.rank == 0:
            covering = single_point_covering(p, params.alpha)
            skipped = True
        else:
            operator = (n * params.epsilon / (6.0 * params.rank)) * moment
            projection = private_projection(
                operator, params.rank, derive_rng(self.seed_, "projection")
            )
            covering = lattice_covering(projection, params.alpha)
            skipped = False
        if covering.size > params.n**params.kappa * (1.0 + 1e-9):
            raise NumericalError(
                f"covering size {covering.size} exceeds n^kappa = "
                f"{params.n**params.kappa:.3g}"
            )
        timings["projection"] = time.perf_counter() - start

        start = time.perf_counter()
        partition = nearest_point_partition(scaled, covering)
        verify_block_spread(scaled, partition, covering.projection, params.alpha)
        timings["partition"] = time.perf_counter() - start

        start = time.perf_counter()
        true_weights, damped_vectors = damped_microaggregate(
            scaled, partition, params.damping
        )
        timings["aggregate"] = time.perf_counter() - start

        start = time.perf_counter()
        atoms, noise = noise_and_project(
            true_weights, damped_vectors, params, self.seed_
        )
        timings["noise"] = time.perf_counter() - start

        residual = (np.eye(p) - covering.projection.matrix) @ moment @ (
            np.eye(p) - covering.projection.matrix
        )
        self.covering_ = covering
        self.partition_ = partition
        self.true_weights_ = true_weights
        self.atoms_ = atoms
        self.noise_record_ = noise
        self.projection_skipped_ = skipped
        self.residual_fro_ = float(np.linalg.norm(residual))
        self.moments_ = {
            int(d): tensor_moment(scaled, int(d)) for d in self.certificate_degrees
        }
        self.manifest_ = self._build_manifest(timings)
        return self

    def _build_manifest(self, timings: Dict[str, float]) -> Dict:
        params = self.params_
        return {
            "n": params.n,
            "p": params.p,
            "epsilon": params.epsilon,
            "kappa": params.kappa,
            "seed": self.seed_,
            "alpha": params.alpha,
            "rank": params.rank,
            "damping": params.damping,
            "weight_noise_scale": params.weight_noise_scale,
            "vector_noise_scale": params.vector_noise_scale,
            "covering_size": self.covering_.size,
            "projection_skipped": self.projection_skipped_,
            "budget_ledger": params.budget_ledger(),
            "budget_total": params.epsilon,
            "residual_fro": self.residual_fro_,
            "noise_weight_l1": self.noise_record_.weight_l1,
            "noise_vector_weighted_l2": self.noise_record_.weighted_vector_l2(
                self.true_weights_
            ),
            "accuracy_certificates": {
                str(d): self.accuracy_certificate(int(d)).to_dict()
                for d in sorted(self.moments_)
            },
            "stage_seconds": timings,
        }

    def accuracy_certificate(self, degree: int) -> AccuracyCertificate:
        """Evaluate the per-run error decomposition at one degree.

        The left side is the Euclidean norm of the full moment-tensor
        difference between the scaled input and the weighted atoms; the
        right side adds the covering, damping, and realized-noise terms.
        """
        check_is_fitted(self, "atoms_")
        if degree not in self.moments_:
            raise ValueError(
                f"degree {degree} not prepared at fit time "
                f"(have {sorted(self.moments_)})"
            )
        params = self.params_
        synth_moment = _weighted_moment(
            self.atoms_.weights, self.atoms_.atoms, degree
        )
        error = float(np.linalg.norm((self.moments_[degree] - synth_moment).ravel()))
        terms = {
            "projection": 4.0**degree
            * (4.0 * params.alpha**2 + self.residual_fro_),
            "damping": 2.0 * degree * self.covering_.size * params.damping / params.n,
            "weight_noise": 2.0 * self.noise_record_.weight_l1,
            "vector_noise": 2.0
            * degree
            * self.noise_record_.weighted_vector_l2(self.true_weights_),
        }
        return AccuracyCertificate(
            degree=degree,
            error=error,
            bound=float(sum(terms.values())),
            terms=terms,
        )

    def sample(self, m: Optional[int] = None, random_state=None) -> np.ndarray:
        """Draw synthetic Boolean rows; replays identically for a fixed seed."""
        check_is_fitted(self, "atoms_")
        m = m if m is not None else (self.m if self.m is not None else self.n_samples_)
        seed = self.seed_ if random_state is None else resolve_seed(random_state)
        picked = bootstrap(
            self.atoms_.atoms,
            m,
            derive_rng(seed, "bootstrap"),
            weights=self.atoms_.weights,
        )
        return randomized_round(picked * self.scale_, derive_rng(seed, "round"))

    def fit_sample(self, X, m: Optional[int] = None) -> np.ndarray:
        return self.fit(X).sample(m)


def generate_private(
    data,
    epsilon: float,
    kappa: float = 1.0 / 3.0,
    m: Optional[int] = None,
    degrees: Sequence[int] = (1, 2, 3),
    seed=None,
    max_tuples: int = DEFAULT_TUPLE_CAP,
) -> RunResult:
    """Run the private pipeline end to end and report marginal errors."""
    resolved = resolve_seed(seed)
    synth = PrivateSynthesizer(
        epsilon=epsilon, kappa=kappa, m=m, degrees=degrees, random_state=resolved
    ).fit(data)

    start = time.perf_counter()
    rows = synth.sample()
    sample_seconds = time.perf_counter() - start

    start = time.perf_counter()
    report = error_report(
        data, rows, degrees=degrees, max_tuples=max_tuples, seed=resolved
    )
    report_seconds = time.perf_counter() - start

    manifest = dict(synth.manifest_)
    manifest["mode"] = "dp"
    manifest["m"] = rows.shape[0]
    manifest["degrees"] = [int(d) for d in degrees]
    manifest["stage_seconds"] = {
        **manifest["stage_seconds"],
        "sample": sample_seconds,
        "report": report_seconds,
    }
    provenance = {k: v for k, v in manifest.items() if k != "stage_seconds"}
    dataset = SynthDataset(rows=rows, domain="boolean", provenance=provenance)
    return RunResult(dataset=dataset, report=report, manifest=manifest)
