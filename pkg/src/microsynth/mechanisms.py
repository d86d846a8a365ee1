"""Randomized primitives for the private pipeline.

Contains the Laplace noise helpers, a sampler for the Bingham-type law on
the unit sphere with density proportional to exp(<Av, v>), a subspace
projection assembled from repeated sphere samples, and the two metric
projections (l1 onto the probability simplex, l2 onto a box or ball).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from ._validation import check_symmetric
from .covering import SpectralProjection
from .exceptions import ResourceLimitError

MAX_REJECTIONS = 10**6


def laplace_vector(scale: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Vector of independent centered Laplace draws with the given scale."""
    if not (math.isfinite(scale) and scale > 0.0):
        raise ValueError(f"scale must be positive and finite, got {scale}")
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    return rng.laplace(0.0, scale, size)


def laplace_inverse_cdf(u: float, scale: float) -> float:
    """Quantile function of the centered Laplace distribution."""
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    if u < 0.5:
        return scale * math.log(2.0 * u)
    return -scale * math.log(2.0 * (1.0 - u))


def laplace_cdf(x: np.ndarray, scale: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(
        x < 0.0, 0.5 * np.exp(x / scale), 1.0 - 0.5 * np.exp(-x / scale)
    )


def laplace_log_density(x: np.ndarray, scale: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return -np.abs(x) / scale - math.log(2.0 * scale)


def _check_psd_operator(operator, name: str = "operator") -> np.ndarray:
    a = check_symmetric(operator, name)
    eigvals = np.linalg.eigvalsh(a)
    if eigvals[0] < -1e-8:
        raise ValueError(
            f"{name} must be positive semidefinite "
            f"(smallest eigenvalue {eigvals[0]:.3g})"
        )
    return a


def sample_bingham_many(
    operator,
    size: int,
    rng: np.random.Generator,
    max_rejections: int = MAX_REJECTIONS,
) -> np.ndarray:
    """Draw unit vectors with density proportional to exp(<Av, v>).

    Rejection sampling with an angular-central-Gaussian proposal: eigenvalues
    of A are shifted into concentrations c_i = max(eig) - eig_i >= 0, the
    proposal covariance is diag(1 / (1 + 2 c_i / b)) in the eigenbasis, and b
    solves sum_i 1/(b + 2 c_i) = 1, which makes the standard envelope
    constant exp(-(q-b)/2) (q/b)^(q/2) valid.  Returns an array (size, q).
    """
    a = _check_psd_operator(operator)
    q = a.shape[0]
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    eigvals, eigvecs = np.linalg.eigh(a)
    conc = eigvals[-1] - eigvals
    conc = np.maximum(conc, 0.0)

    if conc.max() < 1e-12:
        # Constant quadratic form: the law is uniform on the sphere.
        raw = rng.standard_normal((size, q))
        return raw / np.linalg.norm(raw, axis=1, keepdims=True)

    b = brentq(lambda t: float(np.sum(1.0 / (t + 2.0 * conc))) - 1.0, 1e-12, float(q))
    omega = 1.0 + 2.0 * conc / b
    log_envelope = -(q - b) / 2.0 + (q / 2.0) * math.log(q / b)

    accepted = np.empty((size, q))
    filled = 0
    proposals = 0
    while filled < size:
        batch = max(256, 2 * (size - filled))
        proposals += batch
        if proposals > max_rejections + size:
            raise ResourceLimitError(
                f"sphere sampler exceeded {max_rejections} rejections "
                f"(dimension {q}, max concentration {conc.max():.3g})"
            )
        raw = rng.standard_normal((batch, q)) / np.sqrt(omega)
        norms = np.linalg.norm(raw, axis=1, keepdims=True)
        x = raw / norms
        xsq = x**2
        quad = xsq @ conc
        log_ratio = -quad + (q / 2.0) * np.log(xsq @ omega) - log_envelope
        keep = np.log(rng.random(batch)) <= log_ratio
        kept = x[keep]
        take = min(kept.shape[0], size - filled)
        accepted[filled : filled + take] = kept[:take]
        filled += take
    return accepted @ eigvecs.T


def sample_bingham(
    operator,
    rng: np.random.Generator,
    max_rejections: int = MAX_REJECTIONS,
) -> np.ndarray:
    """Single draw from the sphere law with density proportional to exp(<Av, v>)."""
    return sample_bingham_many(operator, 1, rng, max_rejections)[0]


def _householder_complement(w: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the hyperplane orthogonal to unit vector ``w``.

    Columns 1..q-1 of the Householder reflection mapping w to a signed first
    basis vector.  Shape (q, q-1).
    """
    q = w.shape[0]
    if q == 1:
        return np.zeros((1, 0))
    sign = -1.0 if w[0] >= 0.0 else 1.0
    u = w.copy()
    u[0] -= sign
    denom = u @ u
    if denom < 1e-30:
        # w is already a signed basis vector; the remaining axes span w-perp.
        return np.eye(q)[:, 1:]
    h = np.eye(q) - np.outer(u, u) * (2.0 / denom)
    return h[:, 1:]


def private_projection(
    operator,
    rank: int,
    rng: np.random.Generator,
    max_rejections: int = MAX_REJECTIONS,
) -> SpectralProjection:
    """Rank-``rank`` projection assembled from repeated sphere samples.

    Each direction is drawn from the exp(<Av, v>) law of the operator
    restricted to the orthogonal complement of the directions chosen so far;
    the restriction is represented in an explicit orthonormal basis of that
    complement, so the sampler always sees a full-dimensional operator.
    """
    a = _check_psd_operator(operator)
    p = a.shape[0]
    if not 1 <= rank <= p:
        raise ValueError(f"rank must lie in [1, {p}], got {rank}")
    complement = np.eye(p)
    directions = []
    for i in range(rank):
        restricted = complement.T @ a @ complement
        restricted = 0.5 * (restricted + restricted.T)
        local = sample_bingham(restricted, rng, max_rejections)
        directions.append(complement @ local)
        if i + 1 < rank:
            complement = complement @ _householder_complement(local)
    return SpectralProjection(basis=np.column_stack(directions))


def project_simplex_l1(weights) -> np.ndarray:
    """l1 metric projection onto the probability simplex.

    Negative entries are zeroed and the rest rescaled to sum to one; this
    attains the minimal l1 distance.  If nothing positive remains the
    projection is not unique and the uniform vector is returned.
    """
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.size < 1:
        raise ValueError("weights must be non-empty")
    clipped = np.maximum(w, 0.0)
    total = clipped.sum()
    if total <= 0.0:
        return np.full(w.size, 1.0 / w.size)
    return clipped / total


def project_box_l2(points, lower: float = 0.0, upper: float = 1.0) -> np.ndarray:
    """Euclidean metric projection onto an axis-aligned box: coordinate clamping."""
    if not lower <= upper:
        raise ValueError(f"need lower <= upper, got [{lower}, {upper}]")
    return np.clip(np.asarray(points, dtype=np.float64), lower, upper)


def project_ball_l2(points, radius: float = 1.0) -> np.ndarray:
    """Euclidean metric projection of row vectors onto the centered ball."""
    if radius <= 0.0:
        raise ValueError(f"radius must be positive, got {radius}")
    arr = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(arr, axis=-1, keepdims=True)
    factor = np.minimum(1.0, radius / np.maximum(norms, 1e-300))
    return arr * factor
