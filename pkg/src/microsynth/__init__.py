"""Synthetic Boolean data preserving low-degree marginals.

Two pipelines are provided.  :class:`AnonymousSynthesizer` microaggregates
the input into k equal blocks and bootstraps from the block means, so every
released atom summarizes exactly n/k rows.  :class:`PrivateSynthesizer`
additionally randomizes the projection, damps small blocks, and perturbs
weights and atoms with calibrated noise to give epsilon differential privacy.

Quality is measured by the average error over degree-d marginals; see
:func:`error_report`.
"""

from .anonymous import (
    AnonymousSynthesizer,
    aggregation_profile,
    bootstrap,
    generate_anonymous,
    microaggregate,
    randomized_round,
)
from .audit import (
    GofResult,
    OracleConfig,
    ProbeResult,
    SensitivityAudit,
    bingham_gof,
    brute_covariance_loss,
    empirical_dp_probe,
    enumerate_sensitivity,
    iter_partitions,
    min_partition_covariance_loss,
    optimality_fixture,
    reachable_assignments,
    run_audit_suite,
)
from .covering import (
    LatticeCovering,
    Partition,
    SpectralProjection,
    equipartition,
    lattice_covering,
    nearest_point_partition,
    second_moment,
    single_point_covering,
    top_t_projection,
    verify_block_spread,
)
from .exceptions import NumericalError, ParseError, ResourceLimitError
from .marginals import (
    DegreeErrors,
    MarginalErrorReport,
    MarginalSpec,
    avg_marginal_error,
    error_report,
    marginal,
    off_diagonal_error_sq,
    tensor_moment,
)
from .mechanisms import (
    laplace_vector,
    private_projection,
    project_ball_l2,
    project_box_l2,
    project_simplex_l1,
    sample_bingham,
    sample_bingham_many,
)
from .private import (
    AccuracyCertificate,
    DpParams,
    PrivateSynthesizer,
    damped_microaggregate,
    generate_private,
    noise_and_project,
)
from .results import RunResult, SynthDataset
from ._rng import derive_rng

__version__ = "0.1.0"

__all__ = [
    "AccuracyCertificate",
    "AnonymousSynthesizer",
    "DegreeErrors",
    "DpParams",
    "GofResult",
    "LatticeCovering",
    "MarginalErrorReport",
    "MarginalSpec",
    "NumericalError",
    "OracleConfig",
    "ParseError",
    "Partition",
    "PrivateSynthesizer",
    "ProbeResult",
    "ResourceLimitError",
    "RunResult",
    "SensitivityAudit",
    "SpectralProjection",
    "SynthDataset",
    "aggregation_profile",
    "avg_marginal_error",
    "bingham_gof",
    "bootstrap",
    "brute_covariance_loss",
    "damped_microaggregate",
    "derive_rng",
    "empirical_dp_probe",
    "enumerate_sensitivity",
    "equipartition",
    "error_report",
    "generate_anonymous",
    "generate_private",
    "iter_partitions",
    "laplace_vector",
    "lattice_covering",
    "marginal",
    "microaggregate",
    "min_partition_covariance_loss",
    "nearest_point_partition",
    "noise_and_project",
    "off_diagonal_error_sq",
    "optimality_fixture",
    "private_projection",
    "project_ball_l2",
    "project_box_l2",
    "project_simplex_l1",
    "randomized_round",
    "reachable_assignments",
    "run_audit_suite",
    "sample_bingham",
    "sample_bingham_many",
    "second_moment",
    "single_point_covering",
    "tensor_moment",
    "top_t_projection",
    "verify_block_spread",
]
