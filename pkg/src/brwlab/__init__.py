"""Simulation laboratory for critical branching random walk on the lattice.

Conditioned Galton-Watson trees (spine construction with a whole-tree
rejection oracle), lattice embedding with exact occupancy spectra, limit-law
samplers, exact one-dimensional and matching-based Wasserstein distances,
moment estimators, and reproducible verification suites behind one CLI.
"""

from .config import ExperimentConfig, InvalidConfig, load_config
from .engine import (
    OccupancyBatch,
    merge_batches,
    rejection_occupancy,
    rejection_z,
    spine_occupancy,
    spine_z,
    unconditioned_occupancy,
    unconditioned_z,
)
from .estimators import (
    CovarianceEstimate,
    FourthMomentCheck,
    KappaEstimate,
    collect_occupancy,
    estimate_A,
    estimate_mu_kappa,
    fourth_moment_ratio,
    sigma_tilde,
)
from .experiments import RUNNERS, DegenerateSigma, RunRecord, run_suite, write_record
from .lattice import (
    LatticeConfig,
    MissingLabels,
    OccupancySpectrum,
    embed,
    embed_final,
    make_lattice,
    occupancy_spectrum,
    pack_sites,
    shared_site_count,
    site_multiplicities,
    spine_block_sum_gap,
)
from .offspring import (
    BUILTIN_LAWS,
    DegenerateVariance,
    LawError,
    NotCritical,
    NotNormalized,
    OffspringLaw,
    SizeBiasedLaw,
    binary_law,
    geometric_law,
    law_by_name,
    make_law,
    pgf_iterate,
    poisson_law,
    size_biased,
    survival_exact,
)
from .reference import (
    CovMatrix,
    GeometricSumSpec,
    InvalidMu,
    NotPSD,
    clt_bound,
    coin_summand_spec,
    default_c_mvn,
    default_c_r,
    empirical_summand_spec,
    mvn_compare_bound,
    renyi_bound,
    sample_exp,
    sample_geometric_sum,
    sample_mvn,
    sample_sl,
    sl_cf,
    sqrt_factor,
    two_point_summand_spec,
)
from .streams import substream
from .trees import (
    ConditionedForest,
    RetryBudgetExceeded,
    label_ancestors,
    sample_conditioned_rejection,
    sample_conditioned_spine,
    simulate_generation_sizes,
    validate_forest,
)
from .wasserstein import (
    Baseline,
    CapExceeded,
    DistanceReport,
    NegativeSample,
    SizeMismatch,
    bootstrap_baseline,
    w1_integer_vs_geometric,
    w1_matching,
    w1_sorted,
    w1_vs_exp,
)

__version__ = "0.1.0"
