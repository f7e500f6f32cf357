"""CRP, FIC and generalized-FIC priors over cluster assignments, with FAB-EM
Gaussian mixtures and exhaustive desk-scale experiments."""

from .gmm_fab import (
    FabConfig,
    FitTrace,
    GmmModel,
    component_dc,
    component_log_pdf,
    fab_e_step,
    fab_fit,
    fab_m_step,
    fab_objective,
    mle_fit_given_assignment,
)
from .lab import (
    GenConfig,
    PosteriorTable,
    dominance_curve,
    generate_gmm_data,
    plugin_log_lik,
    posterior_over_partitions,
    selection_sweep,
)
from .partitions import (
    Assignment,
    BudgetExceeded,
    Partition,
    assignment_counts,
    class_size,
    enumerate_assignments,
    enumerate_partitions,
    partition_of,
)
from .priors import (
    PriorSpec,
    crp_class_log_prob,
    crp_fixed_k_log_normalizer_compositions,
    crp_fixed_k_log_normalizer_partitions,
    crp_sequence_log_prob,
    fic_log_score,
    gfic_log_score,
    log_prior,
)

__version__ = "0.1.0"
