"""Correlation detection in random unlabeled trees and partial alignment
of sparse correlated graphs, with a Monte Carlo experiment harness."""

from .trees import (
    CanonicalTree,
    LabeledTree,
    canonicalize,
    chain_tree,
    enumerate_trees,
    intern_tree,
    leaf,
    parse_encoding,
    prune_to_depth,
    star_tree,
)
from .series import (
    OTTER_ALPHA,
    OtterEstimate,
    PowerSeries,
    estimate_otter,
    log_phi_value,
    phi_eval,
    tree_counts,
)
from .models import (
    ModelParams,
    RngStream,
    SparseGraph,
    extinction_prob,
    read_graph,
    sample_correlated_er,
    sample_correlated_pair,
    sample_gw,
    sample_gw_conditioned,
    sample_null_pair,
    sample_shifted_pair,
    write_graph,
)
from .matching import (
    RateEstimate,
    edge_matching_weight,
    estimate_matching_rate,
    lap_max,
    matching_weight,
    subtree_away_from,
)
from .likelihood import (
    LikelihoodEvaluator,
    LrTestResult,
    MomentEstimate,
    PropagationConstants,
    cyclic_moment_analytic,
    estimate_cyclic_moment_mc,
    estimate_kl_mc,
    gw_prob,
    log_likelihood_ratio,
    likelihood_ratio,
    lr_test_threshold,
    one_sided_lr_test,
    pair_probability_alternative,
    poisson_central_moment4,
    propagation_constants,
    z_mean_alternative,
    z_statistic,
)
from .eigen import (
    charlier,
    eigenfunction,
    gaussian_covariance_check,
    kl_gaussian_limit,
    mixed_moment,
    mixed_moment_limit,
    verify_decomposition,
    verify_orthogonality,
)
from .align import (
    AlignmentResult,
    Neighborhood,
    dangling_trees,
    dedup_pairs,
    neighborhood,
    ntma,
    ntma2,
    score,
)

__version__ = "0.1.0"
