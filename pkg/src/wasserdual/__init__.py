"""Numerical laboratory for transport-vs-gradient duality of Markov kernels.

The package measures, on discretized spaces and simulated diffusions, the
best constant K in the transport control W_p(P*mu, P*nu) <= K W_p(mu, nu)
and the best constant in the matching L^q gradient estimate for Pf, and
compares the two across exponents.
"""

__version__ = "0.1.0"

from .metric import (
    DiscretePath,
    FiniteMetricSpace,
    ValidationReport,
    cycle_graph_space,
    load_edge_list,
    minimal_geodesic,
    path_graph_space,
    shortest_path_space,
    validate_metric,
)
from .slope import (
    ScalarField,
    SlopeField,
    lipschitz_constant,
    local_slope,
    mcshane_extension,
    slope_at_scale,
    upper_gradient_check,
)
from .transport import (
    Coupling,
    DiscreteMeasure,
    DualPotentials,
    c_transform,
    dirac,
    glue_couplings,
    kantorovich_gap,
    optimal_lipschitz_witness,
    rubinstein_value,
    wasserstein_inf,
    wasserstein_p,
    wasserstein_uniform_assignment,
    wp_limit_sequence,
)
from .hopf_lax import (
    PowerLagrangian,
    hj_residual,
    hopf_lax,
    hopf_lax_lipschitz_bound,
    legendre,
    semigroup_defect,
)
from .kernels import (
    MarkovKernel,
    adjoint_apply,
    apply,
    chapman_kolmogorov_defect,
    collapse_kernel,
    identity_kernel,
    random_walk_kernel,
    torus_heat_kernel,
)
from .heisenberg import (
    Cloud,
    SDEConfig,
    Step2Point,
    cc_distance_estimate,
    dilate,
    gauge_matrix,
    group_inverse,
    group_mul,
    koranyi_gauge,
    left_translate_cloud,
    sample_diffusion,
    thin_cloud,
)
from .duality import (
    DualityReport,
    best_constant_Cp,
    best_constant_Gq,
    build_corpus,
    conjugate_exponent,
    default_pairs,
    duality_gap_report,
    empirical_control_constant,
    g_infty_prime_margins,
    gluing_consistency,
    implication_margins,
    monotonicity_audit,
    winf_support_excess,
)
