"""Supply-side equilibria of producer competition under personalized recommendations."""

from .closedform import (
    EquilibriumDist,
    FinitePCurve,
    GenreSet,
    InfiniteTwoGenre,
    OnePopulation,
    QuarterCircle,
    angle_cdf,
    eq_cdf_quality,
    eq_sample,
    finite_p_x_cdf,
    genre_set,
    make_finite_p_curve,
    make_infinite_two_genre,
    make_one_population,
    make_p2_quarter_circle,
)
from .geometry import (
    CostSpec,
    TwoUserPlane,
    UserSet,
    angle_between,
    angle_pair,
    basis_pair,
    content_vector,
    cost,
    dual_norm,
    induced_cost,
    induced_cost_grad,
    orthonormal_users,
    two_user_plane,
    weighted_norm,
)
from .ingest import (
    InputDataError,
    NmfConfig,
    NmfResult,
    RatingsTable,
    load_embeddings_csv,
    load_ratings_csv,
    nmf_factorize,
    save_embeddings_csv,
)
from .optimize import (
    OptimizerConfig,
    OptResult,
    minmax_alignment,
    nsw_direction,
    project_cone_ball,
    simplex_logsum_max,
)
from .threshold import (
    ConditionProbe,
    HullTestConfig,
    ThresholdReport,
    beta_estimate,
    beta_star_two_user,
    beta_upper,
    max_condition_holds,
    threshold_report,
)
from .verify import (
    EmpiricalMarginals,
    VerifyReport,
    best_response_gap,
    empirical_marginals,
    equilibrium_profit,
    foc_residual,
    genre_count,
    positive_profit_condition,
    soc_direction_sign,
)

__version__ = "0.1.0"
