"""Photon-counting target ranging: exact error probabilities, exponents and Monte Carlo."""

__version__ = "0.1.0"

from .coherent_exact import (
    ExactErrorQuery,
    generating_g,
    p_err_multicopy_coherent,
    p_err_single_shot,
    regularized_gamma_q,
)
from .exceptions import (
    ConfigConflictError,
    ConfigError,
    ConvergenceError,
    DomainError,
    FeasibilityError,
    QRangingError,
    RuleMismatchError,
    UndefinedAdvantageError,
)
from .info_measures import (
    poisson_alpha_series,
    ExponentReport,
    alpha_information,
    chernoff_information,
    poisson_alpha_closed,
    quantum_advantage,
    xi_coherent_closed,
    xi_quantum,
    xi_ranging,
)
from .photon_stats import (
    ChannelParams,
    CountPmf,
    JointCountPmf,
    TmsvProbe,
    binomial_thin,
    coherent_slot_pmf,
    convolve,
    neg_binomial_pmf,
    poisson_pmf,
    quantum_slot_joint_pmf,
)
from .ranging_sim import (
    CoherentProbe,
    DecisionRule,
    McEstimate,
    Scenario,
    ShotOutcome,
    decide,
    enumerate_error_probability,
    mc_error_probability,
    sample_shot,
    slope_report,
)
