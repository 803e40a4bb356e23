"""Numerical solvers for the capacity games of binary fingerprinting codes.

The colluders choose a channel ``p`` (the probability of emitting a 1 when
``z`` of the ``k`` pirate copies carry a 1); the embedder chooses the law of
the per-position bias ``W``.  The payoff is the per-colluder mutual
information under joint decoding or the single-user mutual information
under simple decoding.
"""

from .core import (
    CollusionChannel,
    ContinuousPrior,
    DecoderKind,
    FiniteSpectrumPrior,
    binary_entropy,
    interleaving_channel,
    kl_bernoulli,
    kernels,
)
from .errors import (
    CrossCheckError,
    DivergentIntegralError,
    DomainError,
    FpgameError,
    InfeasibleChannelError,
    InfeasibleRestrictionError,
    InvalidPriorError,
    NonConvergenceError,
    QuadratureError,
    SingularityError,
    SpecError,
)
from .payoff import (
    expected_payoff,
    joint_payoff,
    response_curve,
    simple_payoff,
)
from .games import (
    SolverOptions,
    capacity_bounds,
    degenerate_prior_maximin,
    kkt_report,
    maximize_over_w,
    minimize_over_channel,
    solve_saddle,
)
from .asymptotics import (
    ChannelProfile,
    angle_transform,
    asymptotic_capacity,
    bernstein_expansion_check,
    fisher_integral,
    lift_profile,
    local_payoff_J,
    normalized_payoff,
    optimal_profile,
)
from .oracle import GridSpec, dual_quadrature, fd_gradient, grid_minimax

__version__ = "0.1.0"

__all__ = [
    "CollusionChannel",
    "ContinuousPrior",
    "DecoderKind",
    "FiniteSpectrumPrior",
    "binary_entropy",
    "interleaving_channel",
    "kl_bernoulli",
    "kernels",
    "CrossCheckError",
    "DivergentIntegralError",
    "DomainError",
    "FpgameError",
    "InfeasibleChannelError",
    "InfeasibleRestrictionError",
    "InvalidPriorError",
    "NonConvergenceError",
    "QuadratureError",
    "SingularityError",
    "SpecError",
    "expected_payoff",
    "joint_payoff",
    "response_curve",
    "simple_payoff",
    "SolverOptions",
    "capacity_bounds",
    "degenerate_prior_maximin",
    "kkt_report",
    "maximize_over_w",
    "minimize_over_channel",
    "solve_saddle",
    "ChannelProfile",
    "angle_transform",
    "asymptotic_capacity",
    "bernstein_expansion_check",
    "fisher_integral",
    "lift_profile",
    "local_payoff_J",
    "normalized_payoff",
    "optimal_profile",
    "GridSpec",
    "dual_quadrature",
    "fd_gradient",
    "grid_minimax",
]
