"""Uncoupled Stackelberg learning with commitments for two-player differentiable games."""

from .benchmarks import BUILTIN_GAMES, builtin_game, g0, g0_spec, quadratic_2d, quadratic_2d_spec, two_peak
from .dynamics import (
    NoiseModel,
    PerturbationDraw,
    coupled_step,
    draw_perturbation,
    follower_ga_step,
    hierarchical_gradient,
    sga_step,
    spsa_gradient,
    spsa_increment,
)
from .equilibria import (
    EquilibriumReport,
    QuadraticOracleResult,
    best_response_solve,
    check_dne,
    check_dse,
    implicit_jacobian,
    quadratic_oracle,
    total_hessian,
)
from .errors import *  # noqa: F401,F403
from .game import Box, FDReport, Game, GameConstants, QuadraticGameSpec, eval_payoff, fd_validate, gradient, second_derivative
from .harness import (
    CallbackFollower,
    GradientAscentFollower,
    LeaderConfig,
    OracleFollower,
    StageClock,
    TrajectoryLog,
    run_coupled,
    run_hic,
    run_sga,
    tracking_error_series,
)
from .schedules import CommitmentSchedule, PowerLaw, ScheduleSpec, commitment_length, commitment_times, validate

__version__ = "0.1.0"
