"""Numerical laboratory for a reputational expert/quack/judge selection game.

Construct and verify the judge's extremism-rewarding tie-break rules, run
seeded Monte Carlo simulations of the benchmark game, evaluate the judge's
learning statistics, and solve the model's extensions (non-uniform priors
and noise, asymmetric identity beliefs, sequential talk, one speaker with an
outside option).
"""

__version__ = "0.1.0"

from .core import (
    ConstructionError,
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    GameConfig,
    NoiseSpec,
    OneSpeakerOptions,
    PriorSpec,
    consistency_probability,
    is_consistent,
    signal_cdf,
    signal_cdf_inv,
    signal_density,
    substream,
)
from .engine import (
    ExpertStrategy,
    QuackStrategy,
    SimulationReport,
    StrategyProfile,
    best_response_scan,
    expert_deviation_payoff,
    mc_quack_message_payoff,
    quack_message_payoff,
    simulate,
)
from .ext_struct import (
    NoiseEquilibrium,
    PriorMimicSolution,
    build_prior_max_rule,
    expert_foc_signs,
    pi_objective,
    prior_weighted_payoff,
    solve_mbar,
    solve_noise_equilibrium,
)
from .ext_variants import (
    IdentityEquilibrium,
    IdentityRulePair,
    OneSpeakerEquilibrium,
    SequentialReport,
    identity_equilibrium,
    identity_quack_payoff,
    identity_rule_pair,
    one_speaker_equilibrium,
    sequential_equilibrium,
    simulate_identity,
    simulate_sequential,
)
from .metrics import (
    PosteriorSummary,
    learn_probability,
    learn_probability_conditional,
    learn_probability_conditional_paper_stated,
    learn_probability_paper_stated,
    learning_summary,
    mc_learning_estimates,
    posterior,
    variance_reduction,
)
from .rules import (
    PiecewiseRule,
    QuackValue,
    build_continuous_rule_eps1,
    build_max_rule,
    build_min_rule,
    coin_rule,
    continuous_rule_eps1,
    quack_value,
    select,
    zeta,
)
