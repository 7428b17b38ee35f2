"""Stochastic evolutionary dynamics of the repeated N-player trust game."""

__version__ = "0.1.0"

from .game import (
    GameParams,
    GroupComposition,
    PopulationState,
    Strategy,
    average_payoff,
    enumerate_states,
    expected_rounds,
    group_payoff,
    heaviside,
    hypergeom_pmf,
    payoff_table,
)
from .markov import (
    ConvergenceError,
    GradientField,
    NonUniqueStationaryError,
    StationaryResult,
    TransitionChain,
    build_chain,
    dense_stationary,
    fermi,
    gradient_field,
    pair_transition,
    state_out_transitions,
    stationary,
    summaries,
)
from .abm import Population, SimConfig, abm_run, abm_step, play_group_game
from .sweep import SweepSpec, parse_config, preset, run_point, run_sweep
