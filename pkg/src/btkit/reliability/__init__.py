"""Reliability of stochastic BTs: Markov analysis, Monte Carlo and static estimates."""
from .analysis import (FORMAT_VERSION, Composition, DeterministicResult, NoCommonStep,
                       NodeAnalysis, ReliabilityReport, UnsupportedNode, analyze, common_step,
                       compose_profiles, deterministic_transient, probability_curves)
from .markov import (MTT, IntegrationDiverged, MarkovModel, NoFeasibleEvent, UnreachableAbsorber,
                     absorption_probabilities, build_dtmc, build_generator, build_model,
                     eliminate_vanishing, fundamental_matrix, mtt_exp_log, mtts_mttf,
                     nilpotency_index, sojourn_times, transient_probabilities)
from .montecarlo import MonteCarloResult, monte_carlo
from .mrg import MRG, Edge, build_mrg
from .profiles import ActionProfile, ConditionProfile, InvalidProfile
from .static import OutOfRange, ParallelUnsupported, static_success_probability, utility_propagate

__all__ = [name for name in dir() if not name.startswith("_")]
