"""Covert-rate maximization for an active-RIS-aided NOMA-ISAC system.

Layers:
    scenario    configuration, geometry, channel generation
    sensing     echo model, Fisher information, CRB, beampatterns
    covertness  warden detection statistics and the covertness constraint
    comm        NOMA rates, SIC feasibility, RIS output power
    conic       declarative SDP builder and certified solve
    optimizer   penalized subproblems, Dinkelbach loop, AO driver
    harness     sweeps, audits, solution files, text tables
"""

from .comm import BeamformerSolution, achievable_rates, composite_channel, \
    ris_output_power, sic_feasible
from .covertness import WillieStats, covertness_margin, kappa_from_epsilon, \
    kl_divergence, min_dep, simulate_willie_detector, willie_variances
from .harness import ExperimentSpec, Mode, emit_beampattern, load_solution, \
    run_experiment, save_solution, verify_solution
from .optimizer import alternating_optimize, initialize, solve_reflect, \
    solve_transmit
from .scenario import ChannelSet, SystemConfig, Target, desk_config, \
    doppler_frequency, paper_config, path_loss, sample_channels, \
    sample_targets, steering_vector
from .sensing import FisherComponents, beampattern, build_fisher_components, \
    crb_trace, fim_affine_map, fisher_information

__version__ = "0.1.0"

__all__ = [
    "BeamformerSolution", "ChannelSet", "ExperimentSpec", "FisherComponents",
    "Mode", "SystemConfig", "Target", "WillieStats", "achievable_rates",
    "alternating_optimize", "beampattern", "build_fisher_components",
    "composite_channel", "covertness_margin", "crb_trace", "desk_config",
    "doppler_frequency", "emit_beampattern", "fim_affine_map",
    "fisher_information", "initialize", "kappa_from_epsilon", "kl_divergence",
    "load_solution", "min_dep", "paper_config", "path_loss", "ris_output_power",
    "run_experiment", "sample_channels", "sample_targets", "save_solution",
    "sic_feasible", "simulate_willie_detector", "solve_reflect",
    "solve_transmit", "steering_vector", "verify_solution",
    "willie_variances",
]
