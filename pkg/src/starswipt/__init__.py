"""Sum-rate maximization for STAR-RIS assisted SWIPT downlinks.

Alternating optimization over transmit beamformers (lifted SDR with
rank-1 recovery), energy-splitting surface coefficients and receiver
power-splitting ratios, plus the comparison schemes and a seeded sweep
harness.
"""

from .ao import AoOptions, SolveReport, initialize_solution, relaxation_bounds, run_ao
from .baselines import Scheme, run_baseline
from .config import ConfigError, load_config
from .estimator import StarSwiptOptimizer
from .experiments import ResultRow, SweepSpec, load_sweep, read_results, run_sweep, write_results
from .model import (BeamformerSet, FeasibilityReport, PowerSplit, SolutionState, StarCoefficients,
                    check_feasibility, effective_channel, harvested_energy, sinr_and_rate, sum_rate)
from .recovery import (RandomizationOptions, RecoveryError, optimal_power_split, recover_beamformers,
                       recover_star_coefficients)
from .scenario import (ChannelSet, SystemConfig, build_channels, dbm_to_watts, path_loss_amplitude,
                       sample_channel, watts_to_dbm)
from .sdr import build_p2, build_p3, update_auxiliary

__version__ = "0.1.0"

__all__ = [
    "AoOptions", "SolveReport", "initialize_solution", "relaxation_bounds", "run_ao",
    "Scheme", "run_baseline", "ConfigError", "load_config", "StarSwiptOptimizer",
    "ResultRow", "SweepSpec", "load_sweep", "read_results", "run_sweep", "write_results",
    "BeamformerSet", "FeasibilityReport", "PowerSplit", "SolutionState", "StarCoefficients",
    "check_feasibility", "effective_channel", "harvested_energy", "sinr_and_rate", "sum_rate",
    "RandomizationOptions", "RecoveryError", "optimal_power_split", "recover_beamformers",
    "recover_star_coefficients", "ChannelSet", "SystemConfig", "build_channels", "dbm_to_watts",
    "path_loss_amplitude", "sample_channel", "watts_to_dbm", "build_p2", "build_p3", "update_auxiliary",
]
