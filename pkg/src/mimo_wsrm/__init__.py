"""Distributed weighted sum-rate maximisation for multicell MU-MIMO OFDMA downlinks."""

from .channel_model import (Assignment, ChannelSet, SystemConfig, generate_channels,
                            random_feasible_beamformers, round_robin_assignment)
from .coordinator import RunState, run, wsrm_iteration
from .exceptions import ConfigError, DegenerateFilterError, SolverError, WsrmError
from .ia_phase import IaResult, run_ia_phase
from .rate_engine import RateReport, weighted_sum_rate
from .subproblem import SolverOptions, SubproblemData

__version__ = "0.1.0"

__all__ = [
    "Assignment", "ChannelSet", "SystemConfig", "generate_channels", "random_feasible_beamformers",
    "round_robin_assignment", "RunState", "run", "wsrm_iteration", "ConfigError",
    "DegenerateFilterError", "SolverError", "WsrmError", "IaResult", "run_ia_phase", "RateReport",
    "weighted_sum_rate", "SolverOptions", "SubproblemData",
]
