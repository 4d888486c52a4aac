"""Predict who is most active in a social media spike from quiet-period data."""

__version__ = "0.1.0"

from .dynamics import (
    DecayFit,
    ModelParams,
    Trajectory,
    expected_iteration,
    fit_decay,
    half_life,
    katz_vector,
    simulate,
    steady_state,
    step_probabilities,
)
from .errors import ConvergenceError, DomainError, ParseError
from .events import Event, EventLog, SendSeries, basal_rates, bin_sends, parse_events, serialize_events, volume_series
from .graph import SparseAdjacency, SpectralEstimate, build_adjacency, degree_bounds, matvec, spectral_radius
from .ranking import Ranking, SweepResult, detect_spike, evaluate_spike, rank_users, responsiveness
from .synth import SynthConfig, generate_network, generate_spike_log

__all__ = [
    "ConvergenceError", "DecayFit", "DomainError", "Event", "EventLog", "ModelParams", "ParseError",
    "Ranking", "SendSeries", "SparseAdjacency", "SpectralEstimate", "SweepResult", "SynthConfig",
    "Trajectory", "basal_rates", "bin_sends", "build_adjacency", "degree_bounds", "detect_spike",
    "evaluate_spike", "expected_iteration", "fit_decay", "generate_network", "generate_spike_log",
    "half_life", "katz_vector", "matvec", "parse_events", "rank_users", "responsiveness",
    "serialize_events", "simulate", "spectral_radius", "steady_state", "step_probabilities",
    "volume_series",
]
