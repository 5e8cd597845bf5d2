"""Discrete-event simulator for multi-interface devices on MV power-line and fixed-rate media."""

from .channel import (
    CalibrationAnchor,
    ChannelParams,
    bit_error_rate,
    calibrate_gamma,
    interference_distance,
    packet_success_rate,
    snr_db_at_distance,
    tabulate_curves,
)
from .config import ConfigError, SimulationConfig, load_config
from .engine import Simulation
from .medium import LinkTable, Medium, build_link_table
from .topology import PowerlineGraph, connected_components, open_switch, shortest_path_distance

__version__ = "0.1.0"

__all__ = [
    "CalibrationAnchor",
    "ChannelParams",
    "ConfigError",
    "LinkTable",
    "Medium",
    "PowerlineGraph",
    "Simulation",
    "SimulationConfig",
    "bit_error_rate",
    "build_link_table",
    "calibrate_gamma",
    "connected_components",
    "interference_distance",
    "load_config",
    "open_switch",
    "packet_success_rate",
    "shortest_path_distance",
    "snr_db_at_distance",
    "tabulate_curves",
]
