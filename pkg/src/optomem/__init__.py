"""Simulation and parameter estimation for an optomechanical light memory
based on optomechanically induced transparency."""

from .core import (
    DriveState,
    SidebandWarning,
    SystemParams,
    coherence_time,
    cooperativity,
    drive_state,
    gamma_opt,
    cavity_photon_number,
    mech_susceptibility,
    thermal_occupancy,
)
from .memory import (
    ProtocolTimeline,
    ProtocolTrace,
    SignalPulse,
    closed_form_efficiency,
    efficiency,
    ode_oracle,
    simulate_protocol,
)
from .response import SpectrumTrace, dba_sweep, omit_probe_response, omit_spectrum

__version__ = "0.1.0"

__all__ = [
    "DriveState",
    "ProtocolTimeline",
    "ProtocolTrace",
    "SidebandWarning",
    "SignalPulse",
    "SpectrumTrace",
    "SystemParams",
    "cavity_photon_number",
    "closed_form_efficiency",
    "coherence_time",
    "cooperativity",
    "dba_sweep",
    "drive_state",
    "efficiency",
    "gamma_opt",
    "mech_susceptibility",
    "ode_oracle",
    "omit_probe_response",
    "omit_spectrum",
    "simulate_protocol",
    "thermal_occupancy",
]
