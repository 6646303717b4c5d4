"""Steady-state frequency-domain response of the driven cavity.

The probe response uses the linearized single-sided cavity in the frame of
the control field: the probe sideband at offset ``omega_mod`` sees the
cavity at ``delta + omega_mod`` and couples to the mechanics with the
field-enhanced rate ``g``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .core import (
    DriveState,
    SidebandWarning,
    SystemParams,
    cavity_photon_number,
    drive_state,
    gamma_opt,
    mech_susceptibility,
    squeeze,
)

__all__ = [
    "SpectrumTrace",
    "bare_cavity_response",
    "dba_sweep",
    "mirror_coupling",
    "omit_probe_response",
    "omit_spectrum",
    "steady_state_oracle",
    "transmission_power",
]


@dataclass(frozen=True)
class SpectrumTrace:
    """Complex probe response sampled on an increasing frequency grid."""

    omega_mod: np.ndarray
    response: np.ndarray
    params: SystemParams
    kind: str = "broad"

    def __post_init__(self):
        if self.kind not in ("broad", "narrow"):
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        if len(self.omega_mod) != len(self.response):
            raise ValueError("frequency and response arrays differ in length")
        if np.any(np.diff(self.omega_mod) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if not np.all(np.isfinite(self.response)):
            raise ValueError("response must be finite")

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.response) ** 2


def _check_regime(params: SystemParams):
    if params.delta > 0:
        warnings.warn("blue-detuned drive: OMIT response describes amplification",
                      SidebandWarning, stacklevel=3)


def omit_probe_response(params: SystemParams, drive: DriveState | None, omega_mod,
                        stokes_damping: bool = False):
    """Complex reflection amplitude of a weak probe at offset ``omega_mod``.

    ``r = 1 - eta_c kappa / (kappa/2 - i(delta + omega_mod) + g^2 chi_m(omega_mod))``

    Parameters
    ----------
    params : SystemParams
    drive : DriveState or None
        Drive at ``params.delta``; computed from ``params`` when None.
    omega_mod : float or ndarray
        Probe offset from the control, rad/s.
    stokes_damping : bool
        Add the (off-resonant) Stokes anti-damping to the mechanical
        linewidth, so that the transparency window width equals the full
        backaction ``gamma_eff`` rather than ``gamma_m`` plus the
        anti-Stokes rate alone.

    Returns
    -------
    complex or ndarray
    """
    if drive is None:
        drive = drive_state(params)
    _check_regime(params)
    w = np.asarray(omega_mod, dtype=float)
    cavity = params.kappa / 2 - 1j * (params.delta + w)
    if drive.g == 0:
        mech = 0.0
    elif stokes_damping:
        # linewidth may be negative here; the coupled system is still stable
        gamma = params.gamma_m - drive.gamma_stokes
        mech = drive.g**2 / (gamma / 2 - 1j * (w - params.omega_m))
    else:
        mech = drive.g**2 * mech_susceptibility(w, params.omega_m, params.gamma_m)
    r = 1.0 - params.eta_c * params.kappa / (cavity + mech)
    return squeeze(r)


def bare_cavity_response(params: SystemParams, omega_mod):
    """Probe reflection with the optomechanical coupling switched off."""
    w = np.asarray(omega_mod, dtype=float)
    r = 1.0 - params.eta_c * params.kappa / (params.kappa / 2 - 1j * (params.delta + w))
    return squeeze(r)


def omit_spectrum(params: SystemParams, omega_mod, kind: str = "broad",
                  stokes_damping: bool = False) -> SpectrumTrace:
    w = np.asarray(omega_mod, dtype=float)
    r = np.atleast_1d(omit_probe_response(params, None, w, stokes_damping=stokes_damping))
    return SpectrumTrace(omega_mod=w, response=r, params=params, kind=kind)


def dba_sweep(params: SystemParams, delta_grid):
    """Effective mechanical linewidth across control detunings at fixed power.

    Returns ``(delta, gamma_eff)`` arrays.
    """
    delta = np.asarray(delta_grid, dtype=float)
    n = cavity_photon_number(params, delta)
    return delta, params.gamma_m + gamma_opt(params, n, delta)


def mirror_coupling(eta_c: float, t_in: float, t_out: float):
    """Per-mirror fractions of the total cavity decay.

    The excess loss is whatever the input-mirror fraction ``eta_c`` leaves
    unaccounted for, so ``eta_in == eta_c`` by construction.
    """
    if not (0 < t_in < 1 and 0 < t_out < 1):
        raise ValueError("mirror transmissions must lie in (0, 1)")
    total = t_in / eta_c
    eta_in, eta_out = t_in / total, t_out / total
    if eta_in + eta_out > 1 + 1e-12:
        raise ValueError(
            f"eta_c = {eta_c} implies negative excess loss for T_in={t_in}, T_out={t_out}")
    return eta_in, eta_out


def transmission_power(params: SystemParams, mirror_t_in: float = 280e-6,
                       mirror_t_out: float = 10e-6, delta=None):
    """Transmitted power (W) through the output mirror versus detuning.

    ``P_out = P_in eta_in eta_out kappa^2 / ((kappa/2)^2 + delta^2)``, linear
    in ``P_in``.
    """
    d = params.delta if delta is None else np.asarray(delta, dtype=float)
    eta_in, eta_out = mirror_coupling(params.eta_c, mirror_t_in, mirror_t_out)
    k = params.kappa
    return params.p_in * eta_in * eta_out * k**2 / ((k / 2) ** 2 + d**2)


def steady_state_oracle(params: SystemParams, omega_mod: float, drive: DriveState | None = None,
                        settle: float = 40.0) -> complex:
    """Reflection amplitude from time-evolving the coupled linear modes.

    The cavity and mechanical amplitudes start from rest in the frame of
    the probe and are driven by a unit monochromatic input. The evolution
    is exact for constant coefficients: the one-step propagator of the
    augmented system ``[[M, f], [0, 0]]`` is squared repeatedly, doubling
    the elapsed time, until the slowest transient has decayed by
    ``exp(-settle)``.
    """
    if drive is None:
        drive = drive_state(params)
    kin = math.sqrt(params.eta_c * params.kappa)
    m = np.array([
        [-(params.kappa / 2 - 1j * (params.delta + omega_mod)), 1j * drive.g],
        [1j * drive.g, -(params.gamma_m / 2 - 1j * (omega_mod - params.omega_m))],
    ])
    eig = np.linalg.eigvals(m)
    slowest = min(-eig.real)
    if slowest <= 0:
        raise ValueError("linear system is not damped; no steady state")
    h = 0.1 / max(abs(eig))
    aug = np.zeros((3, 3), complex)
    aug[:2, :2] = m
    aug[:2, 2] = (kin, 0.0)
    step = expm(aug * h)
    doublings = max(0, math.ceil(math.log2(settle / (slowest * h))))
    for _ in range(doublings):
        step = step @ step
    a = step[0, 2]  # cavity amplitude reached from rest
    return complex(1.0 - kin * a)
