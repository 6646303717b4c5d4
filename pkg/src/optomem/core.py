"""Physical parameters with unit helpers and derived quantities.

All rates and frequencies are stored as angular quantities (rad/s).
Conversion to and from ordinary frequency (Hz) happens only at the I/O
boundary, via :func:`hz` and :func:`to_hz`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import hbar as HBAR
from scipy.constants import k as BOLTZMANN

TWO_PI = 2.0 * math.pi


def hz(value):
    """Ordinary frequency (Hz) to angular frequency (rad/s)."""
    return TWO_PI * np.asarray(value) if np.ndim(value) else TWO_PI * value


def to_hz(value):
    """Angular frequency (rad/s) to ordinary frequency (Hz)."""
    return np.asarray(value) / TWO_PI if np.ndim(value) else value / TWO_PI


def squeeze(value):
    """Python scalar for 0-d input, the array otherwise."""
    arr = np.asarray(value)
    return arr.item() if arr.ndim == 0 else arr


class SidebandWarning(UserWarning):
    """Raised when a model is used outside the resolved-sideband regime."""


@dataclass(frozen=True)
class SystemParams:
    """Static optomechanical parameters, angular units throughout.

    ``t1`` is the dark-storage lifetime; when left as ``None`` it is set
    to ``1/gamma_m`` (infinite for a lossless resonator).
    """

    omega_m: float
    gamma_m: float
    kappa: float
    eta_c: float = 0.63
    g0: float = 0.0
    delta: float = 0.0
    p_in: float = 0.0
    lambda_l: float = 1550e-9
    t1: float | None = None
    eta_loss: float = 1.0
    eta_qe: float = 1.0

    def __post_init__(self):
        for name in ("omega_m", "gamma_m", "kappa", "eta_c", "g0", "delta",
                     "p_in", "lambda_l", "eta_loss", "eta_qe"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.omega_m <= 0 or self.kappa <= 0:
            raise ValueError("omega_m and kappa must be positive")
        if self.gamma_m < 0 or self.g0 < 0 or self.p_in < 0:
            raise ValueError("gamma_m, g0 and p_in must be non-negative")
        if self.lambda_l <= 0:
            raise ValueError("lambda_l must be positive")
        for name in ("eta_c", "eta_loss", "eta_qe"):
            value = getattr(self, name)
            if not 0 < value <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {value}")
        if self.t1 is None:
            t1 = 1.0 / self.gamma_m if self.gamma_m > 0 else math.inf
            object.__setattr__(self, "t1", t1)
        elif self.t1 < 0 or math.isnan(self.t1):
            raise ValueError("t1 must be non-negative")
        if not self.resolved_sideband:
            warnings.warn(
                f"unresolved sidebands: kappa/omega_m = {self.kappa / self.omega_m:.3g}",
                SidebandWarning,
                stacklevel=3,
            )

    @classmethod
    def from_quality_factor(cls, omega_m: float, q: float, kappa: float, **kwargs) -> SystemParams:
        """Build parameters with ``gamma_m = omega_m / q``."""
        if q <= 0:
            raise ValueError("q must be positive")
        gamma_m = 0.0 if math.isinf(q) else omega_m / q
        return cls(omega_m=omega_m, gamma_m=gamma_m, kappa=kappa, **kwargs)

    @classmethod
    def from_hz(cls, omega_m_hz, kappa_hz, *, q=None, gamma_m_hz=None,
                g0_hz=0.0, delta_hz=0.0, **kwargs) -> SystemParams:
        """Build parameters from ordinary-frequency values (Hz)."""
        if (q is None) == (gamma_m_hz is None):
            raise ValueError("give exactly one of q or gamma_m_hz")
        common = dict(g0=hz(g0_hz), delta=hz(delta_hz), **kwargs)
        if q is not None:
            return cls.from_quality_factor(hz(omega_m_hz), q, hz(kappa_hz), **common)
        return cls(omega_m=hz(omega_m_hz), gamma_m=hz(gamma_m_hz), kappa=hz(kappa_hz), **common)

    @property
    def q(self) -> float:
        return self.omega_m / self.gamma_m if self.gamma_m > 0 else math.inf

    @property
    def omega_l(self) -> float:
        """Laser angular frequency 2*pi*c/lambda."""
        return TWO_PI * SPEED_OF_LIGHT / self.lambda_l

    @property
    def resolved_sideband(self) -> bool:
        return self.omega_m > self.kappa

    @property
    def eta_det(self) -> float:
        """Detection-chain efficiency, path loss times detector QE."""
        return self.eta_loss * self.eta_qe

    def replace(self, **changes) -> SystemParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class DriveState:
    """Quantities derived from the control drive at a given detuning."""

    n_cav: float
    g: float
    gamma_opt: float
    gamma_eff: float
    cooperativity: float
    gamma_anti_stokes: float = field(default=0.0, repr=False)
    gamma_stokes: float = field(default=0.0, repr=False)


def mech_susceptibility(omega, omega_m, gamma):
    """Lorentzian mechanical susceptibility ``1 / (gamma/2 - i(omega - omega_m))``.

    Parameters
    ----------
    omega : float or ndarray
        Probe angular frequency, rad/s.
    omega_m : float
        Mechanical resonance, rad/s.
    gamma : float
        Energy damping rate (FWHM), rad/s. Must be positive.

    Returns
    -------
    complex or ndarray
        Susceptibility in units of 1/(rad/s).
    """
    omega = np.asarray(omega, dtype=float)
    if not (np.all(np.isfinite(omega)) and math.isfinite(omega_m) and math.isfinite(gamma)):
        raise ValueError("mech_susceptibility requires finite inputs")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    chi = 1.0 / (gamma / 2 - 1j * (omega - omega_m))
    return squeeze(chi)


def cavity_photon_number(params: SystemParams, delta=None):
    """Mean intracavity photon number of the control field.

    ``n = (P_in / hbar omega_L) * eta_c kappa / ((kappa/2)^2 + delta^2)``.
    ``delta`` overrides ``params.delta`` and may be an array.
    """
    d = params.delta if delta is None else np.asarray(delta, dtype=float)
    flux = params.p_in / (HBAR * params.omega_l)
    return flux * params.eta_c * params.kappa / ((params.kappa / 2) ** 2 + d**2)


def _sideband_rates(params, n_cav, delta):
    k = params.kappa
    scale = n_cav * params.g0**2 * k
    anti = scale / ((k / 2) ** 2 + (delta + params.omega_m) ** 2)
    stokes = scale / ((k / 2) ** 2 + (delta - params.omega_m) ** 2)
    return anti, stokes


def gamma_opt(params: SystemParams, n_cav, delta=None):
    """Optomechanical (dynamical backaction) damping rate.

    Difference of the anti-Stokes cooling and Stokes heating rates; odd in
    the detuning and positive on the red side.
    """
    d = params.delta if delta is None else np.asarray(delta, dtype=float)
    anti, stokes = _sideband_rates(params, n_cav, d)
    return anti - stokes


def cooperativity(params: SystemParams, n_cav):
    """Classical cooperativity ``4 g0^2 n / (kappa gamma_m)``.

    Returns ``nan`` when ``gamma_m == 0``, where the ratio is undefined.
    """
    if params.gamma_m == 0:
        return math.nan
    return 4 * params.g0**2 * n_cav / (params.kappa * params.gamma_m)


def drive_state(params: SystemParams) -> DriveState:
    """Evaluate the drive-dependent quantities at ``params.delta``."""
    n = float(cavity_photon_number(params))
    anti, stokes = _sideband_rates(params, n, params.delta)
    g_opt = anti - stokes
    return DriveState(
        n_cav=n,
        g=params.g0 * math.sqrt(n),
        gamma_opt=g_opt,
        gamma_eff=params.gamma_m + g_opt,
        cooperativity=cooperativity(params, n),
        gamma_anti_stokes=anti,
        gamma_stokes=stokes,
    )


def thermal_occupancy(bath_temperature: float, omega_m: float, bose: bool = False) -> float:
    x = HBAR * omega_m / (BOLTZMANN * bath_temperature)
    if bose:
        return 1.0 / math.expm1(x)
    return 1.0 / x


def coherence_time(bath_temperature: float, omega_m: float, q: float, bose: bool = False) -> float:
    """Heating-limited coherence time ``1 / (gamma_m n_th)`` in seconds.

    Uses the high-temperature occupancy ``kB T / (hbar omega_m)`` unless
    ``bose`` is set, in which case the Bose-Einstein factor is used.
    """
    if bath_temperature <= 0:
        raise ValueError("bath_temperature must be positive")
    gamma_m = omega_m / q
    return 1.0 / (gamma_m * thermal_occupancy(bath_temperature, omega_m, bose))
