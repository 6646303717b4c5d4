"""Time-domain write / store / read protocol of the optomechanical memory.

Envelopes live in the frame rotating at the signal frequency, so the
mechanical amplitude obeys

    db/dt = -(gamma_eff/2 - i delta) b + sqrt(eta_c gamma_opt) s_in(t)
    s_out = s_in - i sqrt(eta_c gamma_opt) b

with piecewise-constant rates: the control is on during write and read,
and off during the delay, where the amplitude decays at ``1/(2 t1)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import simpson
from scipy.signal import filtfilt, lfilter

from .core import DriveState, SystemParams, drive_state, squeeze

__all__ = [
    "Efficiency",
    "ProtocolTimeline",
    "ProtocolTrace",
    "Segment",
    "SignalPulse",
    "TruncationWarning",
    "carrier_readout",
    "closed_form_efficiency",
    "efficiency",
    "evolve_delay",
    "evolve_read",
    "evolve_write",
    "lockin_demodulate",
    "make_signal",
    "ode_oracle",
    "retrieved_amplitude",
    "simulate_protocol",
    "truncation_factor",
]

SEGMENTS = ("write", "delay", "read")


class TruncationWarning(UserWarning):
    """A finite window cuts off a non-negligible part of a pulse."""


@dataclass(frozen=True)
class SignalPulse:
    """Exponentially rising write signal, ending at ``t = 0``.

    ``delta`` is the two-photon detuning ``omega_sig - omega_m``.
    """

    beta: float
    s0: float
    gamma_sig: float
    omega_sig: float
    t_write: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.gamma_sig > 0:
            raise ValueError("gamma_sig must be positive")
        if self.t_write < 0:
            raise ValueError("t_write must be non-negative")
        if self.beta >= 0.2:
            warnings.warn(f"modulation depth beta = {self.beta} is not small", stacklevel=3)
        if self.t_write < 5 / self.gamma_sig:
            warnings.warn(
                f"write window {self.t_write:.3g} s is shorter than 5/gamma_sig; "
                f"input energy truncated by {math.exp(-self.gamma_sig * self.t_write):.2%}",
                TruncationWarning,
                stacklevel=3,
            )

    @property
    def amplitude(self) -> float:
        """Co-rotating envelope amplitude ``beta s0 / 2`` at ``t = 0-``."""
        return self.beta * self.s0 / 2

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t <= 0) & (t >= -self.t_write)
        env = np.where(inside, self.amplitude * np.exp(self.gamma_sig * np.minimum(t, 0) / 2), 0.0)
        return env.astype(complex)

    @property
    def energy(self) -> float:
        """Time-integrated ``|s_in|^2`` over the write window."""
        return self.amplitude**2 / self.gamma_sig * -math.expm1(-self.gamma_sig * self.t_write)


def make_signal(beta, s0, gamma_sig, omega_sig, t_write, *, omega_m=None) -> SignalPulse:
    """Build a write pulse; without ``omega_m`` the signal is taken as resonant."""
    delta = 0.0 if omega_m is None else omega_sig - omega_m
    return SignalPulse(beta=beta, s0=s0, gamma_sig=gamma_sig, omega_sig=omega_sig,
                       t_write=t_write, delta=delta)


@dataclass(frozen=True)
class Segment:
    name: str
    t: np.ndarray
    s_in: np.ndarray
    b: np.ndarray
    s_out: np.ndarray


def _grid(t0: float, duration: float, dt: float) -> np.ndarray:
    if duration == 0:
        return np.array([t0])
    n = max(1, math.ceil(duration / dt - 1e-9))
    return np.linspace(t0, t0 + duration, n + 1)


def evolve_write(pulse: SignalPulse, gamma_eff: float, gamma_opt: float, eta_c: float, t=None):
    """Mechanical amplitude driven by the write pulse.

    Exact solution of the linear equation with ``b(-t_write) = 0``. With
    ``t=None`` returns ``b(0)``; otherwise ``b`` at the given times.
    For ``t_write -> inf`` this is
    ``b(0) = sqrt(eta_c gamma_opt) (beta s0/2) / ((gamma_eff + gamma_sig)/2 - i delta)``.
    """
    if gamma_opt > gamma_eff * (1 + 1e-12):
        raise ValueError("gamma_opt cannot exceed gamma_eff")
    if gamma_opt < 0:
        raise ValueError("gamma_opt must be non-negative")
    lam = gamma_eff / 2 - 1j * pulse.delta
    half = pulse.gamma_sig / 2
    k = math.sqrt(eta_c * gamma_opt) * pulse.amplitude / (half + lam)
    tt = np.zeros(1) if t is None else np.asarray(t, dtype=float)
    if np.any(tt > 0):
        raise ValueError("write-phase times must be <= 0")
    b = k * np.exp(half * tt)
    if math.isfinite(pulse.t_write):
        start = -pulse.t_write
        b = b - k * math.exp(-half * pulse.t_write) * np.exp(-lam * (tt - start))
        b = np.where(tt >= start, b, 0.0)
    if t is None:
        return complex(b[0])
    return squeeze(b)


def evolve_delay(b_start, t_delay, t1: float, frame_delta: float = 0.0):
    """Dark storage: amplitude decays at ``1/(2 t1)`` and rotates at ``frame_delta``."""
    td = np.asarray(t_delay, dtype=float)
    if np.any(td < 0):
        raise ValueError("t_delay must be non-negative")
    if t1 == 0:
        decay = np.where(td == 0, 1.0, 0.0)
    else:
        decay = np.exp(-td / (2 * t1))
    out = b_start * decay * np.exp(1j * frame_delta * td)
    return squeeze(out)


def evolve_read(b_start, gamma_eff_read, gamma_opt_read, eta_c, t_read, sample_dt,
                frame_delta: float = 0.0, t_start: float = 0.0) -> Segment:
    """Free decay of the stored amplitude into the output field.

    Warns with the energy bias ``exp(-gamma_eff t_read)`` when the window is
    shorter than ``5/gamma_eff``.
    """
    if gamma_opt_read > gamma_eff_read * (1 + 1e-12):
        raise ValueError("gamma_opt cannot exceed gamma_eff")
    if t_read < 5 / gamma_eff_read:
        warnings.warn(
            f"read window truncates retrieved energy by {math.exp(-gamma_eff_read * t_read):.2%}",
            TruncationWarning,
            stacklevel=2,
        )
    t = _grid(t_start, t_read, sample_dt)
    b = b_start * np.exp(-(gamma_eff_read / 2 - 1j * frame_delta) * (t - t_start))
    s_out = -1j * math.sqrt(eta_c * gamma_opt_read) * b
    return Segment("read", t, np.zeros_like(b), b, s_out)


@dataclass(frozen=True)
class ProtocolTimeline:
    """Durations and rates of the three protocol phases.

    Rates left as ``None`` are taken from the drive (write and read share
    the drive power by default); ``t1`` defaults to ``params.t1`` and
    ``t_write`` to the pulse's own window.
    """

    t_delay: float
    t_read: float
    sample_dt: float
    t_write: float | None = None
    gamma_eff_write: float | None = None
    gamma_eff_read: float | None = None
    t1: float | None = None

    def __post_init__(self):
        for name in ("t_delay", "t_read", "t_write", "t1"):
            value = getattr(self, name)
            if value is not None and not value >= 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.sample_dt > 0:
            raise ValueError("sample_dt must be positive")


@dataclass(frozen=True)
class Schedule:
    """A timeline with every rate resolved to a number."""

    pulse: SignalPulse
    t_delay: float
    t_read: float
    sample_dt: float
    gamma_eff_write: float
    gamma_opt_write: float
    gamma_eff_read: float
    gamma_opt_read: float
    t1: float
    eta_c: float
    frame_delta: float

    @property
    def t_write(self) -> float:
        return self.pulse.t_write

    @property
    def max_rate(self) -> float:
        return max(self.gamma_eff_write, self.gamma_eff_read, self.pulse.gamma_sig)


def _resolve(params, drive, pulse, timeline, frame_delta) -> Schedule:
    if timeline.gamma_eff_write is None or timeline.gamma_eff_read is None:
        drive = drive if drive is not None else drive_state(params)
    g_write = timeline.gamma_eff_write if timeline.gamma_eff_write is not None else drive.gamma_eff
    g_read = timeline.gamma_eff_read if timeline.gamma_eff_read is not None else g_write
    for rate in (g_write, g_read):
        if rate < params.gamma_m:
            raise ValueError("gamma_eff below the intrinsic linewidth implies negative gamma_opt")
    if timeline.t_write is not None and timeline.t_write != pulse.t_write:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TruncationWarning)
            pulse = replace(pulse, t_write=timeline.t_write)
    if not math.isfinite(pulse.t_write):
        raise ValueError("a sampled protocol needs a finite write window")
    sched = Schedule(
        pulse=pulse,
        t_delay=timeline.t_delay,
        t_read=timeline.t_read,
        sample_dt=timeline.sample_dt,
        gamma_eff_write=g_write,
        gamma_opt_write=g_write - params.gamma_m,
        gamma_eff_read=g_read,
        gamma_opt_read=g_read - params.gamma_m,
        t1=timeline.t1 if timeline.t1 is not None else params.t1,
        eta_c=params.eta_c,
        frame_delta=pulse.delta if frame_delta is None else frame_delta,
    )
    if sched.sample_dt > 0.05 / sched.max_rate:
        raise ValueError(
            f"sample_dt = {sched.sample_dt:.3g} s does not resolve the fastest envelope rate; "
            f"need <= {0.05 / sched.max_rate:.3g} s")
    return sched


@dataclass
class ProtocolTrace:
    """Sampled envelopes over every protocol phase.

    Boundary instants appear once per adjacent segment, so ``t`` is
    non-decreasing; ``segment`` labels every sample.
    """

    t: np.ndarray
    s_in: np.ndarray
    b: np.ndarray
    s_out: np.ndarray
    segment: np.ndarray
    schedule: Schedule
    oracle: ProtocolTrace | None = field(default=None, repr=False)

    def part(self, name: str) -> Segment:
        mask = self.segment == name
        return Segment(name, self.t[mask], self.s_in[mask], self.b[mask], self.s_out[mask])

    @classmethod
    def from_segments(cls, segments, schedule) -> ProtocolTrace:
        return cls(
            t=np.concatenate([s.t for s in segments]),
            s_in=np.concatenate([s.s_in for s in segments]),
            b=np.concatenate([s.b for s in segments]),
            s_out=np.concatenate([s.s_out for s in segments]),
            segment=np.concatenate([np.full(len(s.t), s.name) for s in segments]),
            schedule=schedule,
        )


def _write_segment(sched: Schedule) -> Segment:
    pulse = sched.pulse
    t = _grid(-pulse.t_write, pulse.t_write, sched.sample_dt)
    s_in = pulse.envelope(t)
    b = evolve_write(pulse, sched.gamma_eff_write, sched.gamma_opt_write, sched.eta_c, t)
    s_out = s_in - 1j * math.sqrt(sched.eta_c * sched.gamma_opt_write) * b
    return Segment("write", t, s_in, b, s_out)


def simulate_protocol(params: SystemParams, drive: DriveState | None, pulse: SignalPulse,
                      timeline: ProtocolTimeline, *, oracle: bool = True,
                      frame_delta: float | None = None) -> ProtocolTrace:
    """Closed-form write / delay / read trace on the sample grid.

    With ``oracle`` set, the RK4 integration of the same piecewise equation
    is attached as ``trace.oracle``.
    """
    sched = _resolve(params, drive, pulse, timeline, frame_delta)
    write = _write_segment(sched)
    b0 = write.b[-1]
    t_delay = _grid(0.0, sched.t_delay, sched.sample_dt)
    b_delay = evolve_delay(b0, t_delay, sched.t1, sched.frame_delta)
    zeros = np.zeros(len(t_delay), complex)
    delay = Segment("delay", t_delay, zeros, np.atleast_1d(b_delay), zeros.copy())
    with warnings.catch_warnings():
        if sched.t_read >= 5 / sched.gamma_eff_read:
            warnings.simplefilter("ignore", TruncationWarning)
        read = evolve_read(delay.b[-1], sched.gamma_eff_read, sched.gamma_opt_read, sched.eta_c,
                           sched.t_read, sched.sample_dt, frame_delta=sched.pulse.delta,
                           t_start=sched.t_delay)
    trace = ProtocolTrace.from_segments((write, delay, read), sched)
    if oracle:
        trace.oracle = _integrate(sched, substeps=None, counter_rotating=False)
    return trace


def _rk4_linear(rate: complex, forcing, t0: float, h: float, n: int, y0: complex,
                substeps: int = 1, chunk: int = 1 << 20) -> np.ndarray:
    """Classical RK4 for ``y' = rate*y + forcing(t)``, sampled every ``substeps`` steps.

    For a linear right-hand side the four stages collapse to
    ``y[k+1] = P y[k] + F[k]``, which is evaluated as a first-order
    recursive filter. Returns ``n + 1`` samples including ``y0``.
    """
    z = rate * h
    p = 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24
    w0 = h / 6 * (1 + z + z**2 / 2 + z**3 / 4)
    wh = h / 6 * (4 + 2 * z + z**2 / 2)
    w1 = h / 6
    total = n * substeps
    out = np.empty(n + 1, complex)
    out[0] = y0
    y = complex(y0)
    for start in range(0, total, chunk):
        k = np.arange(start, min(start + chunk, total))
        tk = t0 + h * k
        if forcing is None:
            f = np.zeros(len(k), complex)
        else:
            f = w0 * forcing(tk) + wh * forcing(tk + h / 2) + w1 * forcing(tk + h)
        ys, _ = lfilter([1.0], [1.0, -p], f, zi=np.array([p * y], complex))
        picks = (k + 1) % substeps == 0
        out[(k[picks] + 1) // substeps] = ys[picks]
        y = ys[-1]
    return out


def _integrate(sched: Schedule, substeps, counter_rotating) -> ProtocolTrace:
    pulse = sched.pulse
    dt = sched.sample_dt
    fastest = max(sched.max_rate, abs(pulse.delta), abs(sched.frame_delta))
    if counter_rotating:
        fastest = max(fastest, 2 * abs(pulse.omega_sig))
    if substeps is None:
        substeps = max(1, math.ceil(dt * fastest / 0.01 - 1e-9))

    coupling_w = math.sqrt(sched.eta_c * sched.gamma_opt_write)

    def drive(t):
        # the envelope is smooth on (-t_write, 0]; stage points never leave it
        env = pulse.amplitude * np.exp(pulse.gamma_sig * t / 2)
        if counter_rotating:
            env = env - pulse.amplitude * np.exp(pulse.gamma_sig * t / 2 + 2j * pulse.omega_sig * t)
        return coupling_w * env

    segments = []
    y0 = 0j
    t_start = {"write": -pulse.t_write, "delay": 0.0, "read": sched.t_delay}
    durations = {"write": pulse.t_write, "delay": sched.t_delay, "read": sched.t_read}
    rates = {
        "write": -(sched.gamma_eff_write / 2 - 1j * pulse.delta),
        "delay": -(0.5 / sched.t1 - 1j * sched.frame_delta) if sched.t1 > 0 else None,
        "read": -(sched.gamma_eff_read / 2 - 1j * pulse.delta),
    }
    for name in SEGMENTS:
        t = _grid(t_start[name], durations[name], dt)
        n = len(t) - 1
        if n == 0:
            b = np.array([y0])
        elif rates[name] is None:
            b = np.concatenate([[y0], np.zeros(n, complex)])
        else:
            h = (t[-1] - t[0]) / (n * substeps)
            b = _rk4_linear(rates[name], drive if name == "write" else None,
                            t[0], h, n, y0, substeps)
        if name == "write":
            s_in = pulse.envelope(t)
            s_out = s_in - 1j * coupling_w * b
        elif name == "delay":
            s_in = np.zeros(len(t), complex)
            s_out = s_in.copy()
        else:
            s_in = np.zeros(len(t), complex)
            s_out = -1j * math.sqrt(sched.eta_c * sched.gamma_opt_read) * b
        segments.append(Segment(name, t, s_in, b, s_out))
        y0 = b[-1]
    return ProtocolTrace.from_segments(segments, sched)


def ode_oracle(params: SystemParams, drive: DriveState | None, pulse: SignalPulse,
               timeline: ProtocolTimeline, *, substeps: int | None = None,
               counter_rotating: bool = False, frame_delta: float | None = None) -> ProtocolTrace:
    """Fixed-step RK4 integration of the protocol, independent of the closed forms.

    ``substeps`` RK4 steps are taken per sample interval; by default enough
    to keep ``h * rate <= 0.01`` for every rate in the problem. With
    ``counter_rotating`` the discarded ``-omega_sig`` component of the
    modulation is added back to the drive.
    """
    sched = _resolve(params, drive, pulse, timeline, frame_delta)
    if substeps is not None and substeps < 1:
        raise ValueError("substeps must be >= 1")
    return _integrate(sched, substeps, counter_rotating)


def retrieved_amplitude(trace: ProtocolTrace) -> float:
    """Peak retrieved amplitude relative to the peak input amplitude."""
    a_in = np.max(np.abs(trace.part("write").s_in))
    if a_in == 0:
        raise ValueError("trace has no input signal")
    return float(np.max(np.abs(trace.part("read").s_out)) / a_in)


def closed_form_efficiency(gamma_sig, gamma_eff, delta=0.0, t_delay=0.0, t1=math.inf,
                           eta_c=1.0, gamma_opt=None):
    """Storage-and-retrieval efficiency for untruncated pulses.

    ``eta = eta_c^2 (gamma_opt/gamma_eff)^2 gamma_sig gamma_eff
    / (((gamma_sig + gamma_eff)/2)^2 + delta^2) * exp(-t_delay/t1)``;
    ``gamma_opt`` defaults to ``gamma_eff`` (intrinsic damping neglected).
    """
    gamma_sig = np.asarray(gamma_sig, dtype=float)
    gamma_eff = np.asarray(gamma_eff, dtype=float)
    if np.any(gamma_sig <= 0) or np.any(gamma_eff <= 0):
        raise ValueError("rates must be positive")
    ratio = 1.0 if gamma_opt is None else np.asarray(gamma_opt) / gamma_eff
    shape = gamma_sig * gamma_eff / (((gamma_sig + gamma_eff) / 2) ** 2 + np.asarray(delta) ** 2)
    decay = np.exp(-np.asarray(t_delay) / t1) if t1 > 0 else np.where(np.asarray(t_delay) == 0, 1.0, 0.0)
    eta = eta_c**2 * ratio**2 * shape * decay
    return squeeze(eta)


def truncation_factor(sched: Schedule) -> float:
    """Finite-window efficiency divided by its untruncated limit."""
    pulse = sched.pulse
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        infinite = replace(pulse, t_write=math.inf)
    b_fin = evolve_write(pulse, sched.gamma_eff_write, sched.gamma_opt_write, sched.eta_c)
    b_inf = evolve_write(infinite, sched.gamma_eff_write, sched.gamma_opt_write, sched.eta_c)
    if b_inf == 0:
        return 1.0
    write_in = -math.expm1(-pulse.gamma_sig * pulse.t_write)
    read_out = -math.expm1(-sched.gamma_eff_read * sched.t_read)
    return abs(b_fin / b_inf) ** 2 * read_out / write_in


@dataclass(frozen=True)
class Efficiency:
    """Efficiency budget of one protocol run.

    ``eta`` and ``eta_int`` are corrected for finite write/read windows;
    ``eta_raw`` is the uncorrected trace ratio and ``truncation`` the
    correction factor, ``eta_raw = eta * truncation``.
    """

    eta_int: float
    eta: float
    eta_detected: float
    eta_raw: float
    truncation: float
    e_in: float
    e_out: float

    def __iter__(self):
        return iter((self.eta_int, self.eta, self.eta_detected))


def efficiency(trace: ProtocolTrace, params: SystemParams) -> Efficiency:
    """Energy ratio of retrieved to input field, from the sampled envelopes."""
    write, read = trace.part("write"), trace.part("read")
    e_in = float(simpson(np.abs(write.s_in) ** 2, x=write.t))
    if e_in <= 0:
        raise ValueError("trace carries no input energy")
    e_out = float(simpson(np.abs(read.s_out) ** 2, x=read.t)) if len(read.t) > 1 else 0.0
    raw = e_out / e_in
    trunc = truncation_factor(trace.schedule)
    eta = raw / trunc
    return Efficiency(
        eta_int=eta / params.eta_c**2,
        eta=eta,
        eta_detected=eta * params.eta_det,
        eta_raw=raw,
        truncation=trunc,
        e_in=e_in,
        e_out=e_out,
    )


def carrier_readout(trace: ProtocolTrace, omega_sig: float, sample_rate: float,
                    scale: float = 1.0, phase: float = 0.0):
    """Photodetector beat during the read phase, ``scale |s_out(t)| cos(omega_sig t + phase)``.

    Returns ``(t, v)`` sampled at ``sample_rate`` (Hz).
    """
    read = trace.part("read")
    n = int(math.floor((read.t[-1] - read.t[0]) * sample_rate)) + 1
    t = read.t[0] + np.arange(n) / sample_rate
    env = np.interp(t, read.t, np.abs(read.s_out))
    return t, scale * env * np.cos(omega_sig * t + phase)


def lockin_demodulate(t, v, omega_ref: float, lp_bandwidth: float, zero_phase: bool = True):
    """Magnitude envelope of ``v`` at ``omega_ref`` via mixing and a first-order low-pass.

    The low-pass has corner ``lp_bandwidth`` (rad/s). With ``zero_phase``
    the filter runs forward and backward, cancelling its lag on a decaying
    envelope; otherwise it is causal, starting from rest.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    dt = t[1] - t[0]
    if 1.0 / dt < 10 * omega_ref / (2 * math.pi):
        raise ValueError("sample rate must be at least 10x the reference frequency")
    if lp_bandwidth >= omega_ref:
        raise ValueError("lp_bandwidth must be well below omega_ref")
    mixed = v * np.exp(-1j * omega_ref * t)
    pole = math.exp(-lp_bandwidth * dt)
    b, a = [1 - pole], [1.0, -pole]
    if zero_phase:
        base = filtfilt(b, a, mixed)
    else:
        base = lfilter(b, a, mixed)
    return 2 * np.abs(base)
