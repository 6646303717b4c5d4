"""Least-squares estimation of calibration and efficiency parameters.

Every fit returns a :class:`FitResult`. Models that are linear in their
single free parameter are solved through the normal equation; the rest go
through :func:`least_squares`, a damped Gauss-Newton (Levenberg-Marquardt)
iteration.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import TWO_PI, SystemParams, cavity_photon_number, gamma_opt
from .response import transmission_power

__all__ = [
    "DATASET_KINDS",
    "Dataset",
    "FitResult",
    "fit_T1",
    "fit_cavity",
    "fit_eff_bandwidth",
    "fit_eff_detuning",
    "fit_g0",
    "fit_input_power",
    "fit_ringdown",
    "least_squares",
    "monte_carlo",
]

# abscissa/ordinate units per dataset kind, in internal (angular) units
DATASET_KINDS = {
    "omit_broad": ("rad/s", ""),
    "omit_narrow": ("rad/s", ""),
    "transmission": ("rad/s", "W"),
    "dba": ("rad/s", "rad/s"),
    "ringdown": ("s", ""),
    "decay_T1": ("s", ""),
    "eff_bandwidth": ("rad/s", ""),
    "eff_detuning": ("rad/s", ""),
}


@dataclass(frozen=True)
class Dataset:
    """Measured or synthetic samples of one kind, in internal units.

    ``target`` applies to OMIT sweeps: ``"abs2"`` when the ordinate is the
    reflected power ``|r|^2``, ``"abs"`` for the magnitude ``|r|``.
    """

    kind: str
    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray | None = None
    target: str = "abs2"

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset values must be finite")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != x.shape or np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("weights must be finite, non-negative and match x")
            object.__setattr__(self, "weights", w)
        if self.target not in ("abs", "abs2"):
            raise ValueError("target must be 'abs' or 'abs2'")

    def __len__(self):
        return len(self.x)

    @property
    def w(self) -> np.ndarray:
        return np.ones_like(self.y) if self.weights is None else self.weights


@dataclass
class FitResult:
    """Outcome of a fit.

    ``stderr`` is None when the Jacobian is rank deficient. ``units`` maps
    parameter names to their internal unit; :meth:`to_record` converts
    angular rates to Hz for output.
    """

    names: tuple[str, ...]
    values: np.ndarray
    stderr: np.ndarray | None
    rss: float
    n_iter: int
    converged: bool
    message: str = ""
    units: dict[str, str] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)
    cost_history: list[float] = field(default_factory=list)
    extra: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def error(self, name: str) -> float:
        if self.stderr is None:
            return math.nan
        return float(self.stderr[self.names.index(name)])

    def to_record(self) -> dict:
        """Flat key-value record; rad/s quantities are reported in Hz."""
        rec = {}
        items = [(n, self[n], self.error(n)) for n in self.names]
        items += [(k, v, None) for k, v in self.extra.items()]
        for name, value, err in items:
            unit = self.units.get(name, "")
            key, scale = name, 1.0
            if unit == "rad/s":
                key, scale = f"{name}_hz", 1 / TWO_PI
            elif unit:
                key = f"{name}_{unit.lower().replace('/', '_per_')}"
            rec[key] = _num(value * scale)
            if err is not None:
                rec[f"{key}_stderr"] = _num(err * scale)
        rec.update(rss=_num(self.rss), n_iter=self.n_iter, converged=self.converged)
        if self.flags:
            rec["flags"] = ";".join(self.flags)
        if self.message:
            rec["message"] = self.message
        return rec


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else repr(x)


def _jacobian(fun, p, f0, lower, upper, typical):
    jac = np.empty((f0.size, p.size))
    for j in range(p.size):
        h = 1e-7 * max(abs(p[j]), typical[j])
        if p[j] + h > upper[j]:
            h = -h
        q = p.copy()
        q[j] += h
        jac[:, j] = (fun(q) - f0) / (q[j] - p[j])
    return jac


def least_squares(model, data: Dataset, init, bounds=None, names=None, *,
                  max_iter: int = 200, ftol: float = 1e-10, gtol: float = 1e-8,
                  typical=None, units=None) -> FitResult:
    """Minimize ``sum(w (model(p) - y)^2)`` by Levenberg-Marquardt.

    Damping starts at 1e-3 and is divided / multiplied by 10 after each
    accepted / rejected step, scaled by the diagonal of ``J^T J``. Steps
    are projected into ``bounds``. Stops when an accepted step lowers the
    cost by a relative amount below ``ftol`` (actual and predicted), when
    the scaled gradient falls below ``gtol``, or when the residual reaches
    the floating-point floor.

    ``typical`` gives each parameter's magnitude for finite-difference
    steps when its value is near zero; defaults to ``|init|``.
    """
    p = np.array(init, dtype=float)
    typical = np.abs(p) if typical is None else np.abs(np.asarray(typical, dtype=float))
    typical = np.where(typical > 0, typical, 1e-8)
    names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(p.size))
    lower, upper = (np.full(p.size, -np.inf), np.full(p.size, np.inf)) if bounds is None \
        else (np.asarray(bounds[0], float), np.asarray(bounds[1], float))
    if np.any(p < lower) or np.any(p > upper):
        raise ValueError("initial parameters lie outside the bounds")
    sw = np.sqrt(data.w)

    def residual(q):
        return sw * (np.asarray(model(q), dtype=float) - data.y)

    r = residual(p)
    if not np.all(np.isfinite(r)):
        raise ValueError("model is not finite at the initial parameters")
    cost = 0.5 * float(r @ r)
    ynorm = float(np.linalg.norm(sw * data.y))
    floor = 0.5 * (np.finfo(float).eps * ynorm) ** 2
    history = [cost]
    lam = 1e-3
    converged, message = False, "maximum iterations reached"
    jac = _jacobian(residual, p, r, lower, upper, typical)
    for _ in range(max_iter):
        grad = jac.T @ r
        col = np.linalg.norm(jac, axis=0)
        rnorm = math.sqrt(2 * cost)
        if cost <= floor:
            converged, message = True, "residual at floating-point floor"
            break
        if rnorm <= ftol * ynorm:
            converged, message = True, "residual negligible relative to data"
            break
        if np.max(np.abs(grad) / np.where(col > 0, col, 1.0)) <= gtol * rnorm:
            converged, message = True, "gradient tolerance satisfied"
            break
        jtj = jac.T @ jac
        diag = np.maximum(np.diag(jtj), 1e-300)
        accepted = False
        while lam < 1e20:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = np.clip(p + step, lower, upper)
            r_trial = residual(trial)
            c_trial = 0.5 * float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else np.inf
            if c_trial < cost:
                actual = (cost - c_trial) / cost
                lin = r + jac @ (trial - p)
                predicted = (cost - 0.5 * float(lin @ lin)) / cost
                p, r, cost = trial, r_trial, c_trial
                history.append(cost)
                lam = max(lam / 10, 1e-15)
                accepted = True
                break
            lam *= 10
        if not accepted:
            converged = cost <= 1e3 * floor
            message = "damping overflow; no further decrease possible"
            break
        if actual < ftol and abs(predicted) < ftol:
            converged, message = True, "relative cost decrease below tolerance"
            break
        jac = _jacobian(residual, p, r, lower, upper, typical)
    n_iter = len(history) - 1
    jac = _jacobian(residual, p, r, lower, upper, typical)
    stderr, singular = _stderr(jac, 2 * cost, len(data) - p.size)
    if singular:
        message += "; singular Jacobian"
    return FitResult(names=names, values=p, stderr=stderr, rss=2 * cost, n_iter=n_iter,
                     converged=converged, message=message, units=dict(units or {}),
                     cost_history=history)


def _stderr(jac, rss, dof):
    # rank on unit-norm columns; the tolerance absorbs finite-difference noise
    col = np.linalg.norm(jac, axis=0)
    if np.any(col == 0):
        return None, True
    if np.linalg.matrix_rank(jac / col, tol=1e-6) < jac.shape[1]:
        return None, True
    cov = np.linalg.inv(jac.T @ jac)
    s2 = rss / dof if dof > 0 else 0.0
    return np.sqrt(np.maximum(np.diag(cov), 0) * s2), False


def _linear_scale(basis, data: Dataset, name, unit=""):
    """Closed-form fit of ``y = a * basis``."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    w = data.w
    norm = float(np.sum(w * basis**2))
    if norm == 0:
        raise ValueError("model basis vanishes on the dataset")
    a = float(np.sum(w * basis * data.y)) / norm
    res = data.y - a * basis
    rss = float(np.sum(w * res**2))
    dof = len(data) - 1
    err = math.sqrt(rss / dof / norm) if dof > 0 else math.nan
    return FitResult(names=(name,), values=np.array([a]), stderr=np.array([err]), rss=rss,
                     n_iter=0, converged=True, message="closed-form solution",
                     units={name: unit})


def _half_width(x, y, i_ext, level):
    """Distance between the crossings of ``level`` on either side of ``i_ext``."""
    above = (y - level) * np.sign(y[i_ext] - level) > 0
    lo = i_ext
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = i_ext
    while hi < len(y) - 1 and above[hi + 1]:
        hi += 1
    return x[hi] - x[lo] if hi > lo else abs(x[1] - x[0])


def bare_reflection(omega_mod, delta, kappa, eta_c):
    """Same expression as :func:`optomem.response.bare_cavity_response`, unpacked."""
    return 1.0 - eta_c * kappa / (kappa / 2 - 1j * (delta + np.asarray(omega_mod)))


def fit_cavity(data: Dataset, eta_c: float = 0.63, init=None) -> FitResult:
    """Extract the control detuning and cavity linewidth from a broad sweep.

    Model: ``amplitude * |r_bare(omega)|^p + offset`` with ``p`` = 2 or 1
    per ``data.target``; ``eta_c`` is held fixed.
    """
    x, y = data.x, data.y
    power = 2 if data.target == "abs2" else 1

    def model(q):
        delta, kappa, amp, off = q
        return amp * np.abs(bare_reflection(x, delta, kappa, eta_c)) ** power + off

    flags = []
    if init is None:
        i_min = int(np.argmin(y))
        top, bottom = float(np.max(y)), float(np.min(y))
        depth = 1 - abs(1 - 2 * eta_c) ** power
        amp = (top - bottom) / depth if depth > 0 else top - bottom
        width = _half_width(x, y, i_min, (top + bottom) / 2)
        init = (-x[i_min], max(width, 1e-12), amp, top - amp)
    kappa_guess = init[1]
    if np.ptp(x) < 2 * kappa_guess:
        flags.append("under-constrained: sweep span below 2 kappa")
        warnings.warn("sweep span is below 2 kappa; linewidth is poorly constrained", stacklevel=2)
    res = least_squares(model, data, init, bounds=([-np.inf, 0, -np.inf, -np.inf], [np.inf] * 4),
                        names=("delta", "kappa", "amplitude", "offset"),
                        typical=(init[1], init[1], init[2], init[2]),
                        units={"delta": "rad/s", "kappa": "rad/s"})
    res.flags.extend(flags)
    return res


def fit_input_power(data: Dataset, params: SystemParams, mirror_t_in: float = 280e-6,
                    mirror_t_out: float = 10e-6) -> FitResult:
    """Input power from transmitted power versus detuning with kappa and mirrors fixed."""
    if len(data) == 0:
        raise ValueError("empty dataset")
    basis = transmission_power(replace(params, p_in=1.0), mirror_t_in, mirror_t_out, data.x)
    return _linear_scale(np.asarray(basis), data, "p_in", "W")


def fit_g0(data: Dataset, params: SystemParams, gamma_m: float = 0.0) -> FitResult:
    """Vacuum coupling rate from effective linewidths across detuning.

    The backaction model is linear in ``g0^2``; ``gamma_m`` is held fixed
    (zero by default). A non-positive ``g0^2`` estimate is a fit failure.
    """
    unit = replace(params, g0=1.0)
    n = cavity_photon_number(unit, data.x)
    basis = np.asarray(gamma_opt(unit, n, data.x))
    shifted = replace(data, y=data.y - gamma_m)
    sq = _linear_scale(basis, shifted, "g0_squared")
    g0_sq, g0_sq_err = sq.values[0], sq.stderr[0]
    if not g0_sq > 0:
        return FitResult(names=("g0",), values=np.array([math.nan]), stderr=None, rss=sq.rss,
                         n_iter=0, converged=False,
                         message=f"non-positive g0^2 estimate ({g0_sq:.3g})",
                         units={"g0": "rad/s"})
    g0 = math.sqrt(g0_sq)
    return FitResult(names=("g0",), values=np.array([g0]), stderr=np.array([g0_sq_err / (2 * g0)]),
                     rss=sq.rss, n_iter=0, converged=True, message=sq.message,
                     units={"g0": "rad/s"})


def _log_linear(t, a):
    """Weighted line through ``log(a)`` versus ``t``: returns slope, intercept, errors."""
    y = np.log(a)
    design = np.column_stack([t, np.ones_like(t)])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    res = y - design @ coef
    dof = len(t) - 2
    cov = np.linalg.inv(design.T @ design) * (float(res @ res) / dof if dof > 0 else 0.0)
    return coef[0], coef[1], np.sqrt(np.diag(cov)), float(res @ res)


def fit_ringdown(data: Dataset, omega_m: float) -> FitResult:
    """Quality factor from an amplitude ringdown ``A0 exp(-gamma_m t / 2)``.

    A flat record gives ``gamma_m = 0`` and ``q = inf``.
    """
    if np.any(data.y <= 0):
        raise ValueError("ringdown amplitudes must be positive")
    if len(data) < 2:
        raise ValueError("need at least two samples")
    slope, icpt, err, rss = _log_linear(data.x, data.y)
    gamma_m = -2 * slope
    if abs(gamma_m) * np.ptp(data.x) < 1e-12:
        gamma_m = 0.0
    q = omega_m / gamma_m if gamma_m > 0 else math.inf
    q_err = q * 2 * err[0] / gamma_m if gamma_m > 0 else math.nan
    tau = 2 / gamma_m if gamma_m > 0 else math.inf
    return FitResult(
        names=("q", "gamma_m", "amplitude"),
        values=np.array([q, gamma_m, math.exp(icpt)]),
        stderr=np.array([q_err, 2 * err[0], math.exp(icpt) * err[1]]),
        rss=rss, n_iter=0, converged=True,
        message="log-linear regression" + ("" if gamma_m > 0 else "; no decay, q infinite"),
        units={"gamma_m": "rad/s", "tau_amplitude": "s", "t_energy": "s"},
        extra={"tau_amplitude": tau, "t_energy": tau / 2},
    )


def fit_T1(data: Dataset, noise_floor: float = 0.0, floor_factor: float = 3.0) -> FitResult:
    """Dark-storage lifetime from retrieved amplitude versus delay.

    Fits ``A exp(-t / (2 T1))``. Points at or below ``floor_factor *
    noise_floor`` are excluded; their indices are listed in ``flags``.
    """
    keep = data.y > floor_factor * noise_floor
    keep &= data.y > 0
    dropped = np.flatnonzero(~keep)
    if keep.sum() < 2:
        raise ValueError("fewer than two points above the noise floor")
    slope, icpt, err, rss = _log_linear(data.x[keep], data.y[keep])
    t1 = -1 / (2 * slope) if slope < 0 else math.inf
    t1_err = t1 * err[0] / abs(slope) if slope < 0 else math.nan
    flags = [f"excluded below floor: {','.join(map(str, dropped))}"] if dropped.size else []
    return FitResult(names=("t1", "amplitude"), values=np.array([t1, math.exp(icpt)]),
                     stderr=np.array([t1_err, math.exp(icpt) * err[1]]), rss=rss, n_iter=0,
                     converged=True, message="log-linear regression",
                     units={"t1": "s"}, flags=flags,
                     extra={"n_excluded": float(dropped.size)})


def eta_bandwidth(gamma_sig, gamma_eff):
    """Internal efficiency of bandwidth matching, ``4 gs ge / (gs + ge)^2``."""
    gamma_sig = np.asarray(gamma_sig, dtype=float)
    return 4 * gamma_sig * gamma_eff / (gamma_sig + gamma_eff) ** 2


def fit_eff_bandwidth(data: Dataset, gamma_eff: float) -> FitResult:
    """One multiplicative constant on the bandwidth-matching law."""
    return _linear_scale(eta_bandwidth(data.x, gamma_eff), data, "scale")


def lorentzian(delta, center, width, peak):
    return peak * width**2 / ((np.asarray(delta) - center) ** 2 + width**2)


def fit_eff_detuning(data: Dataset, init=None, bound: float | None = None) -> FitResult:
    """Lorentzian in two-photon detuning: ``peak w^2 / ((d - c)^2 + w^2)``.

    ``bound``, when given (e.g. ``eta_c^2 exp(-T_delay/T1)``), is reported
    alongside the fitted peak as ``peak_over_bound``.
    """
    x, y = data.x, data.y
    if init is None:
        i = int(np.argmax(y))
        peak = float(y[i])
        width = _half_width(x, y, i, peak / 2) / 2
        init = (x[i], max(width, 1e-12 * max(1.0, np.ptp(x))), peak)
    res = least_squares(lambda q: lorentzian(x, *q), data, init,
                        bounds=([-np.inf, 0, -np.inf], [np.inf] * 3),
                        names=("center", "width", "peak"),
                        typical=(init[1], init[1], init[2]),
                        units={"center": "rad/s", "width": "rad/s"})
    if bound is not None:
        res.extra["bound"] = bound
        res.extra["peak_over_bound"] = res["peak"] / bound
    return res


def monte_carlo(trial, n_trials: int, master_seed: int, workers: int = 1) -> list:
    """Run ``trial(rng, index)`` with per-trial generators spawned from one seed.

    Results come back in trial order regardless of ``workers``.
    """
    children = np.random.SeedSequence(master_seed).spawn(n_trials)
    rngs = [np.random.Generator(np.random.PCG64(c)) for c in children]
    if workers <= 1:
        return [trial(rng, i) for i, rng in enumerate(rngs)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(trial, rngs, range(n_trials)))
