"""Scenario orchestration from forward models to fitted summaries.

Everything is computed in memory first and written in one
all-or-nothing step, so a failing run leaves no partial outputs.
"""

from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..core import TWO_PI, SystemParams, drive_state
from ..estimation import (
    Dataset,
    fit_cavity,
    fit_eff_bandwidth,
    fit_eff_detuning,
    fit_g0,
    fit_input_power,
    fit_ringdown,
    fit_T1,
)
from ..memory import (
    ProtocolTimeline,
    SignalPulse,
    closed_form_efficiency,
    efficiency,
    retrieved_amplitude,
    simulate_protocol,
)
from ..response import dba_sweep, omit_spectrum, transmission_power
from . import io
from .config import ConfigError, grid_values, system_params, validate
from .rng import add_noise

DEFAULT_T_DELAY = 4.4e-3
MIRROR_T_IN = 280e-6
MIRROR_T_OUT = 10e-6


def _clean(record: dict) -> dict:
    """JSON-safe flat record: numpy scalars unwrapped, non-finite floats as text."""
    out = {}
    for key, value in record.items():
        if isinstance(value, (np.integer,)):
            value = int(value)
        elif isinstance(value, (float, np.floating)):
            value = float(value)
            if not math.isfinite(value):
                value = repr(value)
        out[key] = value
    return out


class Storage:
    """Pulse and timeline for one storage run, resolved from a config."""

    def __init__(self, params: SystemParams, config: dict, *, t_delay=None, ratio=None,
                 detuning=None):
        self.params = params
        self.drive = drive_state(params)
        pcfg = config.get("pulse", {})
        tcfg = config.get("timeline", {})
        geff = self.drive.gamma_eff
        g_read = TWO_PI * tcfg["gamma_eff_read_hz"] if "gamma_eff_read_hz" in tcfg else geff
        if ratio is not None:
            gsig = ratio * geff
        elif "gamma_sig_hz" in pcfg:
            gsig = TWO_PI * pcfg["gamma_sig_hz"]
        else:
            gsig = pcfg.get("gamma_sig_ratio", 1.0) * geff
        delta = detuning if detuning is not None else TWO_PI * pcfg.get("detuning_hz", 0.0)
        self.pulse = SignalPulse(beta=pcfg.get("beta", 0.05), s0=pcfg.get("s0", 1.0),
                                 gamma_sig=gsig, omega_sig=params.omega_m + delta,
                                 t_write=pcfg.get("t_write_s", 20 / gsig), delta=delta)
        fastest = max(geff, g_read, gsig)
        self.timeline = ProtocolTimeline(
            t_delay=t_delay if t_delay is not None else tcfg.get("t_delay_s", DEFAULT_T_DELAY),
            t_read=tcfg.get("t_read_s", 20 / g_read),
            sample_dt=tcfg.get("sample_dt_s", 0.02 / fastest),
            gamma_eff_read=g_read,
        )

    def run(self, oracle=False):
        return simulate_protocol(self.params, self.drive, self.pulse, self.timeline, oracle=oracle)

    def closed_form(self):
        s = self.timeline
        return closed_form_efficiency(self.pulse.gamma_sig, self.drive.gamma_eff,
                                      self.pulse.delta, s.t_delay, self.params.t1,
                                      self.params.eta_c, self.drive.gamma_opt)


def _noise_args(config: dict, seed):
    noise = config.get("noise", {})
    amplitude = noise.get("amplitude", 0.0)
    seed = seed if seed is not None else noise.get("seed")
    if amplitude > 0 and seed is None:
        raise ConfigError("noise.seed", "a seed is required when noise amplitude > 0")
    return amplitude, noise.get("mode", "multiplicative"), seed


def _omit_x(params, config):
    x = TWO_PI * grid_values(config["grid"])
    if config["grid"].get("relative_to_omega_m"):
        x = x + params.omega_m
    return x


def forward_model(kind: str, params: SystemParams, config: dict) -> Dataset:
    """Noiseless samples of dataset ``kind`` on the config grid (internal units)."""
    grid = grid_values(config["grid"])
    if kind in ("omit_broad", "omit_narrow"):
        x = _omit_x(params, config)
        y = omit_spectrum(params, x, kind.split("_")[1]).power
    elif kind == "transmission":
        x = TWO_PI * grid
        fit = config.get("fit", {})
        y = transmission_power(params, fit.get("mirror_t_in", MIRROR_T_IN),
                               fit.get("mirror_t_out", MIRROR_T_OUT), x)
    elif kind == "dba":
        x, y = dba_sweep(params, TWO_PI * grid)
    elif kind == "ringdown":
        x = grid
        y = np.exp(-params.gamma_m * x / 2)
    elif kind == "decay_T1":
        x = grid
        y = np.array([retrieved_amplitude(Storage(params, config, t_delay=t).run())
                      for t in x])
    elif kind == "eff_bandwidth":
        geff = drive_state(params).gamma_eff
        x = grid * geff
        y = np.array([efficiency(Storage(params, config, ratio=r).run(), params).eta
                      for r in grid])
    elif kind == "eff_detuning":
        geff = drive_state(params).gamma_eff
        x = grid * geff
        y = np.array([efficiency(Storage(params, config, detuning=d).run(), params).eta
                      for d in x])
    else:
        raise ConfigError("synth.kind", f"unknown dataset kind {kind!r}")
    return Dataset(kind, np.asarray(x, float), np.asarray(y, float))


def _noisy(data: Dataset, config: dict, seed) -> Dataset:
    amplitude, mode, seed = _noise_args(config, seed)
    return replace(data, y=add_noise(data.y, amplitude, seed, mode))


def fit_dataset(data: Dataset, params: SystemParams, config: dict):
    """Run the fit appropriate to ``data.kind``; returns a FitResult."""
    fcfg = config.get("fit", {})
    kind = data.kind
    if kind == "omit_broad":
        return fit_cavity(data, params.eta_c)
    if kind == "transmission":
        return fit_input_power(data, params, fcfg.get("mirror_t_in", MIRROR_T_IN),
                               fcfg.get("mirror_t_out", MIRROR_T_OUT))
    if kind == "dba":
        gamma_m = TWO_PI * fcfg["gamma_m_hz"] if "gamma_m_hz" in fcfg else params.gamma_m
        return fit_g0(data, params, gamma_m)
    if kind == "ringdown":
        return fit_ringdown(data, params.omega_m)
    if kind == "decay_T1":
        return fit_T1(data, fcfg.get("noise_floor", 0.0))
    if kind == "eff_bandwidth":
        return fit_eff_bandwidth(data, drive_state(params).gamma_eff)
    if kind == "eff_detuning":
        t_delay = config.get("timeline", {}).get("t_delay_s", DEFAULT_T_DELAY)
        return fit_eff_detuning(data, bound=params.eta_c**2 * math.exp(-t_delay / params.t1))
    return None


SCAN_KINDS = {
    "dba_sweep": "dba",
    "t1_scan": "decay_T1",
    "bandwidth_scan": "eff_bandwidth",
    "detuning_scan": "eff_detuning",
}


def _storage_outputs(params, config, stem):
    run = Storage(params, config)
    trace = run.run(oracle=True)
    eff = efficiency(trace, params)
    dev = np.max(np.abs(trace.oracle.b - trace.b)) / np.max(np.abs(trace.b))
    d = run.drive
    summary = {
        "eta": eff.eta,
        "eta_int": eff.eta_int,
        "eta_detected": eff.eta_detected,
        "eta_raw": eff.eta_raw,
        "truncation": eff.truncation,
        "eta_closed_form": run.closed_form(),
        "retrieved_amplitude": retrieved_amplitude(trace),
        "oracle_max_rel_dev": dev,
        "gamma_eff_hz": d.gamma_eff / TWO_PI,
        "gamma_opt_hz": d.gamma_opt / TWO_PI,
        "gamma_sig_hz": run.pulse.gamma_sig / TWO_PI,
        "cooperativity": d.cooperativity,
        "n_cav": d.n_cav,
        "t_delay_s": run.timeline.t_delay,
        "t_read_s": run.timeline.t_read,
        "t_write_s": run.pulse.t_write,
        "sample_dt_s": run.timeline.sample_dt,
    }
    return {f"{stem}_trace.csv": io.trace_csv(trace)}, summary


def build_outputs(config: dict, seed: int | None = None) -> dict[str, str]:
    """All output files of one scenario, as ``{file name: text}``."""
    validate(config)
    kind = config["scenario"]
    stem = config.get("name", kind)
    params = system_params(config)
    files: dict[str, str] = {}
    summary: dict = {"scenario": kind, "name": stem}
    amplitude, mode, used_seed = _noise_args(config, seed)
    summary.update(noise_amplitude=amplitude, noise_mode=mode)
    if used_seed is not None:
        summary["seed"] = used_seed
    data = fit = None
    if kind == "storage":
        files, extra = _storage_outputs(params, config, stem)
        summary.update(extra)
    elif kind == "omit_sweep":
        sweep = config.get("sweep", "broad")
        x = _omit_x(params, config)
        files[f"{stem}_spectrum.csv"] = io.spectrum_csv(omit_spectrum(params, x, sweep))
        data = _noisy(forward_model(f"omit_{sweep}", params, config), config, seed)
        if sweep == "broad":
            fit = fit_dataset(data, params, config)
        i = int(np.argmin(data.y))
        summary.update(min_abs2=data.y[i], freq_at_min_hz=data.x[i] / TWO_PI)
    elif kind in SCAN_KINDS:
        data = _noisy(forward_model(SCAN_KINDS[kind], params, config), config, seed)
        fit = fit_dataset(data, params, config)
    elif kind == "synth":
        data = _noisy(forward_model(config["synth"]["kind"], params, config), config, seed)
    elif kind == "fit":
        fcfg = config["fit"]
        try:
            data = io.read_dataset(Path(fcfg["dataset"]), fcfg.get("kind"))
        except (OSError, ValueError) as exc:
            raise ConfigError("fit.dataset", str(exc)) from exc
        fit = fit_dataset(data, params, config)
    if data is not None:
        summary.update(dataset_kind=data.kind, n_points=len(data))
        if kind != "fit":
            files[f"{stem}_{data.kind}.csv"] = io.dataset_csv(data)
    if fit is not None:
        summary.update({f"fit.{k}": v for k, v in fit.to_record().items()})
    summary.update({f"system.{k}": v for k, v in io.params_record(params).items()})
    files[f"{stem}_summary.json"] = io.json_text(_clean(summary))
    return files


def run_scenario(config: dict, out_dir, seed: int | None = None) -> list[Path]:
    """Compute a scenario and write its files into ``out_dir``."""
    files = build_outputs(config, seed)
    return io.write_outputs(Path(out_dir), files)


def generate_synthetic(config: dict, out_dir, seed: int | None = None) -> list[Path]:
    """Seeded synthetic dataset for ``config['synth']['kind']`` on the config grid."""
    config = {**config, "scenario": "synth"}
    if "noise" not in config:
        raise ConfigError("noise", "synthetic data needs a noise block")
    if config.get("grid", {}).get("count", 0) == 0:
        raise ConfigError("grid.count", "grid has no points")
    return run_scenario(config, out_dir, seed)
