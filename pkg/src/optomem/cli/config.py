"""Scenario configuration schema and figure presets.

A config is a JSON object. Units are external: Hz for frequencies and
rates, W, m, s. Grid values depend on the scenario kind:

=================  =============================================
omit_sweep         probe offset in Hz (``relative_to_omega_m``)
dba_sweep          control detuning in Hz
storage            (no grid)
t1_scan            storage delay in s
bandwidth_scan     gamma_sig / gamma_eff
detuning_scan      two-photon detuning / gamma_eff
synth              as the matching scan for ``synth.kind``
=================  =============================================
"""

from __future__ import annotations

import copy

import jsonschema
import numpy as np

from ..core import SystemParams
from ..estimation import DATASET_KINDS

SCENARIOS = ("omit_sweep", "dba_sweep", "storage", "t1_scan", "bandwidth_scan",
             "detuning_scan", "fit", "synth")
SWEEPS = ("omit_sweep", "dba_sweep", "t1_scan", "bandwidth_scan", "detuning_scan")

# control power giving cooperativity 4e4 at delta = -omega_m with the other defaults
DEVICE_SYSTEM = {
    "omega_m_hz": 2.4e6,
    "q": 1e8,
    "kappa_hz": 2.1e6,
    "eta_c": 0.63,
    "g0_hz": 1.0,
    "delta_hz": -2.4e6,
    "p_in_w": 2.105e-3,
    "lambda_m": 1550e-9,
    "t1_s": 0.023,
    "eta_loss": 0.60,
    "eta_qe": 0.83,
}

DEFAULT_SEED = 2024

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_frac = {"type": "number", "exclusiveMinimum": 0, "maximum": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "omega_m_hz": _pos, "q": _pos, "gamma_m_hz": _nonneg, "kappa_hz": _pos,
                "eta_c": _frac, "g0_hz": _nonneg, "delta_hz": _num, "p_in_w": _nonneg,
                "lambda_m": _pos, "t1_s": _nonneg, "eta_loss": _frac, "eta_qe": _frac,
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["start", "stop", "count"],
            "properties": {
                "start": _num, "stop": _num,
                "count": {"type": "integer", "minimum": 0},
                "spacing": {"enum": ["linear", "log"]},
                "relative_to_omega_m": {"type": "boolean"},
            },
        },
        "sweep": {"enum": ["broad", "narrow"]},
        "pulse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "beta": _nonneg, "s0": _nonneg, "gamma_sig_hz": _pos, "gamma_sig_ratio": _pos,
                "detuning_hz": _num, "t_write_s": _pos,
            },
        },
        "timeline": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_delay_s": _nonneg, "t_read_s": _pos, "sample_dt_s": _pos,
                "gamma_eff_read_hz": _pos,
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "amplitude": _nonneg,
                "mode": {"enum": ["multiplicative", "additive"]},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            },
        },
        "fit": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dataset": {"type": "string"},
                "kind": {"enum": list(DATASET_KINDS)},
                "noise_floor": _nonneg,
                "gamma_m_hz": _nonneg,
                "mirror_t_in": _frac, "mirror_t_out": _frac,
            },
        },
        "synth": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {"kind": {"enum": list(DATASET_KINDS)}},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def validate(config: dict) -> dict:
    """Check a config against the schema and cross-field rules; returns it unchanged."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(".".join(str(p) for p in err.absolute_path), err.message)
    kind = config["scenario"]
    if kind in SWEEPS or kind == "synth":
        if "grid" not in config:
            raise ConfigError("grid", f"required for scenario {kind}")
        if config["grid"]["count"] < 2:
            raise ConfigError("grid.count", "sweeps need at least 2 points")
        if config["grid"].get("spacing") == "log" and min(config["grid"]["start"],
                                                         config["grid"]["stop"]) <= 0:
            raise ConfigError("grid", "log spacing needs positive bounds")
    if kind == "synth" and "synth" not in config:
        raise ConfigError("synth", "required for scenario synth")
    if kind == "fit" and "dataset" not in config.get("fit", {}):
        raise ConfigError("fit.dataset", "required for scenario fit")
    noise = config.get("noise", {})
    if noise.get("amplitude", 0) > 0 and "seed" not in noise:
        raise ConfigError("noise.seed", "a seed is required when noise amplitude > 0")
    system = config.get("system", {})
    if "q" in system and "gamma_m_hz" in system:
        raise ConfigError("system", "give either q or gamma_m_hz, not both")
    return config


def system_params(config: dict) -> SystemParams:
    """SystemParams from the ``system`` block; missing entries take the reference device values."""
    block = dict(DEVICE_SYSTEM)
    given = config.get("system", {})
    if "gamma_m_hz" in given:
        block.pop("q")
    block.update(given)
    damping = {"q": block["q"]} if "q" in block else {"gamma_m_hz": block["gamma_m_hz"]}
    try:
        return SystemParams.from_hz(
            block["omega_m_hz"], block["kappa_hz"], **damping,
            g0_hz=block["g0_hz"], delta_hz=block["delta_hz"], eta_c=block["eta_c"],
            p_in=block["p_in_w"], lambda_l=block["lambda_m"], t1=block.get("t1_s"),
            eta_loss=block["eta_loss"], eta_qe=block["eta_qe"],
        )
    except ValueError as exc:
        raise ConfigError("system", str(exc)) from exc


def _grid(start, stop, count, spacing="linear"):
    return {"start": start, "stop": stop, "count": count, "spacing": spacing}


def _noise(amplitude, mode="multiplicative", seed=DEFAULT_SEED):
    return {"amplitude": amplitude, "mode": mode, "seed": seed}


# Grid ranges are read off the figures by eye and are approximate.
_PRESETS = {
    "fig1c": [
        {"name": "fig1c_broad", "scenario": "omit_sweep", "sweep": "broad",
         "grid": _grid(0.05e6, 6.0e6, 600), "noise": _noise(0.01, "additive")},
        {"name": "fig1c_narrow", "scenario": "omit_sweep", "sweep": "narrow",
         "grid": {**_grid(-6e3, 6e3, 241), "relative_to_omega_m": True},
         "noise": _noise(0.01, "additive")},
    ],
    "fig2b": [
        {"name": "fig2b", "scenario": "dba_sweep", "grid": _grid(-4.8e6, -0.3e6, 30),
         "noise": _noise(0.10)},
    ],
    "fig3b": [
        {"name": f"fig3b_ratio_{tag}", "scenario": "storage",
         "pulse": {"gamma_sig_ratio": 1 / ratio},
         "timeline": {"t_delay_s": 1e-3}}
        for tag, ratio in (("0.25", 0.25), ("1", 1.0), ("4", 4.0))
    ],
    "fig4a": [
        {"name": "fig4a", "scenario": "t1_scan", "grid": _grid(0.0, 50e-3, 11),
         "timeline": {"t_delay_s": 0.0}, "noise": _noise(0.02)},
    ],
    "fig4b": [
        {"name": "fig4b", "scenario": "bandwidth_scan", "grid": _grid(0.05, 20.0, 15, "log"),
         "timeline": {"t_delay_s": 0.0}, "noise": _noise(0.05)},
    ],
    "fig4c": [
        {"name": "fig4c", "scenario": "detuning_scan", "grid": _grid(-5.0, 5.0, 21),
         "timeline": {"t_delay_s": 4.4e-3}, "noise": _noise(0.03)},
    ],
}

PRESETS = tuple(_PRESETS)


def preset(name: str, seed: int | None = None) -> list[dict]:
    """Configs for one named figure preset; ``seed`` replaces the noise seed."""
    if name not in _PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    configs = copy.deepcopy(_PRESETS[name])
    for cfg in configs:
        cfg["system"] = dict(DEVICE_SYSTEM)
        if seed is not None and "noise" in cfg:
            cfg["noise"]["seed"] = seed
        validate(cfg)
    return configs


def grid_values(grid: dict):
    """Grid points in external units."""
    if grid["count"] < 1:
        raise ConfigError("grid.count", "grid has no points")
    if grid.get("spacing", "linear") == "log":
        return np.geomspace(grid["start"], grid["stop"], grid["count"])
    return np.linspace(grid["start"], grid["stop"], grid["count"])

