"""Batch front-end turning scenario configs into output tables."""

from .scenarios import build_outputs, generate_synthetic, run_scenario

__all__ = ["build_outputs", "generate_synthetic", "run_scenario"]
