"""Acceptance criteria, one test each, every test printing a PASS/FAIL line."""

from __future__ import annotations

import math
import time

import numpy as np

from optomem.cli.config import PRESETS
from optomem.cli.main import run
from optomem.core import coherence_time, cooperativity, drive_state, gamma_opt, hz
from optomem.estimation import Dataset, fit_eff_detuning, fit_g0, fit_T1, monte_carlo
from optomem.memory import (
    carrier_readout,
    closed_form_efficiency,
    efficiency,
    lockin_demodulate,
    ode_oracle,
    retrieved_amplitude,
    simulate_protocol,
)
from optomem.response import dba_sweep

from conftest import device_params, storage_setup

ETA_C2 = 0.63**2


def _rel(a, b):
    return abs(a - b) / abs(b)


def test_01_bandwidth_law(params, report):
    start = time.perf_counter()
    drive = drive_state(params)
    ratios = np.logspace(math.log10(0.05), math.log10(20), 50)
    closed = closed_form_efficiency(ratios * drive.gamma_eff, drive.gamma_eff, eta_c=params.eta_c,
                                    gamma_opt=drive.gamma_opt)
    dev_sim = dev_ode = 0.0
    for r, ref in zip(ratios, closed):
        d, pulse, tl = storage_setup(params, ratio=r)
        sim = efficiency(simulate_protocol(params, d, pulse, tl, oracle=False), params).eta
        ode = efficiency(ode_oracle(params, d, pulse, tl), params).eta
        dev_sim = max(dev_sim, _rel(sim, ref))
        dev_ode = max(dev_ode, _rel(ode, ref))
    elapsed = time.perf_counter() - start
    # the printed law neglects intrinsic damping; its peak is exactly eta_c^2 at matching
    law = lambda r: closed_form_efficiency(r, 1.0, eta_c=0.63)  # noqa: E731
    dense = np.logspace(-2, 2, 40001)
    peak_exact = law(1.0) == ETA_C2
    peak_at_match = abs(dense[np.argmax(law(dense))] - 1.0) < 1e-3
    ok = dev_sim < 1e-6 and dev_ode < 1e-6 and peak_exact and peak_at_match and elapsed < 10
    report(1, "efficiency vs bandwidth ratio agrees across all three routes", ok,
           f"max rel dev sim {dev_sim:.1e}, ode {dev_ode:.1e}; peak {law(1.0)!r}; {elapsed:.2f} s")


def test_02_detuning_lorentzian(params, report):
    drive = drive_state(params)
    t_delay = 4.4e-3
    deltas = np.linspace(-4, 4, 17) * drive.gamma_eff
    etas = []
    for d in deltas:
        dr, pulse, tl = storage_setup(params, delta=d, t_delay=t_delay)
        etas.append(efficiency(simulate_protocol(params, dr, pulse, tl), params).eta)
    fit = fit_eff_detuning(Dataset("eff_detuning", deltas, np.array(etas)))
    peak = etas[len(etas) // 2]
    ok = (abs(peak - 0.328) <= 1e-3 and _rel(fit["width"], drive.gamma_eff) < 1e-6
          and abs(fit["center"]) < 1e-6 * drive.gamma_eff
          and _rel(fit["peak"], peak) < 1e-6
          and _rel(peak, ETA_C2 * math.exp(-t_delay / params.t1)) < 1e-4)
    report(2, "efficiency vs signal detuning is Lorentzian of half-width gamma_eff", ok,
           f"peak {peak:.6f}; width/gamma_eff {fit['width'] / drive.gamma_eff:.9f}")


def test_03_dba_roundtrip(params, report):
    grid = hz(np.linspace(-4.8e6, -0.3e6, 30))
    x, y = dba_sweep(params, grid)
    clean = fit_g0(Dataset("dba", x, y), params, params.gamma_m)
    g0_clean = clean["g0"]

    def trial(rng, _):
        noisy = y * (1 + 0.1 * rng.standard_normal(y.size))
        return fit_g0(Dataset("dba", x, noisy), params, params.gamma_m)["g0"]

    g0s = np.array(monte_carlo(trial, 200, master_seed=2024))
    frac = float(np.mean(np.abs(g0s / params.g0 - 1) <= 0.10))
    ok = _rel(g0_clean, params.g0) <= 1e-10 and frac >= 0.95
    report(3, "g0 recovered from backaction sweep", ok,
           f"noiseless rel err {_rel(g0_clean, params.g0):.1e}; {frac:.1%} of 200 noisy trials within 10%")


def test_04_t1_decay(params, report):
    delays = np.linspace(0, 50e-3, 11)
    amps = []
    for td in delays:
        drive, pulse, tl = storage_setup(params, t_delay=td)
        amps.append(retrieved_amplitude(simulate_protocol(params, drive, pulse, tl, oracle=False)))
    amps = np.array(amps)
    on_law = np.max(np.abs(amps / amps[0] / np.exp(-delays / (2 * params.t1)) - 1))
    fit = fit_T1(Dataset("decay_T1", delays, amps / amps[0]))
    ok = on_law < 1e-9 and _rel(fit["t1"], 0.023) <= 1e-6
    report(4, "retrieved amplitude decays as exp(-t/2T1)", ok,
           f"T1 = {fit['t1'] * 1e3:.9f} ms; max dev from law {on_law:.1e}")


def test_05_efficiency_budget(report):
    # the ideal figure assumes no intrinsic mechanical loss
    lossless = device_params(gamma_m=0.0)
    drive, pulse, tl = storage_setup(lossless)
    e = efficiency(simulate_protocol(lossless, drive, pulse, tl), lossless)
    device = device_params()
    d2, p2, t2 = storage_setup(device)
    e_dev = efficiency(simulate_protocol(device, d2, p2, t2), device)
    ok = (abs(e.eta - ETA_C2) <= 1e-6 and round(e.eta, 3) == 0.397
          and lossless.eta_det == 0.6 * 0.83 and e.eta_detected == e.eta * lossless.eta_det
          and abs(lossless.eta_det - 0.498) < 1e-15)
    report(5, "matched zero-delay efficiency equals eta_c^2, detected scales by 0.498", ok,
           f"eta {e.eta:.9f} vs eta_c^2 {ETA_C2:.4f}; with intrinsic damping {e_dev.eta:.6f}")


def test_06_coherence_time(report):
    t = coherence_time(10.0, hz(2.4e6), 3e8)
    report(6, "coherence time at 10 K and Q = 3e8", 0.18e-3 <= t <= 0.26e-3, f"{t * 1e3:.4f} ms")


def test_07_cooperativity(params, report):
    n = 4e4 * params.kappa * params.gamma_m / (4 * params.g0**2)
    c = cooperativity(params, n)
    ratio = gamma_opt(params, n, -params.omega_m) / params.gamma_m
    tol = (params.kappa / (4 * params.omega_m)) ** 2
    ok = abs(c - 4e4) < 1e-6 * 4e4 and _rel(ratio, c) <= tol
    report(7, "optical damping over intrinsic damping tracks cooperativity", ok,
           f"C {c:.1f}; ratio {ratio:.1f}; rel dev {_rel(ratio, c):.4f} <= {tol:.4f}")


def test_08_oracle_order(params, report):
    drive, pulse, tl = storage_setup(params, t_delay=1e-3, dt_frac=0.05)
    ref = simulate_protocol(params, drive, pulse, tl, oracle=False)
    errs = []
    for k in (1, 2, 4):
        trace = ode_oracle(params, drive, pulse, tl, substeps=k)
        errs.append(np.max(np.abs(trace.b - ref.b)))
    ratio = errs[0] / errs[1]
    report(8, "ODE oracle converges at fourth order over the full three-segment protocol", abs(ratio - 16) <= 2,
           f"error ratio {ratio:.3f}; next halving {errs[1] / errs[2]:.3f}")


def test_09_lockin(params, report):
    drive, pulse, tl = storage_setup(params, t_delay=1e-3)
    trace = simulate_protocol(params, drive, pulse, tl, oracle=False)
    w = hz(2.4e6)
    fs = 30e6
    t, v = carrier_readout(trace, w, fs)
    bw = 10 * drive.gamma_eff
    env = lockin_demodulate(t, v, w, bw)
    read = trace.part("read")
    truth = np.interp(t, read.t, np.abs(read.s_out))
    settle = int(5 / bw * fs)
    window = slice(settle, len(t) - settle)
    dev = float(np.max(np.abs(env[window] / truth[window] - 1)))
    report(9, "lock-in envelope follows the read-out amplitude", dev < 0.02, f"max rel dev {dev:.2e}")


def test_10_presets_deterministic(tmp_path, report):
    mismatched = []
    for name in sorted(PRESETS):
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        assert run(["preset", name, "--out", str(a)]) == 0
        assert run(["preset", name, "--out", str(b)]) == 0
        files = sorted(p.name for p in a.iterdir())
        if files != sorted(p.name for p in b.iterdir()) or not files:
            mismatched.append(name)
            continue
        mismatched += [f"{name}/{f}" for f in files if (a / f).read_bytes() != (b / f).read_bytes()]
    report(10, "every preset reruns byte-identically", not mismatched,
           f"{len(PRESETS)} presets" + (f"; differing: {mismatched}" if mismatched else ""))
