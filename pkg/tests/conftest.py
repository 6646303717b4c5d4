from __future__ import annotations

import math

import pytest

from optomem.core import SystemParams, cavity_photon_number

OMEGA_M_HZ = 2.4e6
KAPPA_HZ = 2.1e6
N_CAV = 5.04e8


def device_params(**changes) -> SystemParams:
    """Membrane-in-cavity device, control on the red sideband at C = 4e4."""
    base = SystemParams.from_hz(OMEGA_M_HZ, KAPPA_HZ, q=1e8, g0_hz=1.0, delta_hz=-OMEGA_M_HZ,
                                eta_c=0.63, p_in=1.0, t1=0.023, eta_loss=0.60, eta_qe=0.83)
    p_in = N_CAV / cavity_photon_number(base)
    return base.replace(**({"p_in": p_in} | changes))


@pytest.fixture
def params():
    return device_params()


@pytest.fixture
def two_pi():
    return 2 * math.pi


def storage_setup(params, ratio=1.0, delta=0.0, t_delay=0.0, windows=20.0, dt_frac=0.02,
                  beta=0.05, s0=1.0):
    """Storage inputs with ``gamma_sig = ratio * gamma_eff``."""
    from optomem.core import drive_state
    from optomem.memory import ProtocolTimeline, SignalPulse

    drive = drive_state(params)
    gsig = ratio * drive.gamma_eff
    pulse = SignalPulse(beta=beta, s0=s0, gamma_sig=gsig, omega_sig=params.omega_m + delta,
                        t_write=windows / gsig, delta=delta)
    timeline = ProtocolTimeline(t_delay=t_delay, t_read=windows / drive.gamma_eff,
                                sample_dt=dt_frac / max(gsig, drive.gamma_eff))
    return drive, pulse, timeline


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def _report(number: int, title: str, ok: bool, detail: str = ""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}"
        if detail:
            line += f" [{detail}]"
        ACCEPTANCE[number] = line
        print(line)
        assert ok, line

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
