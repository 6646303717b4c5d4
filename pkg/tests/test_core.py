from __future__ import annotations

import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optomem.core import (
    SidebandWarning,
    SystemParams,
    cavity_photon_number,
    coherence_time,
    cooperativity,
    drive_state,
    gamma_opt,
    hz,
    mech_susceptibility,
    to_hz,
)

from conftest import device_params

mp.mp.dps = 40
HBAR = mp.mpf("6.62607015e-34") / (2 * mp.pi)  # exact SI definition
KB = mp.mpf("1.380649e-23")
C_LIGHT = mp.mpf(299792458)


def test_unit_helpers_roundtrip():
    assert to_hz(hz(2.4e6)) == pytest.approx(2.4e6, rel=1e-15)
    assert hz(1.0) == pytest.approx(2 * math.pi)
    np.testing.assert_allclose(to_hz(hz(np.array([1.0, 2.0]))), [1.0, 2.0])


class TestSystemParams:
    def test_t1_defaults_to_inverse_gamma_m(self):
        p = SystemParams(omega_m=1e7, gamma_m=0.5, kappa=1e6)
        assert p.t1 == 2.0

    def test_lossless_t1_infinite(self):
        p = SystemParams(omega_m=1e7, gamma_m=0.0, kappa=1e6)
        assert math.isinf(p.t1) and math.isinf(p.q)

    @pytest.mark.parametrize("bad", [
        dict(omega_m=0.0), dict(kappa=-1.0), dict(gamma_m=-1e-3), dict(eta_c=0.0),
        dict(eta_c=1.2), dict(eta_qe=0.0), dict(g0=-1.0), dict(p_in=-1.0), dict(t1=-1.0),
        dict(omega_m=math.nan),
    ])
    def test_rejects_invalid(self, bad):
        kw = dict(omega_m=1e7, gamma_m=1e-2, kappa=1e6) | bad
        with pytest.raises(ValueError):
            SystemParams(**kw)

    def test_resolved_flag(self):
        p = device_params()
        assert p.resolved_sideband
        with pytest.warns(SidebandWarning):
            q = SystemParams(omega_m=1e6, gamma_m=1.0, kappa=2e6)
        assert not q.resolved_sideband

    def test_no_warning_when_resolved(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            device_params()

    def test_from_hz_requires_one_damping(self):
        with pytest.raises(ValueError):
            SystemParams.from_hz(2.4e6, 2.1e6)
        with pytest.raises(ValueError):
            SystemParams.from_hz(2.4e6, 2.1e6, q=1e8, gamma_m_hz=0.024)

    @given(q=st.floats(1e2, 1e12), f_m=st.floats(1e3, 1e9))
    def test_quality_factor_roundtrip(self, q, f_m):
        p = SystemParams.from_quality_factor(hz(f_m), q, kappa=hz(f_m) / 10)
        assert p.gamma_m == pytest.approx(hz(f_m) / q, rel=1e-15)
        assert p.q == pytest.approx(q, rel=1e-14)

    def test_eta_det(self):
        assert device_params().eta_det == pytest.approx(0.498, abs=1e-15)


class TestSusceptibility:
    def test_peak_is_real(self):
        chi = mech_susceptibility(5.0, 5.0, 0.2)
        assert chi == pytest.approx(2 / 0.2)
        assert chi.imag == 0

    def test_half_width(self):
        peak = abs(mech_susceptibility(5.0, 5.0, 0.2)) ** 2
        assert abs(mech_susceptibility(5.1, 5.0, 0.2)) ** 2 == pytest.approx(peak / 2)

    def test_device_damping_value(self):
        gamma = hz(0.024)
        assert mech_susceptibility(hz(2.4e6), hz(2.4e6), gamma).real == pytest.approx(13.2629, rel=1e-5)

    def test_array_input(self):
        out = mech_susceptibility(np.array([1.0, 2.0]), 1.5, 1.0)
        assert out.shape == (2,)

    @pytest.mark.parametrize("args", [(math.nan, 1.0, 1.0), (1.0, math.inf, 1.0), (1.0, 1.0, 0.0)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            mech_susceptibility(*args)


def _n_cav_mp(p_in, lam, kappa, eta_c, delta):
    omega_l = 2 * mp.pi * C_LIGHT / lam
    return p_in / (HBAR * omega_l) * eta_c * kappa / ((kappa / 2) ** 2 + delta**2)


class TestPhotonNumber:
    def test_zero_power(self):
        assert cavity_photon_number(device_params(p_in=0.0)) == 0.0

    def test_resonant_limit(self):
        p = device_params(delta=0.0)
        expected = 4 * p.eta_c * p.p_in / (float(HBAR) * p.omega_l * p.kappa)
        assert cavity_photon_number(p) == pytest.approx(expected, rel=1e-13)

    def test_against_high_precision(self):
        p = device_params(p_in=1e-6)
        kappa = 2 * mp.pi * mp.mpf("2.1e6")
        delta = -2 * mp.pi * mp.mpf("2.4e6")
        ref = _n_cav_mp(mp.mpf("1e-6"), mp.mpf("1550e-9"), kappa, mp.mpf("0.63"), delta)
        assert cavity_photon_number(p) == pytest.approx(float(ref), rel=1e-13)
        # frozen value for regression
        assert float(ref) == pytest.approx(239415.6769, rel=1e-8)

    def test_argmax_at_resonance(self):
        grid = hz(np.linspace(-5e6, 5e6, 201))
        n = cavity_photon_number(device_params(), grid)
        assert grid[np.argmax(n)] == 0.0


class TestBackaction:
    def test_zero_detuning(self):
        p = device_params(delta=0.0)
        assert gamma_opt(p, 1e8) == 0.0

    def test_antisymmetric(self):
        p = device_params()
        d = hz(np.linspace(0.1e6, 5e6, 50))
        np.testing.assert_allclose(gamma_opt(p, 1e8, d), -gamma_opt(p, 1e8, -d), rtol=1e-14)

    def test_sideband_limit(self):
        p = device_params()
        n = 5.04e8
        approx = 4 * p.g0**2 * n / p.kappa
        rel = abs(gamma_opt(p, n) - approx) / approx
        assert rel <= (p.kappa / (4 * p.omega_m)) ** 2

    def test_cooperativity_examples(self):
        p = device_params()
        assert cooperativity(p, 0.0) == 0.0
        assert cooperativity(p, 5.04e8) == pytest.approx(4.0e4, rel=1e-3)
        assert cooperativity(p, 2 * 5.04e8) == pytest.approx(2 * cooperativity(p, 5.04e8))

    def test_cooperativity_undefined_without_damping(self):
        p = device_params(gamma_m=0.0)
        assert math.isnan(cooperativity(p, 1e8))

    def test_drive_state_consistency(self):
        p = device_params()
        d = drive_state(p)
        assert d.n_cav == pytest.approx(5.04e8, rel=1e-12)
        assert d.g**2 == pytest.approx(p.g0**2 * d.n_cav, rel=1e-15)
        assert d.gamma_eff == pytest.approx(p.gamma_m + d.gamma_opt, rel=1e-15)
        assert d.gamma_opt == pytest.approx(d.gamma_anti_stokes - d.gamma_stokes)
        assert to_hz(d.gamma_opt) == pytest.approx(916.1, rel=1e-3)

    @settings(max_examples=200)
    @given(delta_hz=st.floats(-2e7, 0.0), p_in=st.floats(0.0, 1e-1))
    def test_red_drive_only_damps(self, delta_hz, p_in):
        d = drive_state(device_params(delta=hz(delta_hz), p_in=p_in))
        assert d.n_cav >= 0
        assert d.gamma_eff >= device_params().gamma_m

    @given(delta_hz=st.floats(1.0, 2e7), n=st.floats(0.0, 1e10))
    def test_gamma_eff_antisymmetry(self, delta_hz, n):
        p = device_params()
        up = gamma_opt(p, n, hz(delta_hz))
        down = gamma_opt(p, n, -hz(delta_hz))
        assert up == pytest.approx(-down, rel=1e-12, abs=1e-300)


class TestCoherence:
    def test_ten_kelvin_value(self):
        t = coherence_time(10.0, hz(2.4e6), 3e8)
        assert 0.18e-3 <= t <= 0.26e-3
        assert t == pytest.approx(float(3e8 * HBAR / (KB * 10)), rel=1e-9)

    def test_linear_in_q(self):
        a = coherence_time(10.0, hz(2.4e6), 1e8)
        assert coherence_time(10.0, hz(2.4e6), 2e8) == pytest.approx(2 * a, rel=1e-15)

    def test_room_temperature(self):
        ref = float(mp.mpf("1e8") * HBAR / (KB * 300))
        assert coherence_time(300.0, hz(2.4e6), 1e8) == pytest.approx(ref, rel=1e-12)
        assert ref == pytest.approx(2.546e-6, rel=1e-3)

    def test_bose_factor_close(self):
        a = coherence_time(10.0, hz(2.4e6), 3e8)
        b = coherence_time(10.0, hz(2.4e6), 3e8, bose=True)
        assert abs(a - b) / a < 1e-5

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(ValueError):
            coherence_time(0.0, hz(2.4e6), 1e8)
