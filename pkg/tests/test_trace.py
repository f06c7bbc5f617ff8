import dataclasses
import math
import warnings

import numpy as np
import pytest

from saddle_otoc.amplitude import OrbitContribution, orbit_contribution
from saddle_otoc.errors import DepthOutOfRange, EmptySumWarning, InsufficientData, ModeMismatch
from saddle_otoc.resonance import ResonantTorus, solve_resonance_fixed_energy, solve_resonance_fixed_time
from saddle_otoc.trace import (
    TraceConfig,
    assemble_trace,
    convergence_residual,
    dominant_orbit,
    dominant_orbit_fit,
    fit_growth_exponent,
    local_maxima,
    orbit_weight_general,
    orbit_weight_resonant,
)

HBAR = 0.05


def contribution(lam=0.7350, tau=4.0, A=0.3, S=0.0, mu=0, mode="time"):
    torus = ResonantTorus(m=(1, 0), J=np.zeros(2), tau=tau, lambda_val=lam, omega_val=np.ones(2),
                          jacobian=np.eye(2), iterations=0, residual_norm=0.0, mode=mode)
    return OrbitContribution(torus=torus, action=S, maslov=mu, amplitude=A, stability_factor=1.0,
                             phase=S / HBAR - 0.5 * math.pi * mu, signature=0, gaussian_phase=0.0)


def at_time(c, t, mode="time"):
    return dataclasses.replace(c, torus=dataclasses.replace(c.torus, tau=t, mode=mode))


class TestWeights:
    def test_pure_maslov_phase(self):
        c = contribution(S=0.0, mu=2)
        assert orbit_weight_resonant(c, 4.0, HBAR) == pytest.approx(-0.3 * math.exp(1.5 * 0.7350 * 4.0), rel=1e-15)

    def test_growth_factor_at_origin(self):
        c = contribution()
        for t in (2.0, 6.0):
            assert orbit_weight_resonant(at_time(c, t), t, HBAR) == pytest.approx(0.3 * math.exp(1.5 * 0.7350 * t), rel=1e-15)

    def test_mode_mismatch(self):
        with pytest.raises(ModeMismatch):
            orbit_weight_resonant(contribution(tau=4.0), 4.5, HBAR)
        with pytest.raises(ModeMismatch):
            orbit_weight_general(contribution(mode="time"), 4.0, HBAR)

    def test_single_orbit_log_slope(self):
        # fixed contribution, cosine sampled at a fixed nonzero value
        c = contribution(S=0.013, mu=0)
        ts = np.linspace(2, 6, 81)
        w = [orbit_weight_resonant(at_time(c, t), t, HBAR) for t in ts]
        fit = fit_growth_exponent(ts, values=w, method="direct")
        assert fit.slope == pytest.approx(1.5 * 0.7350, rel=1e-3)

    def test_general_at_zero_time(self):
        c = contribution(tau=6.0, mode="energy")
        assert abs(orbit_weight_general(c, 0.0, HBAR)) == pytest.approx(0.3 / (2 * math.sinh(0.7350 * 3.0)), rel=1e-14)

    def test_general_maslov_shift(self):
        a = orbit_weight_general(contribution(tau=6.0, S=0.2, mu=2, mode="energy"), 3.0, HBAR)
        b = orbit_weight_general(contribution(tau=6.0, S=0.2, mu=4, mode="energy"), 3.0, HBAR)
        assert a == pytest.approx(-b, rel=1e-14)

    @pytest.mark.parametrize("lam_tau", [8.0, 10.0, 14.0, 20.0])
    def test_mode_consistency(self, lam_tau):
        tau = lam_tau / 0.7350
        c = contribution(tau=tau, S=0.011, mode="energy")
        g = orbit_weight_general(c, tau, HBAR)
        r = orbit_weight_resonant(at_time(c, tau), tau, HBAR)
        assert abs(g / r - 1) < 2e-3

    def test_exact_butterfly(self):
        c = contribution(tau=6.0, S=0.2, mode="energy")
        a = orbit_weight_general(c, 3.0, HBAR, exact_butterfly=True)
        b = orbit_weight_general(c, 3.0, HBAR)
        assert a / b == pytest.approx((2 * math.cosh(0.735 * 3)) ** 2 / math.exp(2 * 0.735 * 3), rel=1e-14)


class TestFits:
    def test_pure_exponential(self):
        t = np.linspace(2, 6, 81)
        fit = fit_growth_exponent(t, values=np.exp(1.5 * 0.7350 * t))
        assert fit.method == "direct" and fit.slope == pytest.approx(1.1025, abs=1e-6)

    def test_constant(self):
        t = np.linspace(2, 6, 81)
        assert fit_growth_exponent(t, values=np.full(81, 3.0)).slope == pytest.approx(0.0, abs=1e-12)

    def test_beating_orbits(self):
        t = np.linspace(2, 6, 2001)
        lam = 0.7350
        y = np.exp(1.5 * lam * t) * (np.cos(40.0 * t) + 0.2 * np.cos(47.0 * t + 1.0))
        fit = fit_growth_exponent(t, values=y)
        assert fit.method == "envelope"
        assert fit.slope == pytest.approx(1.5 * lam, rel=0.02)

    def test_insufficient(self):
        with pytest.raises(InsufficientData):
            fit_growth_exponent(np.linspace(2, 6, 5), values=np.ones(5))

    def test_local_maxima(self):
        np.testing.assert_array_equal(local_maxima([0, 2, 1, 3, 1]), [1, 3])


class TestAssembly:
    def test_empty(self, em_poly):
        with pytest.warns(EmptySumWarning):
            s = assemble_trace(em_poly, TraceConfig(m_max=0, t_grid=(2.0, 3.0)))
        np.testing.assert_array_equal(s.C_E, [0.0, 0.0])
        assert s.orbit_count == 0

    def test_dedup_windings(self, em_poly):
        cfg = TraceConfig(m_max=3, t_grid=tuple(np.linspace(4, 6, 9)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptySumWarning)
            a = assemble_trace(em_poly, cfg, windings=[(2, 2), (1, 2), (2, 1)])
            b = assemble_trace(em_poly, cfg, windings=[(2, 2), (1, 2), (2, 1)] * 2)
        assert a.C_E.tobytes() == b.C_E.tobytes()

    def test_workers_bitwise(self, em_poly):
        cfg = TraceConfig(t_grid=tuple(np.linspace(4, 6, 9)))
        a = assemble_trace(em_poly, cfg, workers=1)
        b = assemble_trace(em_poly, cfg, workers=4)
        assert a.C_E.tobytes() == b.C_E.tobytes() and a.partials.tobytes() == b.partials.tobytes()

    def test_log_space_matches(self, em_poly):
        cfg = TraceConfig(t_grid=tuple(np.linspace(4, 6, 9)))
        a = assemble_trace(em_poly, cfg)
        b = assemble_trace(em_poly, dataclasses.replace(cfg, log_space=True))
        np.testing.assert_allclose(b.C_E, a.C_E, rtol=1e-12, atol=1e-300)

    def test_general_single_winding(self, em_poly):
        cfg = TraceConfig(mode="general", t_grid=(2.0, 3.0), m_max=17)
        s = assemble_trace(em_poly, cfg, windings=[(10, 7)])
        assert s.orbit_count == 1
        c = orbit_contribution(em_poly, solve_resonance_fixed_energy(em_poly, (10, 7), -0.5), HBAR)
        assert s.C_E[0] == pytest.approx(0.25 * HBAR**2 * orbit_weight_general(c, 2.0, HBAR), rel=1e-12)

    def test_reconstruct_from_records(self, preset_series):
        s = preset_series
        for i in range(len(s.t)):
            total = 0.25 * HBAR**2 * math.fsum(r.weight for r in s.contributions if r.t_index == i)
            assert abs(total - s.C_E[i]) <= 1e-10 * max(1.0, abs(s.C_E[i]))

    def test_residual_identities(self, preset_series):
        s = preset_series
        assert convergence_residual(s, s.m_max).tobytes() == s.residuals[-1].tobytes()
        for k in range(1, s.m_max + 1):
            prev = s.partials[k - 2] if k > 1 else 0.0
            np.testing.assert_array_equal(convergence_residual(s, k), np.abs(s.partials[k - 1] - prev))
        np.testing.assert_array_equal(s.C_E, s.partials[-1])
        # depth 1 needs Omega_3 = 0 or Omega_2 = 0: no orbit ever joins
        np.testing.assert_array_equal(convergence_residual(s, 1), np.zeros_like(s.t))
        with pytest.raises(DepthOutOfRange):
            convergence_residual(s, 0)
        with pytest.raises(DepthOutOfRange):
            convergence_residual(s, s.m_max + 1)

    def test_interference(self, preset_series):
        assert local_maxima(np.abs(preset_series.C_E)).size > 0

    def test_dominant_orbit(self, preset_series):
        fit = dominant_orbit_fit(preset_series)
        assert fit.m == dominant_orbit(preset_series.contributions)
        assert fit.fit.n_points >= 8 and np.all(np.diff(fit.t) > 0)

    def test_phase_hbar_scaling(self, em_poly):
        torus = solve_resonance_fixed_time(em_poly, (2, 3), 5.5)
        d = 1e-6
        a = orbit_contribution(em_poly, torus, HBAR)
        b = orbit_contribution(em_poly, torus, HBAR * (1 + d))
        assert (b.phase - a.phase) == pytest.approx(-a.action / HBAR**2 * HBAR * d, rel=1e-5)

    def test_config_validation(self):
        for bad in (dict(hbar=0), dict(m_max=-1), dict(mode="x"), dict(t_grid=()), dict(t_grid=(2.0, 2.0))):
            with pytest.raises(ValueError):
                TraceConfig(**bad)
