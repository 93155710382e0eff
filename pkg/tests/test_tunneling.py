import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcrdamp.errors import QuadratureError
from qcrdamp.params import K_B, TunnelKernelParams, reference_device
from qcrdamp.quadrature import GAUSS_WEIGHTS, KRONROD_WEIGHTS, NODES, adaptive_quad
from qcrdamp.tunneling import dynes_dos, fermi, forward_rate, kernel_table

from . import oracles

P = reference_device()
K = P.kernel
DELTA = P.Delta
GD = P.gamma_D

# mpmath, 40 digits, of the defining expression at eps = Delta, gamma_D = 4e-4
GOLDEN_DOS_AT_GAP = 25.00750062491248594


class TestDynesDos:
    def test_zero_energy_closed_form(self):
        assert dynes_dos(0.0, DELTA, GD) == pytest.approx(GD / math.sqrt(1 + GD**2), rel=1e-12)
        assert dynes_dos(0.0, DELTA, GD) == pytest.approx(4.0e-4, rel=1e-6)

    def test_far_above_gap(self):
        assert dynes_dos(100 * DELTA, DELTA, GD) == pytest.approx(1.0, abs=1e-4)

    def test_gap_edge_golden(self):
        assert float(oracles.dos_mp(1.0, 4e-4)) == pytest.approx(GOLDEN_DOS_AT_GAP, rel=1e-15)
        assert dynes_dos(DELTA, DELTA, 4e-4) == pytest.approx(GOLDEN_DOS_AT_GAP, rel=1e-12)

    @pytest.mark.parametrize("x", [0.0, 0.3, 0.5, 0.9, 0.999, 1.0005, 1.01, 2.0, 7.5])
    def test_matches_arbitrary_precision(self, x):
        assert dynes_dos(x * DELTA, DELTA, GD) == pytest.approx(float(oracles.dos_mp(x, GD)), rel=1e-10)

    def test_evenness_and_floor(self):
        rng = np.random.default_rng(7)
        eps = rng.uniform(-10, 10, 10_000) * DELTA
        pos, neg = dynes_dos(eps, DELTA, GD), dynes_dos(-eps, DELTA, GD)
        np.testing.assert_allclose(pos, neg, rtol=1e-13, atol=0)
        assert np.all(pos >= GD / 2)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-50, 50), st.floats(1e-6, 0.3))
    def test_floor_property(self, x, g):
        n = dynes_dos(x, 1.0, g)
        assert n >= g / 2 and n == dynes_dos(-x, 1.0, g)


class TestFermi:
    def test_half_filling(self):
        assert fermi(0.0, 0.17) == 0.5

    def test_deep_tail_no_overflow(self):
        T = 0.17
        with np.errstate(all="raise"):
            assert fermi(50 * K_B * T, T) < 2e-22
            assert fermi(700 * K_B * T, T) >= 0.0
            assert fermi(-700 * K_B * T, T) == 1.0

    def test_minus_kt(self):
        T = 0.17
        assert fermi(-K_B * T, T) == pytest.approx(1 / (1 + math.exp(-1)), rel=1e-15)
        assert fermi(-K_B * T, T) == pytest.approx(0.7311, abs=1e-4)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-700, 700))
    def test_particle_hole(self, r):
        T = 0.2
        assert fermi(r * K_B * T, T) + fermi(-r * K_B * T, T) == pytest.approx(1.0, abs=1e-15)


class TestQuadrature:
    def test_weights_integrate_polynomials(self):
        # Gauss-7 exact to degree 13, Kronrod-15... here 21-point: degree 31
        for deg in range(0, 31):
            exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
            assert KRONROD_WEIGHTS @ NODES**deg == pytest.approx(exact, abs=1e-14)
        for deg in range(0, 19):
            exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
            assert GAUSS_WEIGHTS @ NODES**deg == pytest.approx(exact, abs=1e-14)

    def test_lorentzian_peak(self):
        w = 1e-4
        f = lambda x: w / np.pi / (x * x + w * w)
        val = adaptive_quad(f, [-1.0, 0.0, 1.0], rtol=1e-12)
        assert val == pytest.approx(2 / np.pi * math.atan(1 / w), rel=1e-11)

    def test_sqrt_singularity(self):
        val = adaptive_quad(lambda x: 1 / np.sqrt(np.abs(x) + 1e-300), [0.0, 1.0], rtol=1e-8)
        assert val == pytest.approx(2.0, rel=1e-6)

    def test_failure_reports_tolerance(self):
        with pytest.raises(QuadratureError) as info:
            adaptive_quad(lambda x: np.sin(1 / (x + 1e-9)), [0.0, 1.0], rtol=1e-14, max_panels=50)
        assert info.value.achieved_rtol > 1e-14
        assert "achieved relative error" in str(info.value)


class TestForwardRate:
    def test_normal_metal_limit(self):
        rate = forward_rate(0.0, K, dos=lambda eps: np.ones_like(eps))
        assert rate == pytest.approx(K_B * K.T_N / oracles.H, rel=1e-10)

    def test_reported_error_small(self):
        rate, rel = forward_rate(P.f_0 * oracles.H, K, full_output=True)
        assert rate > 0 and 0 <= rel <= 1e-8

    def test_zero_bias_oracle(self):
        ref = oracles.kernel_trapezoid(0.0, DELTA, GD, K.T_N)
        assert forward_rate(0.0, K) == pytest.approx(ref, rel=1e-6)

    def test_oracle_other_params(self):
        k = TunnelKernelParams(Delta=180e-6 * oracles.E, gamma_D=1e-3, T_N=0.25, R_T=1e4)
        for e in (-0.7, 0.0, 0.9, 1.3):
            ref = oracles.kernel_trapezoid(e * k.Delta, k.Delta, k.gamma_D, k.T_N)
            assert forward_rate(e * k.Delta, k) == pytest.approx(ref, rel=1e-6)

    def test_oracle_random_energies(self):
        rng = np.random.default_rng(20)
        for e in rng.uniform(-3, 3, 20):
            ref = oracles.kernel_trapezoid(e * DELTA, DELTA, GD, K.T_N)
            assert forward_rate(e * DELTA, K) == pytest.approx(ref, rel=1e-6)

    def test_detailed_balance_photon(self):
        E = oracles.H * P.f_0
        ratio = forward_rate(-E, K) / forward_rate(E, K)
        assert ratio == pytest.approx(math.exp(-E / (oracles.KB * K.T_N)), rel=1e-6)

    def test_detailed_balance_random(self):
        rng = np.random.default_rng(6)
        for e in rng.uniform(0, 3, 50):
            E = e * DELTA
            ratio = forward_rate(-E, K) / forward_rate(E, K)
            assert ratio == pytest.approx(math.exp(-E / (oracles.KB * K.T_N)), rel=1e-6)

    def test_monotone_pairs(self):
        rng = np.random.default_rng(11)
        pairs = np.sort(rng.uniform(-4, 4, (100, 2)), axis=1)
        for lo, hi in pairs:
            assert forward_rate(lo * DELTA, K) <= forward_rate(hi * DELTA, K)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(-5, 5), st.floats(0, 2))
    def test_monotone_property(self, e, step):
        assert forward_rate(e * DELTA, K) <= forward_rate((e + step) * DELTA, K) * (1 + 1e-9)

    def test_large_energy_guard(self):
        with pytest.raises(ValueError, match="exceeds"):
            forward_rate(21 * DELTA, K)
        assert forward_rate(20 * DELTA, K) > 0

    def test_above_gap_approaches_normal_metal(self):
        # at low temperature the BCS DOS integrates to sqrt(E^2 - Delta^2)
        E = 10 * DELTA
        rate = forward_rate(E, K)
        assert rate == pytest.approx(math.sqrt(E**2 - DELTA**2) / oracles.H, rel=1e-3)

    def test_kernel_table_rows(self):
        rows = kernel_table([-DELTA, 0.0, DELTA], K)
        assert [r[0] for r in rows] == [-DELTA, 0.0, DELTA]
        assert rows[0][1] < rows[1][1] < rows[2][1]
