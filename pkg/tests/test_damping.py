import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ubound import damping as dmp
from ubound import spectral as sp

from conftest import eval_sine_series, midpoint_integral


@pytest.fixture(scope="module")
def op_wave():
    return sp.make_operator(sp.WAVE, 5)


@pytest.fixture(scope="module")
def op_beam():
    return sp.make_operator(sp.BEAM, 4)


def all_dampings(op_wave, op_beam):
    return [
        (op_wave, dmp.DampingOp(dmp.AVERAGED_H, 1.0, 0.0)),
        (op_wave, dmp.DampingOp(dmp.AVERAGED_H, 0.7, 2.0)),
        (op_wave, dmp.DampingOp(dmp.LOCAL_POWER, 1.0, 2.0)),
        (op_wave, dmp.DampingOp(dmp.LOCAL_POWER, 2.0, 0.5)),
        (op_beam, dmp.DampingOp(dmp.STRUCTURAL_AVERAGED, 1.5, 1.0)),
        (op_wave, dmp.DampingSum((
            dmp.DampingOp(dmp.LINEAR_VISCOUS, 1.0),
            dmp.DampingOp(dmp.AVERAGED_H, 1.0, 2.0)))),
    ]


class TestConstruction:
    def test_linear_viscous_aliases_to_averaged(self):
        g = dmp.DampingOp(dmp.LINEAR_VISCOUS, 2.0, 5.0)
        assert g == dmp.DampingOp(dmp.AVERAGED_H, 2.0, 0.0)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            dmp.DampingOp(dmp.AVERAGED_H, 0.0)
        with pytest.raises(ValueError):
            dmp.DampingOp(dmp.AVERAGED_H, 1.0, -0.5)
        with pytest.raises(ValueError):
            dmp.DampingOp("quartic", 1.0)
        with pytest.raises(ValueError):
            dmp.DampingSum(())


class TestApply:
    def test_identity_damping(self, op_wave, rng):
        g = dmp.DampingOp(dmp.AVERAGED_H, 1.0, 0.0)
        v = rng.standard_normal(5)
        assert np.array_equal(dmp.apply_g(op_wave, g, v), v)

    def test_structural_linear_on_beam_mode(self, op_beam):
        g = dmp.DampingOp(dmp.STRUCTURAL_AVERAGED, 1.0, 0.0)
        e2 = sp.unit_mode(op_beam, 2)
        assert np.allclose(dmp.apply_g(op_beam, g, e2), 4.0 * e2, atol=1e-14)

    def test_sum_is_sum_of_parts(self, op_wave, rng):
        parts = (dmp.DampingOp(dmp.AVERAGED_H, 1.0, 0.0),
                 dmp.DampingOp(dmp.LOCAL_POWER, 0.5, 2.0))
        g = dmp.DampingSum(parts)
        v = rng.standard_normal(5)
        expected = sum(dmp.apply_g(op_wave, p, v) for p in parts)
        assert np.allclose(dmp.apply_g(op_wave, g, v), expected, atol=0)

    def test_local_power_matches_fine_quadrature(self, op_wave):
        # cubic pointwise damping of 2 * first mode, projected back: compare
        # each coefficient against a 10x-resolution independent quadrature
        g = dmp.DampingOp(dmp.LOCAL_POWER, 1.0, 2.0)
        v = sp.unit_mode(op_wave, 1, 2.0)
        got = dmp.apply_g(op_wave, g, v)

        def coeff(k):
            def f(xs):
                fv = eval_sine_series(op_wave, v, xs)
                return np.abs(fv) ** 2 * fv * eval_sine_series(
                    op_wave, sp.unit_mode(op_wave, k), xs)
            return midpoint_integral(f, 0.0, op_wave.length,
                                     10 * op_wave.num_quad)

        for k in range(1, 6):
            assert got[k - 1] == pytest.approx(coeff(k), abs=1e-8)


class TestDissipation:
    def test_zero_velocity(self, op_wave, op_beam):
        for op, g in all_dampings(op_wave, op_beam):
            assert dmp.dissipation(op, g, np.zeros(op.num_modes)) == 0.0

    def test_averaged_closed_form(self, op_wave):
        g = dmp.DampingOp(dmp.AVERAGED_H, 2.0, 1.0)
        v = sp.unit_mode(op_wave, 1, 3.0)
        assert dmp.dissipation(op_wave, g, v) == pytest.approx(54.0, rel=1e-14)

    def test_local_power_vs_fine_quadrature(self, op_wave, rng):
        g = dmp.DampingOp(dmp.LOCAL_POWER, 1.0, 2.0)
        for _ in range(5):
            v = rng.standard_normal(5)
            oracle = midpoint_integral(
                lambda xs: np.abs(eval_sine_series(op_wave, v, xs)) ** 4,
                0.0, op_wave.length, 10 * op_wave.num_quad)
            got = dmp.dissipation(op_wave, g, v)
            assert abs(got - oracle) < 1e-8 * (1.0 + abs(oracle))

    def test_pairing_consistency(self, op_wave, op_beam, rng):
        # <g(v), v> computed by closed form / quadrature must equal the
        # modal dot product with the projected image
        for op, g in all_dampings(op_wave, op_beam):
            for _ in range(5):
                v = rng.standard_normal(op.num_modes)
                direct = dmp.dissipation(op, g, v)
                paired = float(np.dot(dmp.apply_g(op, g, v), v))
                assert direct == pytest.approx(paired, rel=1e-12, abs=1e-12)

    def test_nonnegative(self, op_wave, op_beam, rng):
        for op, g in all_dampings(op_wave, op_beam):
            for _ in range(20):
                v = rng.standard_normal(op.num_modes) * \
                    10.0 ** rng.uniform(-3, 3)
                assert dmp.dissipation(op, g, v) >= 0.0


class TestJacobian:
    def test_matches_finite_differences(self, op_wave, op_beam, rng):
        eps = 1e-7
        for op, g in all_dampings(op_wave, op_beam):
            v = rng.standard_normal(op.num_modes)
            jac = dmp.jacobian_g(op, g, v)
            for i in range(op.num_modes):
                vp = v.copy()
                vp[i] += eps
                vm = v.copy()
                vm[i] -= eps
                col = (dmp.apply_g(op, g, vp) - dmp.apply_g(op, g, vm)) \
                    / (2 * eps)
                assert np.allclose(jac[:, i], col, rtol=1e-5, atol=1e-6)

    def test_positive_semidefinite(self, op_wave, rng):
        g = dmp.DampingOp(dmp.LOCAL_POWER, 1.0, 2.0)
        v = rng.standard_normal(5)
        eigs = np.linalg.eigvalsh(dmp.jacobian_g(op_wave, g, v))
        assert eigs.min() >= -1e-12


class TestMonotoneOddHomogeneous:
    @settings(max_examples=60, deadline=None)
    @given(data=st.data())
    def test_monotone(self, data, op_wave, op_beam):
        scale = st.floats(-100.0, 100.0, allow_nan=False)
        for op, g in all_dampings(op_wave, op_beam):
            v = np.array(data.draw(st.lists(scale, min_size=op.num_modes,
                                            max_size=op.num_modes)))
            w = np.array(data.draw(st.lists(scale, min_size=op.num_modes,
                                            max_size=op.num_modes)))
            pair = float(np.dot(dmp.apply_g(op, g, v) - dmp.apply_g(op, g, w),
                                v - w))
            nv = math.sqrt(float(np.dot(v, v)))
            nw = math.sqrt(float(np.dot(w, w)))
            assert pair >= -1e-10 * (1.0 + nv + nw) ** 2

    def test_odd_exact(self, op_wave, op_beam, rng):
        for op, g in all_dampings(op_wave, op_beam):
            for _ in range(50):
                v = rng.standard_normal(op.num_modes) * \
                    10.0 ** rng.uniform(-2, 2)
                assert np.array_equal(dmp.apply_g(op, g, -v),
                                      -dmp.apply_g(op, g, v))

    def test_averaged_homogeneity(self, op_wave, op_beam, rng):
        cases = [(op_wave, dmp.DampingOp(dmp.AVERAGED_H, 0.7, 2.0)),
                 (op_beam, dmp.DampingOp(dmp.STRUCTURAL_AVERAGED, 1.5, 1.0))]
        for op, g in cases:
            for _ in range(50):
                v = rng.standard_normal(op.num_modes)
                s = 10.0 ** rng.uniform(-3, 3)
                a = dmp.apply_g(op, g, s * v)
                b = s ** (g.alpha + 1.0) * dmp.apply_g(op, g, v)
                assert np.allclose(a, b, rtol=1e-12, atol=0.0)


class TestCertificates:
    def test_averaged_power_certificate_exact(self):
        op = sp.make_operator(sp.WAVE, 4)  # lambda_1 = 1, so P = 1
        g = dmp.DampingOp(dmp.AVERAGED_H, 1.0, 2.0)
        cert = dmp.certificate(op, g, dmp.COND_POWER)
        assert (cert.gamma, cert.C1, cert.K, cert.C2) == (1.0, 0.0, 1.0, 0.0)
        assert cert.z.kind == sp.Z_L2
        assert cert.provenance == "analytic"

    def test_structural_dual_certificate_exact(self, op_beam):
        g = dmp.DampingOp(dmp.STRUCTURAL_AVERAGED, 1.5, 1.0)
        cert = dmp.certificate(op_beam, g, dmp.COND_POWER_DUAL)
        assert (cert.gamma, cert.C1, cert.K, cert.C2) == (1.5, 0.0, 1.5, 0.0)
        assert cert.z.kind == sp.Z_H10

    def test_local_power_coercivity_exact(self, op_wave):
        g = dmp.DampingOp(dmp.LOCAL_POWER, 2.0, 2.0)
        cert = dmp.certificate(op_wave, g, dmp.COND_POWER)
        assert cert.gamma == 2.0
        assert cert.C1 == 0.0
        assert cert.z == sp.z_lp(2.0)

    def test_quadratic_linear_case(self, op_wave):
        # viscous damping: quadratic coercivity is exact, growth constants
        # come from an optimized split and must be finite and sound
        g = dmp.DampingOp(dmp.AVERAGED_H, 1.0, 0.0)
        cert = dmp.certificate(op_wave, g, dmp.COND_QUADRATIC)
        assert cert.gamma == 1.0
        assert cert.C1 == 0.0
        assert cert.K > 0 and cert.C2 > 0
        viol = dmp.verify_certificate(op_wave, g, cert, n_samples=10000,
                                      max_norm=1e3, rng=7)
        assert viol <= 1e-9

    def test_quadratic_power_case_needs_slack(self, op_wave):
        # pure power damping only dominates |v|^2 up to an additive constant
        g = dmp.DampingOp(dmp.LOCAL_POWER, 1.0, 2.0)
        cert = dmp.certificate(op_wave, g, dmp.COND_QUADRATIC)
        assert cert.C1 > 0.0
        viol = dmp.verify_certificate(op_wave, g, cert, n_samples=10000,
                                      max_norm=1e3, rng=8)
        assert viol <= 1e-9

    def test_all_certificates_sound(self, op_wave, op_beam, rng):
        for op, g in all_dampings(op_wave, op_beam):
            for cond in dmp.CONDITIONS:
                cert = dmp.certificate(op, g, cond)
                assert cert.condition == cond
                viol = dmp.verify_certificate(op, g, cert, n_samples=1000,
                                              rng=rng)
                assert viol <= 1e-9, (g, cond)

    def test_sum_without_common_space_rejected(self, op_wave):
        g = dmp.DampingSum((dmp.DampingOp(dmp.LOCAL_POWER, 1.0, 2.0),
                            dmp.DampingOp(dmp.AVERAGED_H, 1.0, 2.0)))
        with pytest.raises(dmp.NoCertificateError):
            dmp.certificate(op_wave, g, dmp.COND_POWER)

    def test_mixed_power_exponents_rejected(self, op_wave):
        g = dmp.DampingSum((dmp.DampingOp(dmp.LOCAL_POWER, 1.0, 1.0),
                            dmp.DampingOp(dmp.LOCAL_POWER, 1.0, 2.0)))
        with pytest.raises(dmp.NoCertificateError):
            dmp.certificate(op_wave, g, dmp.COND_POWER)

    def test_unknown_condition(self, op_wave):
        with pytest.raises(ValueError):
            dmp.certificate(op_wave, dmp.DampingOp(dmp.AVERAGED_H, 1.0),
                            "cubic")
