"""Mittag-Leffler kernel tests: series identities, closed forms, and the
frozen high-precision oracle values."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.special import gamma

from fracctrl import (
    DomainError,
    InvalidParams,
    MLParams,
    NonConvergence,
    SeriesPolicy,
    alpha_exp,
    cl_truncation,
    frac_cos,
    frac_sin,
    inverse_kernel,
    ml_matrix,
    ml_scalar,
    state_transition,
)

# frozen 50-digit oracle values (independent fixed-precision summation of the
# defining series; see tests/oracles.py to regenerate)
E_HALF_HALF_AT_MINUS_1 = 0.13660600739194928254
E_HALF_ONE_SKEW_C = 0.36787944117144232160   # E_{1/2,1}(A), A=[[0,1],[-1,0]]: I-coefficient
E_HALF_ONE_SKEW_D = 0.60715770584139372912   # same: A-coefficient
C2_AT_HALF = -0.13298076013381089265         # cl_truncation(2, 0.5)


class TestParams:
    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidParams):
            MLParams(0.0, 1.0)
        with pytest.raises(InvalidParams):
            MLParams(0.5, -0.1)

    def test_policy_validation(self):
        with pytest.raises(InvalidParams):
            SeriesPolicy(rel_tol=1.5)
        with pytest.raises(InvalidParams):
            SeriesPolicy(max_terms=0)


class TestScalar:
    def test_exponential_point(self):
        assert ml_scalar(MLParams(1.0, 1.0), 1.0) == pytest.approx(np.e, rel=1e-14)

    def test_zero_argument_single_term(self):
        assert ml_scalar(MLParams(0.7, 0.7), 0.0) == pytest.approx(1.0 / gamma(0.7), rel=1e-15)

    def test_frozen_oracle_value(self):
        got = ml_scalar(MLParams(0.5, 0.5), -1.0)
        assert got == pytest.approx(E_HALF_HALF_AT_MINUS_1, rel=1e-13)

    def test_exp_identity_on_range(self):
        z = np.linspace(-5.0, 5.0, 81)
        vals = np.array([ml_scalar(MLParams(1.0, 1.0), zv) for zv in z])
        assert np.max(np.abs(vals / np.exp(z) - 1.0)) <= 1e-12

    @given(st.floats(0.2, 2.5), st.floats(0.2, 3.0))
    @settings(max_examples=40, deadline=None)
    def test_value_at_zero_is_reciprocal_gamma(self, alpha, beta):
        assert ml_scalar(MLParams(alpha, beta), 0.0) == pytest.approx(
            1.0 / gamma(beta), rel=1e-14
        )

    def test_nonconvergence_beyond_desk_scale(self):
        with pytest.raises(NonConvergence):
            ml_scalar(MLParams(0.5, 0.5), -40.0, SeriesPolicy(max_terms=200))


class TestMatrix:
    def test_diagonal_exponential(self):
        got = ml_matrix(MLParams(1.0, 1.0), np.diag([1.0, 2.0]))
        assert np.allclose(got, np.diag([np.e, np.e**2]), rtol=1e-13)

    def test_nilpotent_truncates_exactly(self):
        # E_{1/2,1/2}(A sqrt(t)) for the chain matrix: [[1/G(1/2), sqrt(t)], [0, 1/G(1/2)]]
        t = 0.7
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        got = ml_matrix(MLParams(0.5, 0.5), A * np.sqrt(t))
        want = np.array([[1.0 / gamma(0.5), np.sqrt(t)], [0.0, 1.0 / gamma(0.5)]])
        assert np.allclose(got, want, rtol=1e-15, atol=1e-15)

    def test_zero_matrix_gives_identity(self):
        got = ml_matrix(MLParams(0.4, 1.0), np.zeros((3, 3)))
        assert np.array_equal(got, np.eye(3))

    def test_diagonal_consistency_with_scalar(self):
        d = np.array([0.8, -1.3, 2.0])
        for params in (MLParams(0.5, 0.5), MLParams(0.7, 1.0)):
            got = ml_matrix(params, np.diag(d))
            want = np.diag([ml_scalar(params, z) for z in d])
            assert np.allclose(got, want, rtol=1e-13)


class TestAlphaExp:
    def test_chain_matrix_closed_form(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        got = alpha_exp(A, 0.5, 4.0)
        want = np.array([[1.0 / np.sqrt(4.0 * np.pi), 1.0],
                         [0.0, 1.0 / np.sqrt(4.0 * np.pi)]])
        assert np.allclose(got, want, rtol=1e-14)

    def test_scalar_zero_matrix(self):
        got = alpha_exp(np.zeros((1, 1)), 0.5, 1.0)
        assert got[0, 0] == pytest.approx(1.0 / np.sqrt(np.pi), rel=1e-14)

    def test_order_one_is_matrix_exponential(self):
        A = np.array([[0.1, -0.6], [0.7, 0.2]])
        assert np.allclose(alpha_exp(A, 1.0, 2.0), expm(2.0 * A), rtol=1e-12)

    def test_domain_guard(self):
        with pytest.raises(DomainError):
            alpha_exp(np.eye(2), 0.5, 0.0)
        assert np.array_equal(alpha_exp(np.eye(2), 1.0, 0.0), np.eye(2))

    def test_semigroup_property_fails_for_fractional_order(self):
        # classical exp identities must NOT carry over at alpha = 1/2
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        B = np.array([[0.0, 0.0], [1.0, 0.0]])
        t = 1.0
        lhs = alpha_exp(A, 0.5, t) @ alpha_exp(B, 0.5, t)
        rhs = alpha_exp(A + B, 0.5, t)
        assert np.abs(lhs - rhs).max() > 1e-6


class TestStateTransition:
    def test_chain_matrix_closed_form(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        for t in (0.3, 1.0, 4.0):
            got = state_transition(A, 0.5, t)
            want = np.array([[1.0, 2.0 * np.sqrt(t) / np.sqrt(np.pi)], [0.0, 1.0]])
            assert np.allclose(got, want, rtol=1e-14)

    def test_identity_at_zero(self):
        A = np.array([[0.3, -0.2], [0.4, 0.1]])
        assert np.array_equal(state_transition(A, 0.7, 0.0), np.eye(2))

    def test_skew_matrix_frozen_oracle(self):
        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        got = state_transition(A, 0.5, 1.0)
        want = np.array([[E_HALF_ONE_SKEW_C, E_HALF_ONE_SKEW_D],
                         [-E_HALF_ONE_SKEW_D, E_HALF_ONE_SKEW_C]])
        assert np.allclose(got, want, rtol=1e-13)


class TestFracTrig:
    def test_sin_half_is_decaying_exponential(self):
        for t in np.geomspace(0.1, 10.0, 25):
            assert frac_sin(0.5, t) == pytest.approx(np.exp(-t), rel=1e-10)

    def test_cos_half_small_t_expansion(self):
        # cos_{1/2}(t) * sqrt(pi t) = 1 - 2t + O(t^2)
        for t in (1e-3, 1e-4):
            lead = frac_cos(0.5, t) * np.sqrt(np.pi * t)
            assert abs(lead - (1.0 - 2.0 * t)) < 4.0 * t**2

    def test_order_one_reduces_to_trig(self):
        for t in (0.5, 1.0, 2.0):
            assert frac_sin(1.0, t) == pytest.approx(np.sin(t), rel=1e-12)
            assert frac_cos(1.0, t) == pytest.approx(np.cos(t), rel=1e-12)

    def test_domain_guard(self):
        with pytest.raises(DomainError):
            frac_sin(0.5, 0.0)
        with pytest.raises(DomainError):
            frac_cos(0.5, -1.0)


class TestClTruncation:
    def test_first_truncation(self):
        for t in (0.1, 0.5, 2.0):
            want = (1.0 - 2.0 * t) / np.sqrt(np.pi * t)
            assert cl_truncation(1, t) == pytest.approx(want, rel=1e-14)

    def test_frozen_oracle_L2(self):
        assert cl_truncation(2, 0.5) == pytest.approx(C2_AT_HALF, rel=1e-14)

    def test_small_t_divergence(self):
        t = 1e-10
        assert cl_truncation(1, t) == pytest.approx(1.0 / np.sqrt(np.pi * t), rel=1e-6)

    def test_domain_guard(self):
        with pytest.raises(DomainError):
            cl_truncation(1, 0.0)
        with pytest.raises(DomainError):
            cl_truncation(0, 1.0)


class TestInverseKernel:
    def test_scalar_closed_form(self):
        for alpha in (0.3, 0.5, 0.9):
            for t in (0.5, 2.0):
                got = inverse_kernel(np.zeros((1, 1)), alpha, t)
                assert got[0, 0] == pytest.approx(t ** (1 - alpha) * gamma(alpha), rel=1e-13)

    def test_order_one_is_negative_exponential(self):
        A = np.array([[0.2, -0.5], [0.3, 0.1]])
        assert np.allclose(inverse_kernel(A, 1.0, 1.5), expm(-1.5 * A), rtol=1e-12)

    def test_chain_matrix_closed_form(self):
        A = np.array([[0.0, 1.0], [0.0, 0.0]])
        t = 1.0
        E = np.array([[1.0 / gamma(0.5), np.sqrt(t)], [0.0, 1.0 / gamma(0.5)]])
        want = t**0.5 * np.linalg.inv(E)
        assert np.allclose(inverse_kernel(A, 0.5, t), want, rtol=1e-13)

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9])
    def test_left_inverse_identity(self, alpha):
        mats = [
            np.array([[0.0, 1.0], [0.0, 0.0]]),
            np.array([[0.0, 1.0], [-1.0, 0.0]]),
            np.array([[0.3, -0.2, 0.1], [0.4, 0.1, -0.5], [0.0, 0.2, -0.3]]),
        ]
        for A in mats:
            for t in (0.5, 1.0, 3.0):
                g = inverse_kernel(A, alpha, t)
                err = np.abs(alpha_exp(A, alpha, t) @ g - np.eye(A.shape[0])).max()
                assert err <= 1e-10

    def test_threshold_raises(self):
        from fracctrl import SingularKernel

        A = np.array([[0.0, 1.0], [-1.0, 0.0]])
        with pytest.raises(SingularKernel):
            inverse_kernel(A, 0.5, 1.0, rcond_threshold=1.0)

    def test_domain_guard(self):
        with pytest.raises(DomainError):
            inverse_kernel(np.eye(2), 0.5, 0.0)
