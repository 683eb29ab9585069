"""Tests for the stable log-domain kernels."""

import math

import numpy as np
import pytest

from cavity2sat.numerics import log1mexp, log_sigmoid, logit, sigmoid, softplus, truncated_log_of_log


class TestKernels:

    def test_softplus(self):
        np.testing.assert_allclose(softplus([0.0, 1.0, -1.0]), [math.log(2), math.log1p(math.e), math.log1p(1 / math.e)])
        assert softplus(1000.0) == 1000.0
        assert softplus(-1000.0) == 0.0

    def test_sigmoid(self):
        assert sigmoid(0.0) == 0.5
        assert sigmoid(800.0) == 1.0
        assert sigmoid(-800.0) == 0.0
        np.testing.assert_allclose(sigmoid([2.0, -2.0]).sum(), 1.0)

    def test_log_sigmoid_is_finite_far_out(self):
        assert log_sigmoid(-1000.0) == -1000.0
        assert log_sigmoid(0.0) == pytest.approx(-math.log(2))

    def test_logit_inverts_sigmoid(self):
        z = np.linspace(-15, 15, 31)
        np.testing.assert_allclose(logit(sigmoid(z)), z, atol=1e-7)
        assert logit(1.0) == math.inf

    def test_log1mexp(self):
        x = np.array([-1e-20, -0.5, -1.0, -5.0])
        np.testing.assert_allclose(log1mexp(x), np.log(-np.expm1(x)), rtol=1e-12)
        assert log1mexp(0.0) == -math.inf
        assert float(log1mexp(-50.0)) == pytest.approx(-math.exp(-50.0), rel=1e-12)
        assert float(log1mexp(-700.0)) == pytest.approx(0.0, abs=1e-300)

    def test_truncated_log(self):
        assert truncated_log_of_log(-5.0, None) == -5.0
        assert truncated_log_of_log(-5.0, 0.1) == pytest.approx(math.log(0.1))
        assert truncated_log_of_log(-1.0, 0.1) == -1.0
