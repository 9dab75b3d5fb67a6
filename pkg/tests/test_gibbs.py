import math

import numpy as np
import pytest

from pbkernel.dp import measure_dp_epsilon
from pbkernel.errors import ParameterError
from pbkernel.gibbs import (
    GibbsKernel,
    gibbs_dp_certificate,
    gibbs_kernel,
    gibbs_log_xi_bound,
    gibbs_posterior,
    gibbs_prior_certificate,
)

# frozen from tests/oracles/derive_values.py
GIBBS_WEIGHTS = [0.40175957853335544193, 0.32893292228890669526, 0.26930749917773786281]
GIBBS_PRIOR = 1.2969809257734097674
GIBBS_DP = 0.52695799636092620061
LOG_1P_SQRT_E = math.log(1 + math.sqrt(math.e))

LOSSES = np.array([[0.2, 0.9, 0.5], [0.7, 0.1, 0.4], [0.5, 0.5, 1.0]])


class TestPosterior:
    def test_zero_gamma_is_base(self):
        base = np.array([0.5, 0.3, 0.2])
        w = gibbs_posterior(GibbsKernel(0.0, LOSSES, base=base), [0, 1, 2])
        np.testing.assert_allclose(w, base, rtol=1e-15)

    def test_constant_column_is_base(self):
        table = np.array([[0.4, 0.1], [0.4, 0.9]])
        w = gibbs_posterior(GibbsKernel(3.0, table), [0, 0, 0])
        np.testing.assert_allclose(w, [0.5, 0.5], rtol=1e-15)

    def test_derived_weights(self):
        w = gibbs_posterior(GibbsKernel(1.0, LOSSES), [0, 2])
        np.testing.assert_allclose(w, GIBBS_WEIGHTS, rtol=1e-14)
        assert abs(w.sum() - 1.0) <= 1e-12

    def test_shift_invariance(self, rng):
        table = rng.random((4, 3)) * 0.5
        shifted = table.copy()
        shifted[:, 1] += 0.3
        a = gibbs_posterior(GibbsKernel(7.0, table), [1, 0, 1])
        b = gibbs_posterior(GibbsKernel(7.0, shifted), [1, 0, 1])
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_large_gamma_is_stable(self):
        w = gibbs_posterior(GibbsKernel(1000.0, LOSSES), [0, 2])
        assert np.all(np.isfinite(w)) and abs(w.sum() - 1.0) <= 1e-12

    def test_empty_sample(self):
        with pytest.raises(ParameterError):
            gibbs_posterior(GibbsKernel(1.0, LOSSES), [])

    def test_losses_out_of_range(self):
        with pytest.raises(ParameterError):
            GibbsKernel(1.0, LOSSES + 0.5)

    def test_kernel_table_matches_posterior(self):
        k = GibbsKernel(2.0, LOSSES)
        fk = gibbs_kernel(k, 2)
        np.testing.assert_allclose(fk.row((1, 2)), gibbs_posterior(k, [1, 2]), rtol=1e-15)


class TestLogXi:
    def test_gamma_zero(self):
        for n in (1, 7, 100):
            assert gibbs_log_xi_bound(n, 0.0, 1.0) == pytest.approx(2 + LOG_1P_SQRT_E, rel=1e-15)

    def test_unit_ratio(self):
        assert gibbs_log_xi_bound(16, 2.0, 1.0) == pytest.approx(4 + LOG_1P_SQRT_E, rel=1e-15)

    def test_monotone(self):
        g = [gibbs_log_xi_bound(10, x, 1.0) for x in (0, 0.5, 2, 10)]
        b = [gibbs_log_xi_bound(10, 1.0, x) for x in (0.1, 0.5, 1, 2)]
        assert g == sorted(g) and b == sorted(b)


class TestCertificates:
    def test_prior_kl_zero(self):
        n, g, d = 64, 3.0, 0.1
        expected = (2 * (1 + 2 * g / 8) + math.log((1 + math.sqrt(math.e)) / d)) / 8
        assert gibbs_prior_certificate(0.2, 0.0, n, g, d).value == pytest.approx(expected, rel=1e-14)

    def test_prior_derived(self):
        cert = gibbs_prior_certificate(0.1, 3.0, 100, 10.0, 0.05)
        assert cert.value == pytest.approx(GIBBS_PRIOR, rel=1e-14)
        assert cert.is_gap_bound
        assert math.isclose(math.fsum(cert.components.values()), cert.value, rel_tol=1e-12)

    def test_prior_decreasing_in_n(self):
        v = [gibbs_prior_certificate(0.1, 2.0, n, 5.0, 0.05).value for n in (10, 100, 1000, 10**4)]
        assert all(a > b for a, b in zip(v, v[1:]))

    def test_dp_gamma_zero(self):
        n, d = 50, 0.05
        cert = gibbs_dp_certificate(0.1, 0.0, n, 0.0, d)
        assert cert.value == pytest.approx(math.sqrt(math.log(4 * math.sqrt(n) / d) / (2 * n)), rel=1e-15)

    def test_dp_derived(self):
        cert = gibbs_dp_certificate(0.1, 3.0, 100, 10.0, 0.05)
        assert cert.value == pytest.approx(GIBBS_DP, rel=1e-14)
        assert len(cert.components) == 4

    def test_dp_rate(self):
        # with gamma and KL fixed the value times sqrt(n / log n) stays bounded
        ratios = []
        for n in (10**4, 10**6, 10**8):
            v = gibbs_dp_certificate(0.1, 1.0, n, 1.0, 0.05).value
            ratios.append(v * math.sqrt(n / math.log(n)))
        assert max(ratios) / min(ratios) < 1.5


def test_measured_dp_within_guarantee(rng):
    for gamma in (0.5, 1.0, 2.0, 10.0):
        for n in (1, 2, 3):
            losses = rng.random((4, 3))
            eps = measure_dp_epsilon(gibbs_kernel(GibbsKernel(gamma, losses), n))
            assert eps <= 2 * gamma / n
