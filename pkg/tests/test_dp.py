import math

import numpy as np
import pytest

from pbkernel.bounds import BoundInputs, pac_bayes_kl_bound
from pbkernel.divergences import kl_inverse_upper
from pbkernel.dp import (
    FiniteKernel,
    MaxInfoParams,
    convert_certificate,
    dp_kl_certificate,
    enumerate_samples,
    max_info_bound,
    measure_dp_epsilon,
    relabel_kernel,
)
from pbkernel.errors import ParameterError
from pbkernel.gibbs import GibbsKernel, gibbs_kernel
from pbkernel.harness import certificate_violation_experiment, random_world

# frozen from tests/oracles/derive_values.py
DP_KL = 0.27106060942023017161


def brute_epsilon(k: FiniteKernel) -> float:
    """Pairwise loop over adjacent samples, independent of the vectorised path."""
    samples = [tuple(s) for s in enumerate_samples(k.n, k.m)]
    best = 0.0
    for s in samples:
        for i in range(k.n):
            for a in range(k.m):
                if a == s[i]:
                    continue
                t = s[:i] + (a,) + s[i + 1:]
                for p, q in zip(k.row(s), k.row(t)):
                    if p > 0 and q == 0:
                        return math.inf
                    if p > 0:
                        best = max(best, math.log(p / q))
    return best


class TestKernel:
    def test_rows_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            FiniteKernel(n=1, m=2, table=np.array([[0.5, 0.4], [0.5, 0.5]]))

    def test_shape(self):
        with pytest.raises(ParameterError):
            FiniteKernel(n=2, m=2, table=np.full((3, 2), 0.5))

    def test_lexicographic_order(self):
        codes = enumerate_samples(2, 3)
        assert codes[5].tolist() == [1, 2]


class TestDpMeasure:
    def test_constant_kernel(self):
        k = FiniteKernel.constant_kernel([0.2, 0.8], 3, 2)
        assert measure_dp_epsilon(k) == 0.0

    def test_gibbs_gamma_one(self, rng):
        losses = rng.random((3, 2))
        k = gibbs_kernel(GibbsKernel(1.0, losses), 2)
        eps = measure_dp_epsilon(k)
        assert eps <= 1.0
        assert eps == pytest.approx(brute_epsilon(k), rel=1e-12)

    def test_hard_zero(self):
        # sample (0,) puts mass on h=0, sample (1,) does not
        k = FiniteKernel(n=1, m=2, table=np.array([[0.5, 0.5], [0.0, 1.0]]))
        assert measure_dp_epsilon(k) == math.inf

    def test_matches_brute_force(self, rng):
        for _ in range(10):
            table = rng.dirichlet(np.ones(3), size=9)
            k = FiniteKernel(n=2, m=3, table=table)
            assert measure_dp_epsilon(k) == pytest.approx(brute_epsilon(k), rel=1e-12)

    def test_post_processing(self, rng):
        for _ in range(10):
            k = FiniteKernel(n=2, m=3, table=rng.dirichlet(np.ones(5), size=9))
            mapped = relabel_kernel(k, rng.integers(0, 3, size=5), 3)
            assert measure_dp_epsilon(mapped) <= measure_dp_epsilon(k) + 1e-12

    def test_cap(self):
        k = FiniteKernel(n=11, m=3, table=np.full((3**11, 1), 1.0))
        with pytest.raises(ParameterError):
            measure_dp_epsilon(k)


class TestMaxInfo:
    def test_zero_eps(self):
        assert max_info_bound(MaxInfoParams(10, 0.0, 0.1)) == 0.0

    def test_arranged(self):
        assert max_info_bound(MaxInfoParams(2, 1.0, 2 / math.e)) == pytest.approx(2.0, rel=1e-15)

    def test_monotone(self):
        e = [max_info_bound(MaxInfoParams(10, x, 0.1)) for x in (0.0, 0.1, 0.5, 2.0)]
        n = [max_info_bound(MaxInfoParams(x, 0.3, 0.1)) for x in (1, 10, 100)]
        assert e == sorted(e) and n == sorted(n)

    def test_beta_range(self):
        with pytest.raises(ParameterError):
            MaxInfoParams(10, 0.1, 1.0)


class TestConversion:
    def test_zero_eps_halves_delta(self):
        n, kl, delta, emp = 120, 1.5, 0.05, 0.2
        conv = convert_certificate(math.log(n + 1), kl, 0.0, n, delta, lambda b: kl_inverse_upper(emp, b / n))
        free = pac_bayes_kl_bound(BoundInputs(emp, kl, n, delta / 2))
        assert conv.value == pytest.approx(free.value, rel=1e-12)
        assert conv.diagnostics["budget"] == pytest.approx(free.diagnostics["budget"], rel=1e-14)

    def test_budget_differs_by_log2(self):
        n, kl, delta = 50, 1.0, 0.1
        conv = convert_certificate(math.log(n + 1), kl, 0.0, n, delta, lambda b: b)
        assert conv.diagnostics["budget"] - (kl + math.log(n + 1) + math.log(1 / delta)) == pytest.approx(
            math.log(2), rel=1e-13
        )

    def test_equivalence_with_dp_kl(self):
        n, eps, kl, delta, emp = 100, 0.02, 2.0, 0.05, 0.1
        conv = convert_certificate(
            math.log(2 * math.sqrt(n)), kl, eps, n, delta, lambda b: kl_inverse_upper(emp, b / n)
        )
        assert conv.value == dp_kl_certificate(emp, kl, n, eps, delta).value

    def test_budget_increasing_in_eps(self):
        b = [convert_certificate(1.0, 1.0, e, 50, 0.05, lambda x: x).value for e in (0, 0.01, 0.1, 1)]
        assert all(x < y for x, y in zip(b, b[1:]))


class TestDpKl:
    def test_analytic(self):
        n, delta = 100, 0.05
        expected = -math.expm1(-math.log(4 * math.sqrt(n) / delta) / n)
        assert dp_kl_certificate(0.0, 0.0, n, 0.0, delta).value == pytest.approx(expected, rel=1e-13)

    def test_derived(self):
        cert = dp_kl_certificate(0.1, 2.0, 100, 0.02, 0.05)
        assert cert.value == pytest.approx(DP_KL, rel=1e-13)

    def test_eps_costs(self):
        assert dp_kl_certificate(0.1, 2.0, 100, 0.05, 0.05).value >= dp_kl_certificate(0.1, 2.0, 100, 0.0, 0.05).value


def test_conversion_sound_exhaustively(rng):
    # random data-dependent prior kernels, DP level measured exactly
    worst = 0.0
    for _ in range(20):
        w = random_world(rng, m=3, n=3, h=4, prior="kernel", posterior="gibbs", posterior_gamma=8.0)
        report = certificate_violation_experiment(w, "dp-kl", {"delta": 0.1})
        worst = max(worst, report.violation_probability)
    assert worst <= 0.1
