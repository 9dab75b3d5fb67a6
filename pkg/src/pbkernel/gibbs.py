"""Empirical Gibbs distributions over a finite hypothesis set and their certificates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .bounds import BoundInputs, general_template_bound
from .certificate import Certificate
from .divergences import check_dist
from .dp import FiniteKernel, enumerate_samples
from .errors import ParameterError

PAPER_TAGS = {
    "gibbs-prior": "gibbs-prior-stability",
    "gibbs-dp": "gibbs-prior-differential-privacy",
}


@dataclass(frozen=True)
class GibbsKernel:
    """Weights proportional to ``base_h * exp(-gamma * emp_loss(h, sample))``.

    ``loss_table[h, z]`` is the loss of hypothesis ``h`` on atom ``z`` and
    must lie in ``[0, range_b]``. ``base`` defaults to uniform.
    """

    gamma: float
    loss_table: np.ndarray
    range_b: float = 1.0
    base: np.ndarray | None = None

    def __post_init__(self):
        if not (self.gamma >= 0.0 and math.isfinite(self.gamma)):
            raise ParameterError(f"gamma must be finite and non-negative, got {self.gamma!r}")
        if not self.range_b > 0.0:
            raise ParameterError(f"range_b must be positive, got {self.range_b!r}")
        table = np.atleast_2d(np.asarray(self.loss_table, dtype=float))
        if np.any(table < 0.0) or np.any(table > self.range_b) or np.any(np.isnan(table)):
            raise ParameterError(f"losses must lie in [0, {self.range_b}]")
        h = table.shape[0]
        base = np.full(h, 1.0 / h) if self.base is None else check_dist(self.base, "base")
        if base.shape[0] != h:
            raise ParameterError(f"base has {base.shape[0]} weights for {h} hypotheses")
        object.__setattr__(self, "loss_table", table)
        object.__setattr__(self, "base", base)

    @property
    def num_atoms(self) -> int:
        return self.loss_table.shape[1]


def _log_weights(k: GibbsKernel, emp_losses: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logits = np.log(k.base) - k.gamma * emp_losses
    return logits - logsumexp(logits, axis=-1, keepdims=True)


def gibbs_posterior(k: GibbsKernel, sample) -> np.ndarray:
    sample = np.asarray(sample, dtype=np.int64)
    if sample.size == 0:
        raise ParameterError("sample is empty")
    if sample.min() < 0 or sample.max() >= k.num_atoms:
        raise ParameterError("sample index outside the atom range")
    emp = k.loss_table[:, sample].mean(axis=1)
    return np.exp(_log_weights(k, emp))


def gibbs_kernel(k: GibbsKernel, n: int) -> FiniteKernel:
    """Tabulate the Gibbs distribution on every size-``n`` sample."""
    codes = enumerate_samples(n, k.num_atoms)
    emp = k.loss_table[:, codes].mean(axis=2).T
    log_w = _log_weights(k, emp)
    return FiniteKernel(
        n=n,
        m=k.num_atoms,
        table=np.exp(log_w),
        log_table=log_w,
        constant=k.gamma == 0.0,
        meta={
            "family": "gibbs",
            "gamma": float(k.gamma),
            "range_b": float(k.range_b),
            "loss_table": k.loss_table,
        },
    )


def gibbs_log_xi_bound(n: int, gamma: float, b: float) -> float:
    """2 b^2 (1 + 2 gamma / sqrt(n)) + log(1 + exp(b^2 / 2))."""
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n!r}")
    if gamma < 0 or b <= 0:
        raise ParameterError("need gamma >= 0 and b > 0")
    return 2.0 * b * b * (1.0 + 2.0 * gamma / math.sqrt(n)) + math.log1p(math.exp(b * b / 2.0))


def gibbs_prior_certificate(
    emp: float, kl_val: float, n: int, gamma: float, delta: float
) -> Certificate:
    """Gap bound (KL + log xi + log(1/delta)) / sqrt(n) for a Gibbs prior, losses in [0, 1]."""
    inp = BoundInputs(emp, kl_val, n, delta).unit_loss()
    log_xi = gibbs_log_xi_bound(inp.n, gamma, 1.0)
    root = math.sqrt(inp.n)
    base = general_template_bound(kl_val, log_xi, delta, lambda t: t / root, is_gap_bound=True)
    return Certificate(
        kind="gibbs-prior",
        value=base.value,
        is_gap_bound=True,
        components={
            "kl_term": kl_val / root,
            "log_xi_term": log_xi / root,
            "confidence_term": math.log(1.0 / delta) / root,
        },
        params={**inp.as_params(), "gamma": gamma, "b": 1.0},
        paper_tag=PAPER_TAGS["gibbs-prior"],
        diagnostics={"budget": base.diagnostics["budget"], "log_xi": log_xi},
    )


def gibbs_dp_certificate(
    emp: float, kl_val: float, n: int, gamma: float, delta: float
) -> Certificate:
    """Two-sided bound on |emp - risk| through the DP(2 gamma / n) property of the Gibbs prior."""
    inp = BoundInputs(emp, kl_val, n, delta).unit_loss()
    if not (gamma >= 0.0 and math.isfinite(gamma)):
        raise ParameterError(f"gamma must be finite and non-negative, got {gamma!r}")
    n = inp.n
    terms = {
        "kl_term": math.sqrt(kl_val / (2.0 * n)),
        "stability_term": gamma / n,
        "mixed_term": (0.5 * math.log(4.0 / delta)) ** 0.25 * math.sqrt(gamma) / n**0.75,
        "confidence_term": math.sqrt(math.log(4.0 * math.sqrt(n) / delta) / (2.0 * n)),
    }
    return Certificate(
        kind="gibbs-dp",
        value=math.fsum(terms.values()),
        is_gap_bound=True,
        components=terms,
        params={**inp.as_params(), "gamma": gamma},
        paper_tag=PAPER_TAGS["gibbs-dp"],
    )
