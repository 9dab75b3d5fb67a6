"""Exact oracles on finite worlds: exponential moments and posterior losses."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import logsumexp

from ..divergences import binary_kl_array
from ..dp import sample_index
from ..errors import ParameterError
from .worlds import FiniteWorld

MAX_XI_TERMS = 10**6
SWAP_TOL = 1e-12

F_KINDS = ("sqrt_n_gap", "n_kl_gap", "lambda_n_gap_minus_moment", "custom-table")


@dataclass(frozen=True)
class ExpMomentSpec:
    """Which f(s, h) enters the exponential moment.

    ``sqrt_n_gap``: sqrt(n) (L(h) - L_hat(h, s)).
    ``n_kl_gap``: n kl(L_hat(h, s) || L(h)), losses in [0, 1].
    ``lambda_n_gap_minus_moment``: n lam (L - L_hat) - n lam^2 M / 2; needs
    ``lambda``, ``M`` defaults to the world's exact max second moment.
    ``custom-table``: ``table`` of shape (num_samples, |H|).
    """

    f_kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.f_kind not in F_KINDS:
            raise ParameterError(f"unknown f_kind {self.f_kind!r}; choose from {F_KINDS}")
        if self.f_kind == "lambda_n_gap_minus_moment" and not self.params.get("lambda", 0) > 0:
            raise ParameterError("lambda_n_gap_minus_moment needs a positive 'lambda'")
        if self.f_kind == "custom-table" and "table" not in self.params:
            raise ParameterError("custom-table needs a 'table'")


def exp_moment_table(w: FiniteWorld, f: ExpMomentSpec) -> np.ndarray:
    """f(s, h) for every enumerated sample s (rows) and hypothesis h (columns)."""
    n, emp, pop = w.n, w.emp_table, w.pop[None, :]
    if f.f_kind == "sqrt_n_gap":
        return math.sqrt(n) * (pop - emp)
    if f.f_kind == "n_kl_gap":
        if w.loss_table.min() < 0.0 or w.loss_table.max() > 1.0:
            raise ParameterError("n_kl_gap needs losses in [0, 1]")
        return n * binary_kl_array(np.clip(emp, 0.0, 1.0), np.clip(pop, 0.0, 1.0))
    if f.f_kind == "lambda_n_gap_minus_moment":
        lam = float(f.params["lambda"])
        M = float(f.params.get("M", w.second_moment()))
        return n * lam * (pop - emp) - n * lam * lam * M / 2.0
    table = np.asarray(f.params["table"], dtype=float)
    if table.shape != (w.num_samples, w.num_hypotheses):
        raise ParameterError(
            f"custom table has shape {table.shape}, expected {(w.num_samples, w.num_hypotheses)}"
        )
    return table


def _joint_log_weights(w: FiniteWorld) -> tuple[np.ndarray, np.ndarray]:
    """log P(s) + log Q0_s(h), and the mask of positive joint weight."""
    mask = (w.sample_probs > 0.0)[:, None] & (w.prior.table > 0.0)
    return w.log_sample_probs[:, None] + w.prior.log_table, mask


def brute_force_log_xi(w: FiniteWorld, f: ExpMomentSpec, check_swap: bool = True) -> float:
    """log of the sum over samples and hypotheses of P(s) Q0_s(h) exp(f(s, h)).

    With a constant prior the sum is also taken hypothesis-first, and the
    two orders must agree to within ``SWAP_TOL`` (relative).
    """
    if w.num_samples * w.num_hypotheses > MAX_XI_TERMS:
        raise ParameterError(
            f"{w.num_samples} samples x {w.num_hypotheses} hypotheses exceed {MAX_XI_TERMS} terms"
        )
    table = exp_moment_table(w, f)
    logw, mask = _joint_log_weights(w)
    terms = np.where(mask, logw + np.where(mask, table, 0.0), -np.inf)
    log_xi = float(logsumexp(terms))
    if check_swap and w.prior.constant:
        swapped = xi_swap_log(w, f, table)
        if not abs(math.expm1(swapped - log_xi)) <= SWAP_TOL:
            raise AssertionError(f"swap identity failed: log xi {log_xi!r} vs {swapped!r}")
    return log_xi


def brute_force_xi(w: FiniteWorld, f: ExpMomentSpec) -> float:
    return math.exp(brute_force_log_xi(w, f))


def xi_swap_log(w: FiniteWorld, f: ExpMomentSpec, table: np.ndarray | None = None) -> float:
    """Hypothesis-outer evaluation of log xi; only defined for a constant prior."""
    if not w.prior.constant:
        raise ParameterError("the swapped order needs a data-free prior")
    table = exp_moment_table(w, f) if table is None else table
    keep = w.sample_probs > 0.0
    q0 = w.prior.table[0]
    per_h = []
    for h in np.flatnonzero(q0 > 0.0):
        inner = logsumexp(w.log_sample_probs[keep] + table[keep, h])
        per_h.append(math.log(q0[h]) + inner)
    return float(logsumexp(per_h))


def expected_f(w: FiniteWorld, f: ExpMomentSpec) -> float:
    """E[f(S, H)] with S ~ P and H ~ Q0_S."""
    table = exp_moment_table(w, f)
    weights = w.sample_probs[:, None] * w.prior.table
    mask = weights > 0.0
    return math.fsum((weights[mask] * table[mask]).ravel())


def mc_losses_finite(w: FiniteWorld, sample) -> tuple[float, float]:
    """(Q_s[L_hat_s], Q_s[L]) for the posterior at ``sample``; exact on finite worlds."""
    if len(sample) != w.n:
        raise ParameterError(f"sample has length {len(sample)}, world has n = {w.n}")
    idx = sample_index(sample, w.num_atoms)
    q = w.posterior.table[idx]
    return float(q @ w.emp_table[idx]), float(q @ w.pop)
