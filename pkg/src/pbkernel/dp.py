"""Finite stochastic kernels, DP(epsilon) measurement and max-information conversion."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .bounds import BoundInputs, general_template_bound
from .certificate import Certificate, risk_certificate
from .divergences import DIST_TOL, kl_inverse_upper
from .errors import ParameterError

MAX_KERNEL_ROWS = 10**6
MAX_DP_SAMPLES = 10**5

PAPER_TAGS = {
    "converted": "max-information-conversion",
    "dp-kl": "dziugaite-roy-2018-dp-prior",
}


def enumerate_samples(n: int, m: int) -> np.ndarray:
    """All size-``n`` samples over ``m`` atoms in lexicographic order, shape (m**n, n)."""
    if m**n > MAX_KERNEL_ROWS:
        raise ParameterError(f"{m}^{n} samples exceed the enumeration cap {MAX_KERNEL_ROWS}")
    codes = np.array(list(itertools.product(range(m), repeat=n)), dtype=np.int64)
    return codes.reshape(m**n, n)


def sample_index(sample, m: int) -> int:
    idx = 0
    for z in sample:
        z = int(z)
        if not 0 <= z < m:
            raise ParameterError(f"atom index {z} outside [0, {m})")
        idx = idx * m + z
    return idx


@dataclass(frozen=True)
class FiniteKernel:
    """Map from every size-``n`` sample over ``m`` atoms to a distribution over H.

    Row ``i`` of ``table`` belongs to the ``i``-th sample in lexicographic
    order (see :func:`enumerate_samples`).
    """

    n: int
    m: int
    table: np.ndarray
    log_table: np.ndarray | None = None
    constant: bool = False
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ParameterError("kernel needs n >= 1 and at least one atom")
        table = np.asarray(self.table, dtype=float)
        if table.ndim != 2 or table.shape[0] != self.m**self.n:
            raise ParameterError(
                f"kernel table has shape {table.shape}, expected ({self.m ** self.n}, |H|)"
            )
        if np.any(table < 0.0) or not np.all(np.isfinite(table)):
            raise ParameterError("kernel has negative or non-finite weights")
        sums = table.sum(axis=1)
        if np.max(np.abs(sums - 1.0)) > DIST_TOL:
            raise ParameterError("every kernel row must sum to 1")
        object.__setattr__(self, "table", table)
        if self.log_table is None:
            with np.errstate(divide="ignore"):
                object.__setattr__(self, "log_table", np.log(table))
        else:
            object.__setattr__(self, "log_table", np.asarray(self.log_table, dtype=float))

    @property
    def num_hypotheses(self) -> int:
        return self.table.shape[1]

    @property
    def num_samples(self) -> int:
        return self.table.shape[0]

    def row(self, sample) -> np.ndarray:
        if len(sample) != self.n:
            raise ParameterError(f"sample has length {len(sample)}, kernel expects {self.n}")
        return self.table[sample_index(sample, self.m)]

    @classmethod
    def constant_kernel(cls, dist, n: int, m: int) -> "FiniteKernel":
        dist = np.asarray(dist, dtype=float)
        table = np.broadcast_to(dist, (m**n, dist.shape[0])).copy()
        return cls(n=n, m=m, table=table, constant=True)

    @classmethod
    def from_function(cls, fn: Callable[[tuple], Any], n: int, m: int) -> "FiniteKernel":
        rows = [np.asarray(fn(tuple(s)), dtype=float) for s in enumerate_samples(n, m)]
        return cls(n=n, m=m, table=np.vstack(rows))


def relabel_kernel(k: FiniteKernel, mapping, num_out: int | None = None) -> FiniteKernel:
    """Push each output distribution through the hypothesis map ``h -> mapping[h]``."""
    mapping = np.asarray(mapping, dtype=np.int64)
    if mapping.shape != (k.num_hypotheses,):
        raise ParameterError("mapping needs one target per hypothesis")
    num_out = int(mapping.max()) + 1 if num_out is None else num_out
    if mapping.min() < 0 or mapping.max() >= num_out:
        raise ParameterError("mapping targets out of range")
    onehot = np.zeros((k.num_hypotheses, num_out))
    onehot[np.arange(k.num_hypotheses), mapping] = 1.0
    return FiniteKernel(n=k.n, m=k.m, table=k.table @ onehot, constant=k.constant)


def measure_dp_epsilon(k: FiniteKernel) -> float:
    """Largest log(Q_s(h) / Q_s'(h)) over samples differing in one coordinate.

    Pairs where both weights vanish are skipped; a positive weight facing a
    zero gives ``inf``.
    """
    if k.constant:
        return 0.0
    n, m = k.n, k.m
    if k.num_samples > MAX_DP_SAMPLES:
        raise ParameterError(
            f"{k.num_samples} samples exceed the exhaustive DP cap {MAX_DP_SAMPLES}"
        )
    codes = enumerate_samples(n, m)
    idx = np.arange(k.num_samples)
    positive = k.table > 0.0
    eps = 0.0
    for i in range(n):
        stride = m ** (n - 1 - i)
        for a in range(m):
            moved = codes[:, i] != a
            src = idx[moved]
            dst = src + (a - codes[moved, i]) * stride
            p_pos, q_pos = positive[src], positive[dst]
            if np.any(p_pos & ~q_pos):
                return math.inf
            both = p_pos & q_pos
            if both.any():
                diff = np.subtract(k.log_table[src], k.log_table[dst], where=both, out=np.full(both.shape, -np.inf))
                eps = max(eps, float(diff.max()))
    return eps


@dataclass(frozen=True)
class MaxInfoParams:
    n: int
    epsilon: float
    beta: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        if not (self.epsilon >= 0.0 and math.isfinite(self.epsilon)):
            raise ParameterError(f"epsilon must be finite and non-negative, got {self.epsilon!r}")
        if not 0.0 < self.beta < 1.0:
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta!r}")


def max_info_bound(p: MaxInfoParams) -> float:
    """n eps^2 / 2 + eps sqrt((n / 2) log(2 / beta))."""
    n, eps = p.n, p.epsilon
    return n * eps**2 / 2.0 + eps * math.sqrt(n / 2.0 * math.log(2.0 / p.beta))


def convert_certificate(
    zeta_log: float,
    kl_val: float,
    epsilon: float,
    n: int,
    delta: float,
    f_inverse: Callable[[float], float],
    *,
    is_gap_bound: bool = False,
) -> Certificate:
    """Turn a data-free bound into one for a DP(epsilon) prior kernel.

    The budget becomes ``KL + zeta_log + log(2/delta) + I`` where ``I`` is
    the max-information bound at ``beta = delta / 2``.
    """
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta!r}")
    info = max_info_bound(MaxInfoParams(n, epsilon, delta / 2.0))
    base = general_template_bound(
        kl_val, zeta_log + math.log(2.0) + info, delta, f_inverse, is_gap_bound=is_gap_bound
    )
    return Certificate(
        kind="dp-converted",
        value=base.value,
        is_gap_bound=is_gap_bound,
        components={"f_inverse(budget)": base.value},
        params={"zeta_log": zeta_log, "kl_val": kl_val, "epsilon": epsilon, "n": n, "delta": delta},
        paper_tag=PAPER_TAGS["converted"],
        diagnostics={"budget": base.diagnostics["budget"], "max_information": info},
    )


def dp_kl_certificate(emp: float, kl_val: float, n: int, epsilon: float, delta: float) -> Certificate:
    """pac-bayes-kl risk bound for a DP(epsilon) data-dependent prior, zeta(n) = 2 sqrt(n)."""
    inp = BoundInputs(emp, kl_val, n, delta).unit_loss()
    conv = convert_certificate(
        math.log(2.0 * math.sqrt(inp.n)),
        kl_val,
        epsilon,
        inp.n,
        delta,
        lambda b: kl_inverse_upper(emp, b / inp.n),
    )
    budget = conv.diagnostics["budget"]
    return risk_certificate(
        "dp-kl",
        {"emp": emp, "kl_excess": conv.value - emp},
        {**inp.as_params(), "epsilon": epsilon},
        PAPER_TAGS["dp-kl"],
        diagnostics={
            "budget": budget,
            "kl_budget": budget / inp.n,
            "max_information": conv.diagnostics["max_information"],
        },
    )
