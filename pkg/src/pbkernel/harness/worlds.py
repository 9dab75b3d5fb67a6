"""Finite data worlds: atom distribution, loss table, prior and posterior kernels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..divergences import check_dist
from ..dp import FiniteKernel, enumerate_samples
from ..errors import ParameterError
from ..gibbs import GibbsKernel, gibbs_kernel

MAX_ENUMERATION = 10**5


@dataclass(frozen=True)
class FiniteWorld:
    """i.i.d. samples of size ``n`` from ``atom_probs`` with a finite H.

    ``loss_table[h, z]`` is the loss of hypothesis ``h`` on atom ``z``.
    ``prior`` may be a :class:`FiniteKernel` or a plain distribution, which is
    wrapped as a constant kernel.
    """

    atom_probs: np.ndarray
    n: int
    loss_table: np.ndarray
    prior: FiniteKernel
    posterior: FiniteKernel
    loss_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        probs = check_dist(self.atom_probs, "atom_probs")
        table = np.atleast_2d(np.asarray(self.loss_table, dtype=float))
        m, h = probs.shape[0], table.shape[0]
        if table.shape[1] != m:
            raise ParameterError(f"loss table has {table.shape[1]} columns for {m} atoms")
        lo, hi = self.loss_range
        if np.any(table < lo) or np.any(table > hi):
            raise ParameterError(f"losses fall outside the declared range [{lo}, {hi}]")
        if m**self.n > MAX_ENUMERATION:
            raise ParameterError(f"{m}^{self.n} samples exceed the world cap {MAX_ENUMERATION}")
        prior = self.prior
        if not isinstance(prior, FiniteKernel):
            prior = FiniteKernel.constant_kernel(check_dist(prior, "prior"), self.n, m)
        for name, k in (("prior", prior), ("posterior", self.posterior)):
            if (k.n, k.m, k.num_hypotheses) != (self.n, m, h):
                raise ParameterError(
                    f"{name} kernel is over (n={k.n}, m={k.m}, |H|={k.num_hypotheses}), "
                    f"world has (n={self.n}, m={m}, |H|={h})"
                )
        codes = enumerate_samples(self.n, m)
        with np.errstate(divide="ignore"):
            log_probs = np.log(probs)[codes].sum(axis=1)
        object.__setattr__(self, "atom_probs", probs)
        object.__setattr__(self, "loss_table", table)
        object.__setattr__(self, "prior", prior)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "log_sample_probs", log_probs)
        object.__setattr__(self, "sample_probs", np.prod(probs[codes], axis=1))
        object.__setattr__(self, "emp_table", table[:, codes].mean(axis=2).T)
        object.__setattr__(self, "pop", table @ probs)

    @property
    def num_atoms(self) -> int:
        return self.atom_probs.shape[0]

    @property
    def num_hypotheses(self) -> int:
        return self.loss_table.shape[0]

    @property
    def num_samples(self) -> int:
        return self.codes.shape[0]

    def second_moment(self) -> float:
        """max_h E[loss(h, Z)^2], exact."""
        return float(np.max(self.loss_table**2 @ self.atom_probs))


def random_kernel(rng: np.random.Generator, n: int, m: int, h: int, concentration=1.0) -> FiniteKernel:
    table = rng.dirichlet(np.full(h, concentration), size=m**n)
    return FiniteKernel(n=n, m=m, table=table)


def random_world(
    rng: np.random.Generator,
    m: int = 3,
    n: int = 3,
    h: int = 4,
    prior: str = "uniform",
    posterior: str = "gibbs",
    prior_gamma: float = 1.0,
    posterior_gamma: float = 5.0,
    binary_losses: bool = False,
) -> FiniteWorld:
    """Random world with losses in [0, 1].

    prior: ``uniform``, ``dirichlet`` (random constant), ``gibbs`` or ``kernel``
    (random data-dependent). posterior: ``gibbs``, ``kernel``, ``prior`` or
    ``erm`` (point mass on the first empirical minimiser).
    """
    probs = rng.dirichlet(np.ones(m))
    if binary_losses:
        losses = rng.integers(0, 2, size=(h, m)).astype(float)
    else:
        losses = rng.random((h, m))
    if prior == "uniform":
        prior_k = FiniteKernel.constant_kernel(np.full(h, 1.0 / h), n, m)
    elif prior == "dirichlet":
        prior_k = FiniteKernel.constant_kernel(rng.dirichlet(np.ones(h)), n, m)
    elif prior == "gibbs":
        prior_k = gibbs_kernel(GibbsKernel(prior_gamma, losses), n)
    elif prior == "kernel":
        prior_k = random_kernel(rng, n, m, h)
    else:
        raise ParameterError(f"unknown prior kind {prior!r}")
    if posterior == "gibbs":
        post_k = gibbs_kernel(GibbsKernel(posterior_gamma, losses), n)
    elif posterior == "kernel":
        post_k = random_kernel(rng, n, m, h)
    elif posterior == "prior":
        post_k = prior_k
    elif posterior == "erm":
        codes = enumerate_samples(n, m)
        best = np.argmin(losses[:, codes].mean(axis=2).T, axis=1)
        post_k = FiniteKernel(n=n, m=m, table=np.eye(h)[best])
    else:
        raise ParameterError(f"unknown posterior kind {posterior!r}")
    return FiniteWorld(probs, n, losses, prior_k, post_k)
