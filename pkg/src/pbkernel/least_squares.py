"""Random-design least squares: spectral statistics, exact exponential moment, Gibbs KL.

The prior is ``N(0, I / (gamma * lam))`` and the posterior family is
``q_S(w) ∝ exp(-gamma * L_hat_{S,alpha}(w))``, i.e.
``N(Sigma_hat_alpha^-1 S_hat, (gamma * Sigma_hat_alpha)^-1)``. Losses carry
the factor 1/2: ``L(w) = E[(w'X - Y)^2] / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .certificate import Certificate
from .divergences import SYMMETRY_TOL, GaussianSpec, gaussian_kl
from .errors import InapplicableBoundError, ParameterError

NORM_TOL = 1e-12

PAPER_TAGS = {
    "ls-gap": "least-squares-probability-one",
    "ls-data-dependent": "least-squares-data-dependent",
}


def _symmetric(name: str, a) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ParameterError(f"{name} must be square, got shape {a.shape}")
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_TOL:
        raise ParameterError(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class LsProblem:
    """Population moments together with one observed dataset."""

    sigma: np.ndarray
    s_vec: np.ndarray
    ey2: float
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        sigma = _symmetric("sigma", self.sigma)
        d = sigma.shape[0]
        if np.linalg.eigvalsh(sigma)[0] <= 0.0:
            raise ParameterError("sigma must be positive definite")
        s_vec = np.atleast_1d(np.asarray(self.s_vec, dtype=float))
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1 and d == 1:
            x = x[:, None]
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if s_vec.shape != (d,):
            raise ParameterError(f"s_vec has shape {s_vec.shape}, expected ({d},)")
        if x.ndim != 2 or x.shape[1] != d or x.shape[0] < 1:
            raise ParameterError(f"x has shape {x.shape}, expected (n, {d}) with n >= 1")
        if y.shape != (x.shape[0],):
            raise ParameterError(f"y has {y.shape[0]} labels for {x.shape[0]} inputs")
        if not self.ey2 >= 0.0:
            raise ParameterError(f"ey2 must be non-negative, got {self.ey2!r}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "s_vec", s_vec)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ey2", float(self.ey2))


@dataclass(frozen=True)
class SpectralStats:
    sigma: np.ndarray
    sigma_hat: np.ndarray
    s_vec: np.ndarray
    s_hat: np.ndarray
    ey2: float
    mean_y2: float
    c_gap: float
    pop_eigs: np.ndarray
    emp_eigs: np.ndarray
    n: int
    max_x_norm: float

    @property
    def d(self) -> int:
        return self.sigma.shape[0]

    def emp_eigs_for(self, lam: float) -> np.ndarray:
        """Eigenvalues of Sigma_hat + lam I, largest first."""
        return self.emp_eigs + lam

    def regularized(self, lam: float) -> np.ndarray:
        return self.sigma_hat + lam * np.eye(self.d)


def compute_stats(p: LsProblem) -> SpectralStats:
    n = p.x.shape[0]
    sigma_hat = _symmetric("sigma_hat", p.x.T @ p.x / n)
    mean_y2 = float(np.mean(p.y**2))
    return SpectralStats(
        sigma=p.sigma,
        sigma_hat=sigma_hat,
        s_vec=p.s_vec,
        s_hat=p.x.T @ p.y / n,
        ey2=p.ey2,
        mean_y2=mean_y2,
        c_gap=p.ey2 - mean_y2,
        pop_eigs=np.linalg.eigvalsh(p.sigma)[::-1],
        emp_eigs=np.linalg.eigvalsh(sigma_hat)[::-1],
        n=n,
        max_x_norm=float(np.max(np.linalg.norm(p.x, axis=1))),
    )


def difference_eigs(st: SpectralStats, lam: float) -> np.ndarray:
    """Eigenvalues of Sigma_hat + lam I - Sigma, largest first."""
    diff = st.regularized(lam) - st.sigma
    return np.linalg.eigvalsh(0.5 * (diff + diff.T))[::-1]


def lambda_validity_margin(st: SpectralStats, lam: float) -> float:
    """Smallest eigenvalue of Sigma_hat + lam I - Sigma; the bounds need it positive."""
    return float(difference_eigs(st, lam)[-1])


def _require_margin(st: SpectralStats, lam: float) -> float:
    margin = lambda_validity_margin(st, lam)
    if not margin > 0.0:
        raise InapplicableBoundError(
            f"lambda={lam!r} gives margin {margin!r}; need lambda > max eig(Sigma - Sigma_hat)"
        )
    return margin


def max_regularized_gap(st: SpectralStats, lam: float) -> float:
    """sup_w { L(w) - L_hat(w) - lam |w|^2 / 2 } = C/2 + r' D^-1 r / 2.

    ``r = s - S_hat`` and ``D = Sigma_hat + lam I - Sigma``. The objective is
    concave whenever ``D`` is positive definite, so the stationary point is
    its maximum.
    """
    _require_margin(st, lam)
    diff = st.regularized(lam) - st.sigma
    r = st.s_vec - st.s_hat
    quad = float(r @ linalg.solve(0.5 * (diff + diff.T), r, assume_a="pos"))
    return 0.5 * st.c_gap + 0.5 * quad


# the closed form is a supremum over w, despite the historical name
regularized_gap_min = max_regularized_gap


def ls_log_exp_moment(st: SpectralStats, gamma: float, lam: float) -> float:
    """log of the prior expectation of exp(gamma * (L(w) - L_hat(w)))."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma!r}")
    gap = max_regularized_gap(st, lam)
    return gamma * gap + 0.5 * float(np.sum(np.log(lam / difference_eigs(st, lam))))


@dataclass(frozen=True)
class LsPosteriorSpec:
    alpha: float
    gamma: float
    lam: float

    def __post_init__(self):
        for name in ("alpha", "gamma", "lam"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ParameterError(f"{name} must be positive and finite, got {value!r}")


def ls_posterior(st: SpectralStats, spec: LsPosteriorSpec) -> GaussianSpec:
    reg = st.regularized(spec.alpha)
    mean = linalg.solve(reg, st.s_hat, assume_a="pos")
    return GaussianSpec(mean, np.linalg.inv(spec.gamma * reg))


def ls_kl_term(st: SpectralStats, spec: LsPosteriorSpec) -> float:
    """KL between the Gibbs posterior and the N(0, I / (gamma lam)) prior."""
    reg = st.regularized(spec.alpha)
    post = GaussianSpec(linalg.solve(reg, st.s_hat, assume_a="pos"), np.linalg.inv(reg))
    prior = GaussianSpec(np.zeros(st.d), np.eye(st.d) / spec.lam)
    return gaussian_kl(post, prior, scale=spec.gamma)


def ls_kl_relaxed(st: SpectralStats, spec: LsPosteriorSpec) -> float:
    """Upper bound on :func:`ls_kl_term` valid when every input has norm at most 1."""
    if st.max_x_norm > 1.0 + NORM_TOL:
        raise ParameterError(f"relaxed KL needs |x_i| <= 1, largest norm is {st.max_x_norm!r}")
    d, a, lam = st.d, spec.alpha, spec.lam
    reg = st.regularized(a)
    m = linalg.solve(reg, st.s_hat, assume_a="pos")
    smallest = float(st.emp_eigs[-1])
    return 0.5 * (
        d * math.log((1.0 + a) / lam)
        + d * (lam / (smallest + a) - 1.0)
        + lam * spec.gamma * float(m @ m)
    )


def population_loss(st: SpectralStats, w) -> float:
    w = np.asarray(w, dtype=float)
    return 0.5 * (st.ey2 - 2.0 * float(st.s_vec @ w) + float(w @ st.sigma @ w))


def empirical_loss(st: SpectralStats, w) -> float:
    w = np.asarray(w, dtype=float)
    return 0.5 * (st.mean_y2 - 2.0 * float(st.s_hat @ w) + float(w @ st.sigma_hat @ w))


def posterior_losses(st: SpectralStats, post: GaussianSpec) -> tuple[float, float]:
    """(E[L_hat], E[L]) under a Gaussian over weights, in closed form."""
    m, v = post.mean, post.covariance
    emp = empirical_loss(st, m) + 0.5 * float(np.sum(st.sigma_hat * v))
    pop = population_loss(st, m) + 0.5 * float(np.sum(st.sigma * v))
    return emp, pop


def min_population_loss(st: SpectralStats) -> float:
    return 0.5 * (st.ey2 - float(st.s_vec @ linalg.solve(st.sigma, st.s_vec, assume_a="pos")))


def ls_gap_certificate(st: SpectralStats, kl_val: float, gamma: float, lam: float) -> Certificate:
    """Probability-one bound on the posterior-averaged gap Q_S[L] - Q_S[L_hat].

    The value uses the sharp first term :func:`max_regularized_gap`. The
    label-noise form ``min_w L(w)`` is reported under ``diagnostics``; it is
    not a guaranteed replacement for the sharp term.
    """
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma!r}")
    if not kl_val >= 0:
        raise ParameterError(f"kl_val must be non-negative, got {kl_val!r}")
    margin = _require_margin(st, lam)
    terms = {
        "regularized_gap": max_regularized_gap(st, lam),
        "kl_term": kl_val / gamma,
        "log_det_term": float(np.sum(np.log(lam / difference_eigs(st, lam)))) / (2.0 * gamma),
    }
    relaxed = min_population_loss(st)
    return Certificate(
        kind="ls-gap",
        value=math.fsum(terms.values()),
        is_gap_bound=True,
        components=terms,
        params={"kl_val": kl_val, "gamma": gamma, "lambda": lam, "n": st.n, "d": st.d},
        paper_tag=PAPER_TAGS["ls-gap"],
        diagnostics={
            "margin": margin,
            "relaxed_first_term": relaxed,
            "relaxed_value": relaxed + terms["kl_term"] + terms["log_det_term"],
        },
    )


def empirical_eps(st: SpectralStats) -> float:
    """Largest eigenvalue of Sigma - Sigma_hat."""
    diff = st.sigma - st.sigma_hat
    return float(np.linalg.eigvalsh(0.5 * (diff + diff.T))[-1])


def ls_data_dependent_certificate(
    st: SpectralStats, spec: LsPosteriorSpec, c_mult: float
) -> Certificate:
    """Gap bound with lambda = c_mult * eps_hat and the relaxed KL, inputs of norm <= 1.

    ``spec.lam`` is ignored: the prior scale is set from the data.
    """
    if not c_mult > 1.0:
        raise ParameterError(f"c_mult must exceed 1, got {c_mult!r}")
    if st.max_x_norm > 1.0 + NORM_TOL:
        raise ParameterError(f"needs |x_i| <= 1, largest norm is {st.max_x_norm!r}")
    eps = empirical_eps(st)
    if not eps > 0.0:
        raise InapplicableBoundError(
            f"eps_hat={eps!r} is not positive; use ls_gap_certificate with a chosen lambda"
        )
    lam = c_mult * eps
    d, g, a = st.d, spec.gamma, spec.alpha
    smallest = float(st.emp_eigs[-1])
    terms = {
        "regularized_gap": max_regularized_gap(st, lam),
        "log_term": d / (2.0 * g) * math.log((1.0 + a) / (math.e * (c_mult - 1.0) * eps)),
        "spectral_term": lam * d / (smallest + a) * (1.0 / (2.0 * g) + st.mean_y2),
    }
    return Certificate(
        kind="ls-data-dependent",
        value=math.fsum(terms.values()),
        is_gap_bound=True,
        components=terms,
        params={"alpha": a, "gamma": g, "c_mult": c_mult, "lambda": lam, "n": st.n, "d": d},
        paper_tag=PAPER_TAGS["ls-data-dependent"],
        diagnostics={"eps_hat": eps, "smallest_emp_eig": smallest},
    )


def hoeffding_gap_tail(B: float, n: int, x: float) -> float:
    """B sqrt(x / (2n)): high-probability bound on the regularized gap at w*."""
    if B < 0 or n < 1 or not x > 0:
        raise ParameterError("need B >= 0, n >= 1 and x > 0")
    return B * math.sqrt(x / (2.0 * n))


@dataclass(frozen=True)
class GaussianDesign:
    """X ~ N(0, sigma), Y = X'w_star + N(0, noise_std^2)."""

    sigma: np.ndarray
    w_star: np.ndarray
    noise_std: float
    n: int

    @property
    def s_vec(self) -> np.ndarray:
        return np.asarray(self.sigma, float) @ np.asarray(self.w_star, float)

    @property
    def ey2(self) -> float:
        w = np.asarray(self.w_star, float)
        return float(w @ np.asarray(self.sigma, float) @ w) + self.noise_std**2

    def draw(self, rng: np.random.Generator) -> LsProblem:
        sigma = np.asarray(self.sigma, float)
        x = rng.multivariate_normal(np.zeros(sigma.shape[0]), sigma, size=self.n)
        y = x @ np.asarray(self.w_star, float) + self.noise_std * rng.standard_normal(self.n)
        return LsProblem(sigma, self.s_vec, self.ey2, x, y)


@dataclass(frozen=True)
class BoundedDesign:
    """X uniform on the unit ball of R^d, Y = X'w_star + Uniform(-noise, noise)."""

    d: int
    w_star: np.ndarray
    noise: float
    n: int

    @property
    def sigma(self) -> np.ndarray:
        return np.eye(self.d) / (self.d + 2)

    @property
    def s_vec(self) -> np.ndarray:
        return self.sigma @ np.asarray(self.w_star, float)

    @property
    def ey2(self) -> float:
        w = np.asarray(self.w_star, float)
        return float(w @ self.sigma @ w) + self.noise**2 / 3.0

    def draw(self, rng: np.random.Generator) -> LsProblem:
        g = rng.standard_normal((self.n, self.d))
        radius = rng.random(self.n) ** (1.0 / self.d)
        x = g / np.linalg.norm(g, axis=1, keepdims=True) * radius[:, None]
        y = x @ np.asarray(self.w_star, float) + rng.uniform(-self.noise, self.noise, self.n)
        return LsProblem(self.sigma, self.s_vec, self.ey2, x, y)
