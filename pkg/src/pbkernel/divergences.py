"""Divergence primitives: binary kl and its inversion, finite KL, Gaussian KL.

All functions are pure. Infinite divergences are returned as ``math.inf``
(or ``np.inf`` inside arrays); the convention ``0 * log(0 / x) = 0`` is used
throughout.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import rel_entr

from .errors import ParameterError

DIST_TOL = 1e-12
SYMMETRY_TOL = 1e-10
MAX_BISECTION_ITERS = 200


def _check_prob(name: str, value: float) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def _log1pmx(x: np.ndarray, log1p_x: np.ndarray) -> np.ndarray:
    """log(1 + x) - x without cancellation near 0.

    ``log1p_x`` is an accurate log(1 + x), used when |x| >= 0.5.
    """
    small = np.abs(x) < 0.5
    xs = np.where(small, x, 0.0)
    # log1p(x) = 2 atanh(u) with u = x / (2 + x); |u| <= 1/3 here
    u = xs / (2.0 + xs)
    u2 = u * u
    term = u * u2
    series = np.zeros_like(xs)
    for k in range(3, 45, 2):
        series += term / k
        term = term * u2
    return np.where(small, -xs * xs / (2.0 + xs) + 2.0 * series, log1p_x - x)


def _log_ratio(num, den, x):
    """log(num / den) = log1p(x); the ratio form avoids forming 1 + x when x < 0."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        ratio = num / den
        direct = np.where(ratio > 0.0, np.log(ratio), np.log(num) - np.log(den))
        return np.where(x >= 0.0, np.log1p(x), direct)


def binary_kl_array(q, p) -> np.ndarray:
    """Vectorised :func:`binary_kl` (no domain validation).

    Written as ``-q g((p - q) / q) - (1 - q) g((q - p) / (1 - q))`` with
    ``g(x) = log(1 + x) - x``; both terms are non-negative, so nothing
    cancels when ``p`` is close to ``q``. Away from ``q`` the logarithms are
    taken of ``p / q`` and ``(1 - p) / (1 - q)`` so ``p`` near 0 or 1 keeps
    full precision.
    """
    q, p = np.broadcast_arrays(np.asarray(q, float), np.asarray(p, float))
    inner = (q > 0.0) & (q < 1.0)
    qi = np.where(inner, q, 0.5)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = (p - qi) / qi
        x = (qi - p) / (1.0 - qi)
        mid = -qi * _log1pmx(y, _log_ratio(p, qi, y)) - (1.0 - qi) * _log1pmx(
            x, _log_ratio(1.0 - p, 1.0 - qi, x)
        )
        at_zero = -np.log1p(-p)
        at_one = -np.log(p)
    out = np.where(inner, mid, np.where(q == 0.0, at_zero, at_one))
    return np.maximum(np.where(np.isnan(out), np.inf, out), 0.0)


def _log1pmx_scalar(x: float, num: float, den: float) -> float:
    """log(1 + x) - x where 1 + x = num / den."""
    if abs(x) >= 0.5:
        if x >= 0.0:
            return math.log1p(x) - x
        if num == 0.0:
            return -math.inf
        ratio = num / den
        log1p_x = math.log(ratio) if ratio > 0.0 else math.log(num) - math.log(den)
        return log1p_x - x
    u = x / (2.0 + x)
    u2 = u * u
    term, series = u * u2, 0.0
    for k in range(3, 45, 2):
        series += term / k
        term *= u2
    return -x * x / (2.0 + x) + 2.0 * series


def _kl(q: float, p: float) -> float:
    if q == 0.0:
        return -math.log1p(-p) if p < 1.0 else math.inf
    if q == 1.0:
        return -math.log(p) if p > 0.0 else math.inf
    if p == 0.0 or p == 1.0:
        return math.inf
    value = -q * _log1pmx_scalar((p - q) / q, p, q) - (1.0 - q) * _log1pmx_scalar(
        (q - p) / (1.0 - q), 1.0 - p, 1.0 - q
    )
    return max(value, 0.0)


def binary_kl(q: float, p: float) -> float:
    """kl(q || p) between Bernoulli(q) and Bernoulli(p)."""
    return _kl(_check_prob("q", q), _check_prob("p", p))


def kl_inverse_upper_array(q, c) -> np.ndarray:
    """Vectorised upper inverse of the binary kl.

    Bisection on ``[q, 1]`` runs until the bracket is two adjacent doubles.
    The upper end of the bracket is returned, so the result never falls
    below the true supremum by more than rounding in the kl evaluation.
    """
    q, c = np.broadcast_arrays(np.asarray(q, float), np.asarray(c, float))
    if np.any((q < 0.0) | (q > 1.0)) or np.any(np.isnan(q)):
        raise ParameterError("q must lie in [0, 1]")
    if np.any(c < 0.0) or np.any(np.isnan(c)):
        raise ParameterError("kl budget c must be non-negative")
    # non-negative doubles are ordered like their bit patterns, so halving
    # the integer gap reaches adjacent doubles in at most 64 steps
    shape = q.shape
    q, c = q.ravel(), c.ravel()
    lo_bits = (q + 0.0).view(np.int64)
    hi_bits = np.ones_like(q).view(np.int64)
    for _ in range(MAX_BISECTION_ITERS):
        active = hi_bits - lo_bits > 1
        if not active.any():
            break
        mid_bits = lo_bits + (hi_bits - lo_bits) // 2
        above = binary_kl_array(q, mid_bits.view(np.float64)) > c
        hi_bits = np.where(active & above, mid_bits, hi_bits)
        lo_bits = np.where(active & ~above, mid_bits, lo_bits)
    lo, hi = lo_bits.view(np.float64), hi_bits.view(np.float64)
    out = np.where(binary_kl_array(q, lo) == c, lo, hi)
    # zero budget and q = 1 are exact
    out = np.where((c == 0.0) | (q == 1.0), q, out)
    return out.reshape(shape)


_ONE_BITS = struct.unpack("<q", struct.pack("<d", 1.0))[0]


def _from_bits(bits: int) -> float:
    return struct.unpack("<d", struct.pack("<q", bits))[0]


def kl_inverse_upper(q: float, c: float) -> float:
    """Largest p in [q, 1] with kl(q || p) <= c."""
    q = _check_prob("q", q)
    c = float(c)
    if not c >= 0.0:
        raise ParameterError(f"kl budget must be non-negative, got {c!r}")
    if math.isinf(c):
        return 1.0
    if c == 0.0 or q == 1.0:
        return q
    lo = struct.unpack("<q", struct.pack("<d", q))[0]
    hi = _ONE_BITS
    while hi - lo > 1:
        mid = lo + (hi - lo) // 2
        if _kl(q, _from_bits(mid)) > c:
            hi = mid
        else:
            lo = mid
    lo_val = _from_bits(lo)
    return lo_val if _kl(q, lo_val) == c else _from_bits(hi)


def pinsker_envelope(q: float, c: float) -> float:
    """Pinsker relaxation of the kl inverse: min(1, q + sqrt(c / 2))."""
    q = _check_prob("q", q)
    if c < 0:
        raise ParameterError(f"kl budget must be non-negative, got {c!r}")
    return min(1.0, q + math.sqrt(c / 2.0))


def check_dist(weights, name: str = "distribution") -> np.ndarray:
    """Validate a finite distribution and return it as a float array."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ParameterError(f"{name} must be a non-empty vector")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ParameterError(f"{name} has negative or non-finite weights")
    if abs(math.fsum(w) - 1.0) > DIST_TOL:
        raise ParameterError(f"{name} weights sum to {math.fsum(w)!r}, not 1")
    return w


def finite_kl(post, prior) -> float:
    """KL(post || prior) for distributions over the same finite index set."""
    post = check_dist(post, "posterior")
    prior = check_dist(prior, "prior")
    if post.shape != prior.shape:
        raise ParameterError(
            f"dimension mismatch: {post.shape[0]} vs {prior.shape[0]} atoms"
        )
    return max(math.fsum(rel_entr(post, prior)), 0.0)


@dataclass(frozen=True)
class GaussianSpec:
    """Gaussian over weight space given by mean and covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise ParameterError(
                f"covariance shape {cov.shape} does not match mean of length {d}"
            )
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL:
            raise ParameterError("covariance is not symmetric")
        cov = 0.5 * (cov + cov.T)
        try:
            chol = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError as exc:
            raise ParameterError("covariance is not positive definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._chol))))


def gaussian_kl(post: GaussianSpec, prior: GaussianSpec, scale: float = 1.0) -> float:
    """KL between Gaussians whose true covariances are ``covariance / scale``.

    With ``scale = 1`` this is the ordinary closed form
    ``0.5 * (log det S0/det S1 + tr(S0^-1 S1) - d + dm' S0^-1 dm)``.
    A common ``scale`` leaves the log-det and trace terms unchanged and
    multiplies the mean term.
    """
    if scale <= 0:
        raise ParameterError(f"scale must be positive, got {scale!r}")
    if post.dim != prior.dim:
        raise ParameterError(f"dimension mismatch: {post.dim} vs {prior.dim}")
    d = post.dim
    chol0 = (prior._chol, True)
    trace = float(np.trace(linalg.cho_solve(chol0, post.covariance)))
    diff = post.mean - prior.mean
    quad = float(diff @ linalg.cho_solve(chol0, diff))
    value = 0.5 * (prior.log_det() - post.log_det() + trace - d + scale * quad)
    return max(value, 0.0)
