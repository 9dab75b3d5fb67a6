"""Closed-form PAC-Bayes certificates for losses in [0, 1] and free-range losses.

Every evaluator here reduces to :func:`general_template_bound`: pick a
log exponential-moment bound ``log_xi`` and an inverse map ``f_inverse``,
then apply ``f_inverse`` to the budget ``KL + log_xi + log(1/delta)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .certificate import Certificate, risk_certificate
from .divergences import kl_inverse_upper
from .errors import ParameterError

PAPER_TAGS = {
    "general-template": "stochastic-kernel-template",
    "mcallester": "mcallester-1999",
    "pac-bayes-kl": "seeger-2002-pac-bayes-kl",
    "localized": "refined-pinsker-localized",
    "lambda-quadratic": "thiemann-2017-lambda",
    "catoni": "catoni-2007",
    "free-range": "free-range-second-moment",
}


@dataclass(frozen=True)
class BoundInputs:
    """Empirical loss, KL term, sample size and confidence of one evaluation."""

    emp: float
    kl_val: float
    n: int
    delta: float

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if not 0.0 < self.delta < 1.0:
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta!r}")
        if not self.kl_val >= 0.0:
            raise ParameterError(f"kl_val must be non-negative, got {self.kl_val!r}")
        if not (self.emp >= 0.0 and math.isfinite(self.emp)):
            raise ParameterError(f"emp must be finite and non-negative, got {self.emp!r}")

    def unit_loss(self) -> "BoundInputs":
        if self.emp > 1.0:
            raise ParameterError(f"emp must lie in [0, 1] for this bound, got {self.emp!r}")
        return self

    def as_params(self) -> dict:
        return {"emp": self.emp, "kl_val": self.kl_val, "n": self.n, "delta": self.delta}


def general_template_bound(
    kl_val: float,
    log_xi: float,
    delta: float,
    f_inverse: Callable[[float], float],
    *,
    is_gap_bound: bool = False,
) -> Certificate:
    """Apply ``f_inverse`` to ``kl_val + log_xi + log(1/delta)``.

    ``f_inverse`` must be non-decreasing; it converts a budget on
    ``F(Q_S[A_S])`` into a bound on the quantity of interest.
    """
    if not math.isfinite(log_xi):
        raise ParameterError(f"log_xi must be finite, got {log_xi!r}")
    if not kl_val >= 0.0:
        raise ParameterError(f"kl_val must be non-negative, got {kl_val!r}")
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta!r}")
    budget = kl_val + log_xi + math.log(1.0 / delta)
    value = float(f_inverse(budget))
    return Certificate(
        kind="general-template",
        value=value,
        is_gap_bound=is_gap_bound,
        components={"f_inverse(budget)": value},
        params={"kl_val": kl_val, "log_xi": log_xi, "delta": delta},
        paper_tag=PAPER_TAGS["general-template"],
        diagnostics={"budget": budget},
    )


def mcallester_bound(inp: BoundInputs) -> Certificate:
    """Gap bound sqrt((KL + log((n+2)/delta)) / (2n - 1))."""
    inp.unit_loss()
    n = inp.n
    base = general_template_bound(
        inp.kl_val, math.log(n + 2), inp.delta, lambda b: math.sqrt(b / (2 * n - 1))
    )
    return Certificate(
        kind="mcallester",
        value=base.value,
        is_gap_bound=True,
        components={"deviation": base.value},
        params=inp.as_params(),
        paper_tag=PAPER_TAGS["mcallester"],
        diagnostics={"budget": base.diagnostics["budget"]},
    )


def _log_xi_kl(n: int, xi: str) -> float:
    if xi == "seeger":
        return math.log(n + 1)
    if xi == "maurer":
        return math.log(2.0 * math.sqrt(n))
    raise ParameterError(f"unknown xi convention {xi!r}; use 'seeger' or 'maurer'")


def pac_bayes_kl_bound(inp: BoundInputs, xi: str = "seeger") -> Certificate:
    """Risk bound from kl(emp || risk) <= (KL + log(xi/delta)) / n.

    ``xi="seeger"`` uses xi = n + 1; ``xi="maurer"`` uses xi = 2 sqrt(n).
    """
    inp.unit_loss()
    n, emp = inp.n, inp.emp
    base = general_template_bound(
        inp.kl_val, _log_xi_kl(n, xi), inp.delta, lambda b: kl_inverse_upper(emp, b / n)
    )
    budget = base.diagnostics["budget"]
    return risk_certificate(
        "pac-bayes-kl",
        {"emp": emp, "kl_excess": base.value - emp},
        {**inp.as_params(), "xi": xi},
        PAPER_TAGS["pac-bayes-kl"],
        diagnostics={"budget": budget, "kl_budget": budget / n},
    )


def localized_bound(inp: BoundInputs) -> Certificate:
    """Gap bound sqrt(2 emp c) + 2c with c the pac-bayes-kl budget.

    Follows from kl(emp || risk) <= c and (risk - emp)^2 / (2 risk) <= kl
    when emp < risk.
    """
    inp.unit_loss()
    n = inp.n
    base = general_template_bound(inp.kl_val, math.log(n + 1), inp.delta, lambda b: b / n)
    c = base.value
    return Certificate(
        kind="localized",
        value=math.sqrt(2.0 * inp.emp * c) + 2.0 * c,
        is_gap_bound=True,
        components={"sqrt_term": math.sqrt(2.0 * inp.emp * c), "linear_term": 2.0 * c},
        params=inp.as_params(),
        paper_tag=PAPER_TAGS["localized"],
        diagnostics={"kl_budget": c},
    )


def lambda_quadratic_bound(inp: BoundInputs) -> Certificate:
    """Risk bound (sqrt(emp + B) + sqrt(B))^2, B = (KL + log(2 sqrt(n)/delta)) / 2n."""
    inp.unit_loss()
    n, emp = inp.n, inp.emp
    base = general_template_bound(
        inp.kl_val, math.log(2.0 * math.sqrt(n)), inp.delta, lambda b: b / (2 * n)
    )
    B = base.value
    return risk_certificate(
        "lambda-quadratic",
        {"emp": emp, "kl_term": 2.0 * B, "cross_term": 2.0 * math.sqrt(B * (emp + B))},
        dict(inp.as_params()),
        PAPER_TAGS["lambda-quadratic"],
        diagnostics={"B": B, "budget": base.diagnostics["budget"]},
    )


def catoni_objective(x: float, y: float, n: int, lambda_c: float) -> float:
    """n log(1 / (1 - x (1 - e^-lambda))) - lambda n y."""
    return -n * math.log1p(x * math.expm1(-lambda_c)) - lambda_c * n * y


def catoni_bound(inp: BoundInputs, lambda_c: float) -> Certificate:
    """Risk bound from solving the Catoni objective for its first argument."""
    inp.unit_loss()
    if not lambda_c > 0:
        raise ParameterError(f"lambda_c must be positive, got {lambda_c!r}")
    n, emp = inp.n, inp.emp

    def invert(b):
        return math.expm1(-lambda_c * emp - b / n) / math.expm1(-lambda_c)

    base = general_template_bound(inp.kl_val, 0.0, inp.delta, invert)
    return risk_certificate(
        "catoni",
        {"emp": emp, "excess": base.value - emp},
        {**inp.as_params(), "lambda_c": lambda_c},
        PAPER_TAGS["catoni"],
        diagnostics={"budget": base.diagnostics["budget"], "unclamped": base.value},
    )


def free_range_bound(inp: BoundInputs, lam: float, M: float) -> Certificate:
    """emp + (KL + log(1/delta)) / (n lam) + lam M / 2 for unbounded losses.

    ``M`` is a uniform bound on the second moment of the loss.
    """
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam!r}")
    if not M >= 0:
        raise ParameterError(f"M must be non-negative, got {M!r}")
    n = inp.n
    base = general_template_bound(inp.kl_val, 0.0, inp.delta, lambda b: b / (n * lam))
    return risk_certificate(
        "free-range",
        {"emp": inp.emp, "kl_term": base.value, "moment_term": 0.5 * lam * M},
        {**inp.as_params(), "lambda": lam, "M": M},
        PAPER_TAGS["free-range"],
        diagnostics={"budget": base.diagnostics["budget"]},
        clamp=False,
    )


def optimize_free_range_lambda(inp: BoundInputs, M: float) -> tuple[float, Certificate]:
    """Minimise the free-range bound over lambda in closed form."""
    if not M > 0:
        raise ParameterError(f"M must be positive, got {M!r}")
    budget = inp.kl_val + math.log(1.0 / inp.delta)
    lam_star = math.sqrt(2.0 * budget / (inp.n * M))
    return lam_star, free_range_bound(inp, lam_star, M)


def union_bound_split(delta: float, k: int) -> list[float]:
    """Split a confidence budget evenly across ``k`` simultaneous bounds."""
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k!r}")
    if not 0.0 < delta < 1.0:
        raise ParameterError(f"delta must lie in (0, 1), got {delta!r}")
    return [delta / k] * int(k)
