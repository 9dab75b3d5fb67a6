"""Name-based dispatch over the scalar certificates (used by the harness and CLI)."""

from __future__ import annotations

from typing import Any

from . import bounds
from .certificate import Certificate
from .dp import dp_kl_certificate
from .errors import ParameterError
from .gibbs import gibbs_dp_certificate, gibbs_prior_certificate

# bounds that assume the prior does not look at the sample
DATA_FREE_KINDS = (
    "mcallester",
    "pac-bayes-kl",
    "localized",
    "lambda-quadratic",
    "catoni",
    "free-range",
)
GIBBS_KINDS = ("gibbs-prior", "gibbs-dp")
BOUND_KINDS = DATA_FREE_KINDS + GIBBS_KINDS + ("dp-kl",)
TWO_SIDED_KINDS = ("gibbs-dp",)


def _need(params: dict, key: str, kind: str) -> float:
    if key not in params or params[key] is None:
        raise ParameterError(f"bound {kind!r} requires parameter {key!r}")
    return float(params[key])


def evaluate_certificate(
    kind: str, emp: float, kl_val: float, n: int, delta: float, params: dict[str, Any] | None = None
) -> Certificate:
    params = dict(params or {})
    if kind in GIBBS_KINDS:
        fn = gibbs_prior_certificate if kind == "gibbs-prior" else gibbs_dp_certificate
        return fn(emp, kl_val, n, _need(params, "gamma", kind), delta)
    if kind == "dp-kl":
        return dp_kl_certificate(emp, kl_val, n, _need(params, "epsilon", kind), delta)
    inp = bounds.BoundInputs(emp, kl_val, n, delta)
    if kind == "mcallester":
        return bounds.mcallester_bound(inp)
    if kind == "pac-bayes-kl":
        return bounds.pac_bayes_kl_bound(inp, xi=params.get("xi", "seeger"))
    if kind == "localized":
        return bounds.localized_bound(inp)
    if kind == "lambda-quadratic":
        return bounds.lambda_quadratic_bound(inp)
    if kind == "catoni":
        return bounds.catoni_bound(inp, _need(params, "lambda_c", kind))
    if kind == "free-range":
        M = _need(params, "M", kind)
        if params.get("lambda") is None:
            return bounds.optimize_free_range_lambda(inp, M)[1]
        return bounds.free_range_bound(inp, float(params["lambda"]), M)
    raise ParameterError(f"unknown bound kind {kind!r}; choose from {', '.join(BOUND_KINDS)}")
