"""Grid search for the posterior that minimises a certificate (self-certified mode)."""

from __future__ import annotations

import itertools
import math
from typing import Any

from scipy.special import rel_entr

from ..bounds import union_bound_split
from ..certificate import Certificate
from ..dp import sample_index
from ..errors import InapplicableBoundError, ParameterError
from ..gibbs import GibbsKernel, gibbs_posterior
from ..least_squares import (
    LsPosteriorSpec,
    LsProblem,
    compute_stats,
    lambda_validity_margin,
    ls_gap_certificate,
    ls_kl_term,
    ls_posterior,
    posterior_losses,
)
from ..registry import evaluate_certificate
from .experiments import _check_applicable, trial_rng
from .worlds import FiniteWorld

LS_GRID_KEYS = ("alpha", "gamma", "lambda")


def _grid(search_spec: dict, keys) -> list[dict]:
    axes = []
    for key in keys:
        values = sorted(float(v) for v in search_spec[key])
        if not values:
            raise ParameterError(f"grid for {key!r} is empty")
        axes.append(values)
    return [dict(zip(keys, combo)) for combo in itertools.product(*axes)]


def _objective(cert: Certificate, emp: float) -> float:
    # gap bounds are compared as risk bounds emp + gap
    return emp + cert.value if cert.is_gap_bound else cert.value


def _optimize_finite(w: FiniteWorld, kind: str, search_spec: dict, seed: int):
    if "temperature" not in search_spec:
        raise ParameterError("finite search needs a 'temperature' grid for the Gibbs posterior")
    bound_keys = sorted(k for k in search_spec if k not in ("temperature", "delta", "sample"))
    keys = ["temperature"] + bound_keys
    grid = _grid(search_spec, keys)
    sample = search_spec.get("sample")
    if sample is None:
        rng = trial_rng(seed, 0)
        sample = rng.choice(w.num_atoms, size=w.n, p=w.atom_probs)
    sample = [int(z) for z in sample]
    idx = sample_index(sample, w.num_atoms)
    if w.sample_probs[idx] == 0.0:
        raise ParameterError("the observed sample has probability zero under the world")
    deltas = union_bound_split(float(search_spec.get("delta", 0.05)), len(grid))
    q0 = w.prior.table[idx]
    best = None
    for point, delta in zip(grid, deltas):
        bound_params = {k: point[k] for k in bound_keys}
        bound_params = _check_applicable(w, kind, {**bound_params, "delta": delta})
        bound_params.pop("delta")
        q = gibbs_posterior(GibbsKernel(point["temperature"], w.loss_table, w.loss_range[1]), sample)
        emp = float(q @ w.emp_table[idx])
        kl = max(math.fsum(rel_entr(q, q0)), 0.0)
        emp_in = emp if kind == "free-range" else min(emp, 1.0)
        cert = evaluate_certificate(kind, emp_in, kl, w.n, delta, bound_params)
        score = _objective(cert, emp)
        if best is None or score < best[0]:
            best = (score, {**point, "delta": delta, "sample": sample}, cert)
    return best[1], best[2]


def _optimize_ls(p: LsProblem, search_spec: dict):
    grid = _grid(search_spec, LS_GRID_KEYS)
    st = compute_stats(p)
    best = None
    for point in grid:
        if not lambda_validity_margin(st, point["lambda"]) > 0.0:
            continue
        spec = LsPosteriorSpec(point["alpha"], point["gamma"], point["lambda"])
        emp, _ = posterior_losses(st, ls_posterior(st, spec))
        cert = ls_gap_certificate(st, ls_kl_term(st, spec), spec.gamma, spec.lam)
        score = _objective(cert, emp)
        if best is None or score < best[0]:
            best = (score, point, cert)
    if best is None:
        raise InapplicableBoundError("no lambda in the grid exceeds max eig(Sigma - Sigma_hat)")
    return best[1], best[2]


def optimize_posterior(
    target: FiniteWorld | LsProblem, bound_kind: str, search_spec: dict[str, Any], seed: int = 0
) -> tuple[dict[str, Any], Certificate]:
    """Exhaustive grid search returning the parameters of the smallest certificate.

    Grid points are visited in lexicographic order of their sorted parameter
    tuples and only a strictly smaller objective replaces the incumbent, so
    ties go to the smallest tuple. On a finite world the posterior is the
    Gibbs family indexed by ``temperature`` at an observed ``sample`` (drawn
    from ``seed`` if absent) and ``delta`` is split evenly over the grid.
    On a least-squares problem the grid is over ``alpha``, ``gamma`` and
    ``lambda``; the bound holds with probability one so no split is needed.
    """
    if isinstance(target, FiniteWorld):
        return _optimize_finite(target, bound_kind, search_spec, seed)
    if isinstance(target, LsProblem):
        if bound_kind != "ls-gap":
            raise ParameterError(f"least-squares search supports 'ls-gap', got {bound_kind!r}")
        return _optimize_ls(target, search_spec)
    raise ParameterError(f"cannot search over a {type(target).__name__}")
