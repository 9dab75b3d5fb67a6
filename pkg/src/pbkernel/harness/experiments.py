"""Violation experiments: exhaustive over enumerable worlds, Monte Carlo otherwise."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.special import rel_entr
from scipy.stats import beta as beta_dist

from ..dp import measure_dp_epsilon, sample_index
from ..errors import InapplicableBoundError, ParameterError
from ..least_squares import (
    LsPosteriorSpec,
    compute_stats,
    lambda_validity_margin,
    ls_gap_certificate,
    ls_kl_term,
    ls_posterior,
    posterior_losses,
)
from ..registry import BOUND_KINDS, DATA_FREE_KINDS, GIBBS_KINDS, evaluate_certificate
from .oracles import ExpMomentSpec, brute_force_log_xi, exp_moment_table
from .worlds import FiniteWorld

CI_LEVEL = 0.99
LS_SLACK_TOL = 1e-9
EXHAUSTIVE = "exhaustive"


@dataclass
class ViolationReport:
    trials: int
    violations: int
    rate: float
    delta: float
    ci_upper: float
    seed: int
    exact: bool = False
    violation_probability: float | None = None
    inapplicable: int = 0
    min_slack: float = math.inf
    params: dict[str, Any] = field(default_factory=dict)
    paper_tag: str = ""

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def clopper_pearson_upper(k: int, trials: int, level: float = CI_LEVEL) -> float:
    """Exact one-sided binomial upper confidence bound."""
    if trials == 0 or k >= trials:
        return 1.0
    return float(beta_dist.ppf(level, k + 1, trials - k))


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial, a function of (seed, trial) only."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _parallel_map(fn: Callable, items, workers: int) -> list:
    if workers < 1:
        raise ParameterError(f"workers must be >= 1, got {workers}")
    if workers == 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _draw_index(w: FiniteWorld, rng: np.random.Generator) -> int:
    sample = rng.choice(w.num_atoms, size=w.n, p=w.atom_probs)
    return sample_index(sample, w.num_atoms)


def _kl_row(q: np.ndarray, q0: np.ndarray) -> float:
    return max(math.fsum(rel_entr(q, q0)), 0.0)


def _run_finite(
    w: FiniteWorld,
    per_sample: Callable[[int, np.random.Generator | None], tuple[float, float]],
    trials,
    seed: int,
    workers: int,
) -> dict[str, Any]:
    """Evaluate ``per_sample(index, rng) -> (violation weight, slack)``.

    Exhaustive mode visits every positive-probability sample with
    ``rng=None`` and sums probability mass; Monte Carlo mode draws one sample
    per trial.
    """
    if trials == EXHAUSTIVE or trials is None:
        support = [int(i) for i in np.flatnonzero(w.sample_probs > 0.0)]
        results = _parallel_map(lambda i: per_sample(i, None), support, workers)
        weights = [w.sample_probs[i] * v for i, (v, _) in zip(support, results)]
        prob = math.fsum(weights)
        violations = sum(1 for v, _ in results if v > 0.0)
        slacks = [s for _, s in results]
        return {
            "trials": len(support),
            "violations": violations,
            "exact": True,
            "violation_probability": prob,
            "ci_upper": prob,
            "min_slack": min(slacks, default=math.inf),
        }
    trials = int(trials)
    if trials < 1:
        raise ParameterError(f"trials must be positive or 'exhaustive', got {trials}")

    def one(t):
        rng = trial_rng(seed, t)
        return per_sample(_draw_index(w, rng), rng)

    results = _parallel_map(one, range(trials), workers)
    violations = sum(1 for v, _ in results if v > 0.0)
    return {
        "trials": trials,
        "violations": violations,
        "exact": False,
        "violation_probability": None,
        "ci_upper": clopper_pearson_upper(violations, trials),
        "min_slack": min((s for _, s in results), default=math.inf),
    }


def _report(summary: dict, delta: float, seed: int, params: dict, tag: str) -> ViolationReport:
    return ViolationReport(
        trials=summary["trials"],
        violations=summary["violations"],
        rate=summary["violations"] / summary["trials"] if summary["trials"] else 0.0,
        delta=delta,
        ci_upper=summary["ci_upper"],
        seed=seed,
        exact=summary["exact"],
        violation_probability=summary["violation_probability"],
        inapplicable=summary.get("inapplicable", 0),
        min_slack=summary["min_slack"],
        params=params,
        paper_tag=tag,
    )


def verify_basic_inequality(
    w: FiniteWorld,
    f: ExpMomentSpec,
    delta: float,
    trials=EXHAUSTIVE,
    seed: int = 0,
    mode: str = "expectation",
    workers: int = 1,
) -> ViolationReport:
    """Check Q_S[f_S] <= KL(Q_S || Q0_S) + log(xi / delta) with exact xi.

    ``mode="pointwise"`` checks f(S, H) <= log(dQ_S/dQ0_S (H)) + log(xi / delta)
    over draws of (S, H) instead.
    """
    if not 0.0 < delta <= 1.0:
        raise ParameterError(f"delta must lie in (0, 1], got {delta!r}")
    if mode not in ("expectation", "pointwise"):
        raise ParameterError(f"mode must be 'expectation' or 'pointwise', got {mode!r}")
    log_xi = brute_force_log_xi(w, f)
    table = exp_moment_table(w, f)
    threshold = log_xi + math.log(1.0 / delta)

    def expectation(i, rng):
        q, q0 = w.posterior.table[i], w.prior.table[i]
        kl = _kl_row(q, q0)
        support = q > 0.0
        lhs = math.fsum(q[support] * table[i, support])
        slack = kl + threshold - lhs
        return (1.0 if lhs > kl + threshold else 0.0), slack

    def pointwise(i, rng):
        q, q0 = w.posterior.table[i], w.prior.table[i]
        support = np.flatnonzero(q > 0.0)
        with np.errstate(divide="ignore"):
            rhs = np.log(q[support]) - np.log(q0[support]) + threshold
        bad = table[i, support] > rhs
        slack = float(np.min(rhs - table[i, support]))
        if rng is None:
            return math.fsum(q[support][bad]), slack
        pick = rng.choice(support.size, p=q[support] / q[support].sum())
        return (1.0 if bad[pick] else 0.0), float(rhs[pick] - table[i, support[pick]])

    summary = _run_finite(w, expectation if mode == "expectation" else pointwise, trials, seed, workers)
    params = {"f_kind": f.f_kind, "mode": mode, "log_xi": log_xi, "n": w.n}
    return _report(summary, delta, seed, params, "basic-pac-bayes-inequality")


def _check_applicable(w: FiniteWorld, kind: str, params: dict) -> dict:
    params = dict(params)
    if kind not in BOUND_KINDS:
        raise ParameterError(f"unknown bound kind {kind!r}")
    if "delta" not in params:
        raise ParameterError("params must include 'delta'")
    if kind in DATA_FREE_KINDS and not w.prior.constant:
        raise InapplicableBoundError(f"{kind} needs a data-free (constant) prior kernel")
    if kind != "free-range" and (w.loss_table.min() < 0.0 or w.loss_table.max() > 1.0):
        raise InapplicableBoundError(f"{kind} needs losses in [0, 1]")
    if kind == "free-range":
        if w.loss_table.min() < 0.0:
            raise InapplicableBoundError("free-range needs non-negative losses")
        exact_m = w.second_moment()
        params.setdefault("M", exact_m)
        if params["M"] < exact_m:
            raise InapplicableBoundError(f"declared M={params['M']!r} is below the exact {exact_m!r}")
    if kind in GIBBS_KINDS:
        meta = w.prior.meta
        if meta.get("family") != "gibbs" or not np.array_equal(meta.get("loss_table"), w.loss_table):
            raise InapplicableBoundError(f"{kind} needs the Gibbs prior built from the world's losses")
        params.setdefault("gamma", meta["gamma"])
        if params["gamma"] != meta["gamma"]:
            raise InapplicableBoundError(
                f"gamma={params['gamma']!r} does not match the prior's {meta['gamma']!r}"
            )
    if kind == "dp-kl":
        measured = measure_dp_epsilon(w.prior)
        params.setdefault("epsilon", measured)
        if params["epsilon"] < measured:
            raise InapplicableBoundError(
                f"declared epsilon={params['epsilon']!r} is below the measured {measured!r}"
            )
    return params


def certificate_violation_experiment(
    w: FiniteWorld,
    bound_kind: str,
    params: dict[str, Any],
    trials=EXHAUSTIVE,
    seed: int = 0,
    workers: int = 1,
) -> ViolationReport:
    """How often the certificate fails on the population loss of the posterior.

    Risk certificates fail when Q_S[L] > value, gap certificates when
    Q_S[L] - Q_S[L_hat] > value, and the two-sided Gibbs DP certificate when
    |Q_S[L] - Q_S[L_hat]| > value.
    """
    params = _check_applicable(w, bound_kind, params)
    delta = float(params["delta"])
    extra = {k: v for k, v in params.items() if k != "delta"}
    tags: list[str] = []

    def per_sample(i, rng):
        q = w.posterior.table[i]
        emp = float(q @ w.emp_table[i])
        pop = float(q @ w.pop)
        kl = _kl_row(q, w.prior.table[i])
        # rounding can push a [0, 1] average a hair above 1
        emp_in = emp if bound_kind == "free-range" else min(emp, 1.0)
        cert = evaluate_certificate(bound_kind, emp_in, kl, w.n, delta, extra)
        if not tags:
            tags.append(cert.paper_tag)
        if bound_kind == "gibbs-dp":
            excess = abs(pop - emp)
        elif cert.is_gap_bound:
            excess = pop - emp
        else:
            excess = pop
        slack = cert.value - excess
        return (1.0 if excess > cert.value else 0.0), slack

    summary = _run_finite(w, per_sample, trials, seed, workers)
    out_params = {"bound_kind": bound_kind, "n": w.n, **params}
    return _report(summary, delta, seed, out_params, tags[0] if tags else "")


def ls_probability_one_experiment(
    generator, spec: LsPosteriorSpec, datasets: int, seed: int = 0, workers: int = 1
) -> ViolationReport:
    """Draw datasets and check the least-squares gap certificate on each applicable one.

    A dataset is inapplicable when the prior scale ``spec.lam`` does not
    exceed the largest eigenvalue of Sigma - Sigma_hat.
    """
    if datasets < 1:
        raise ParameterError(f"datasets must be positive, got {datasets}")

    def one(t):
        problem = generator.draw(trial_rng(seed, t))
        st = compute_stats(problem)
        if not lambda_validity_margin(st, spec.lam) > 0.0:
            return None
        emp, pop = posterior_losses(st, ls_posterior(st, spec))
        cert = ls_gap_certificate(st, ls_kl_term(st, spec), spec.gamma, spec.lam)
        return cert.value - (pop - emp), cert.paper_tag

    results = _parallel_map(one, range(datasets), workers)
    applicable = [r for r in results if r is not None]
    slacks = [s for s, _ in applicable]
    violations = sum(1 for s in slacks if s < -LS_SLACK_TOL)
    summary = {
        "trials": datasets,
        "violations": violations,
        "exact": False,
        "violation_probability": None,
        "ci_upper": clopper_pearson_upper(violations, len(applicable)),
        "min_slack": min(slacks, default=math.inf),
        "inapplicable": datasets - len(applicable),
    }
    params = {
        "alpha": spec.alpha,
        "gamma": spec.gamma,
        "lambda": spec.lam,
        "n": generator.n,
        "datasets": datasets,
        "slack_tolerance": LS_SLACK_TOL,
    }
    tag = applicable[0][1] if applicable else ""
    return _report(summary, 0.0, seed, params, tag)
