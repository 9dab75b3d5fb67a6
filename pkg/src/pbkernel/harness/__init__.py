"""Finite worlds, exact oracles and violation experiments."""

from .experiments import (
    ViolationReport,
    certificate_violation_experiment,
    clopper_pearson_upper,
    ls_probability_one_experiment,
    trial_rng,
    verify_basic_inequality,
)
from .oracles import (
    ExpMomentSpec,
    brute_force_log_xi,
    brute_force_xi,
    exp_moment_table,
    expected_f,
    mc_losses_finite,
    xi_swap_log,
)
from .search import optimize_posterior
from .worlds import FiniteWorld, random_kernel, random_world

__all__ = [
    "ExpMomentSpec",
    "FiniteWorld",
    "ViolationReport",
    "brute_force_log_xi",
    "brute_force_xi",
    "certificate_violation_experiment",
    "clopper_pearson_upper",
    "exp_moment_table",
    "expected_f",
    "ls_probability_one_experiment",
    "mc_losses_finite",
    "optimize_posterior",
    "random_kernel",
    "random_world",
    "trial_rng",
    "verify_basic_inequality",
    "xi_swap_log",
]
