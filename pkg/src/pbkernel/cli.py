"""Command-line front end.

Exit codes: 0 success, 2 invalid input, 3 bound not applicable.
"""

from __future__ import annotations

import argparse
import io as _stdio
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .bounds import union_bound_split
from .dp import FiniteKernel, measure_dp_epsilon
from .errors import InapplicableBoundError, ParameterError
from .gibbs import GibbsKernel, gibbs_kernel
from .harness import (
    ExpMomentSpec,
    FiniteWorld,
    certificate_violation_experiment,
    ls_probability_one_experiment,
    optimize_posterior,
    verify_basic_inequality,
)
from .io import load_config, load_kernel_csv, load_ls_csv, load_world_csv, to_json, write_csv
from .least_squares import (
    BoundedDesign,
    GaussianDesign,
    LsPosteriorSpec,
    LsProblem,
    compute_stats,
    ls_data_dependent_certificate,
    ls_gap_certificate,
    ls_kl_term,
)
from .registry import BOUND_KINDS, evaluate_certificate

__all__ = ["RunConfig", "main", "run", "union_bound_split"]

COMMANDS = ("certify", "verify", "ls-certify", "ls-verify", "dp-measure", "optimize")
OUTPUT_DIR_ENV = "PBKERNEL_OUTPUT_DIR"
BOUND_PARAM_KEYS = ("gamma", "epsilon", "lambda_c", "lam", "M", "xi")


@dataclass
class RunConfig:
    command: str
    inputs: dict[str, Any] = field(default_factory=dict)
    output_path: str | None = None
    seed: int = 0
    format: str = "json"


def _req(inputs: dict, key: str, flag: str | None = None):
    value = inputs.get(key)
    if value is None:
        raise ParameterError(f"missing required input --{flag or key.replace('_', '-')}")
    return value


def _bound_params(inputs: dict) -> dict[str, Any]:
    out = {}
    for key in BOUND_PARAM_KEYS:
        if inputs.get(key) is not None:
            out["lambda" if key == "lam" else key] = inputs[key]
    return out


def _with_meta(report: dict, seed) -> dict:
    return {**report, "tool_version": __version__, "seed": seed}


def _cmd_certify(inputs: dict, seed: int) -> dict:
    cert = evaluate_certificate(
        _req(inputs, "bound"),
        float(_req(inputs, "emp")),
        float(_req(inputs, "kl")),
        int(_req(inputs, "n")),
        float(_req(inputs, "delta")),
        _bound_params(inputs),
    )
    return _with_meta(cert.to_dict(), None)


def _kernel_from_spec(spec: str, world_losses, n: int, m: int, h: int) -> FiniteKernel:
    """``uniform``, ``gibbs:<gamma>`` or a path to a kernel CSV."""
    if spec == "uniform":
        return FiniteKernel.constant_kernel(np.full(h, 1.0 / h), n, m)
    if spec.startswith("gibbs:"):
        try:
            gamma = float(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ParameterError(f"bad kernel spec {spec!r}") from exc
        return gibbs_kernel(GibbsKernel(gamma, world_losses), n)
    return load_kernel_csv(spec, n, m, h)


def _load_world(inputs: dict) -> FiniteWorld:
    probs, losses = load_world_csv(_req(inputs, "world"))
    n = int(inputs.get("n") or 3)
    m, h = probs.size, losses.shape[0]
    prior = _kernel_from_spec(inputs.get("prior") or "uniform", losses, n, m, h)
    post_spec = inputs.get("posterior") or "gibbs:5"
    posterior = prior if post_spec == "prior" else _kernel_from_spec(post_spec, losses, n, m, h)
    hi = max(1.0, float(losses.max()))
    return FiniteWorld(probs, n, losses, prior, posterior, loss_range=(0.0, hi))


def _trials(inputs: dict):
    value = inputs.get("trials") or "exhaustive"
    if value == "exhaustive":
        return value
    try:
        return int(value)
    except ValueError as exc:
        raise ParameterError(f"--trials must be an integer or 'exhaustive', got {value!r}") from exc


def _cmd_verify(inputs: dict, seed: int) -> dict:
    world = _load_world(inputs)
    bound = _req(inputs, "bound")
    workers = int(inputs.get("workers") or 1)
    delta = float(_req(inputs, "delta"))
    if bound == "basic":
        f_params = {}
        if inputs.get("lam") is not None:
            f_params["lambda"] = float(inputs["lam"])
        if inputs.get("M") is not None:
            f_params["M"] = float(inputs["M"])
        f = ExpMomentSpec(inputs.get("f_kind") or "sqrt_n_gap", f_params)
        report = verify_basic_inequality(
            world, f, delta, _trials(inputs), seed, inputs.get("mode") or "expectation", workers
        )
    else:
        params = {**_bound_params(inputs), "delta": delta}
        report = certificate_violation_experiment(world, bound, params, _trials(inputs), seed, workers)
    return _with_meta(report.to_dict(), seed)


def _ls_problem(inputs: dict) -> LsProblem:
    x, y = load_ls_csv(_req(inputs, "data"))
    moments = inputs.get("moments")
    if not isinstance(moments, dict):
        raise ParameterError("ls-certify needs population moments: config key 'moments' with sigma, s, ey2")
    try:
        return LsProblem(
            np.array(moments["sigma"], dtype=float),
            np.array(moments["s"], dtype=float),
            float(moments["ey2"]),
            x,
            y,
        )
    except KeyError as exc:
        raise ParameterError(f"moments are missing {exc}") from exc


def _cmd_ls_certify(inputs: dict, seed: int) -> dict:
    st = compute_stats(_ls_problem(inputs))
    alpha = float(_req(inputs, "alpha"))
    gamma = float(_req(inputs, "gamma"))
    if inputs.get("c_mult") is not None:
        spec = LsPosteriorSpec(alpha, gamma, 1.0)
        cert = ls_data_dependent_certificate(st, spec, float(inputs["c_mult"]))
    else:
        spec = LsPosteriorSpec(alpha, gamma, float(_req(inputs, "lam", "lambda")))
        cert = ls_gap_certificate(st, ls_kl_term(st, spec), gamma, spec.lam)
    report = cert.to_dict()
    report["params"].setdefault("alpha", alpha)
    return _with_meta(report, None)


def _design(inputs: dict):
    d = inputs.get("design")
    if not isinstance(d, dict):
        raise ParameterError("ls-verify needs a config key 'design'")
    try:
        if d.get("kind", "gaussian") == "gaussian":
            return GaussianDesign(
                np.array(d["sigma"], dtype=float),
                np.array(d["w_star"], dtype=float),
                float(d["noise_std"]),
                int(d["n"]),
            )
        if d["kind"] == "bounded":
            return BoundedDesign(int(d["d"]), np.array(d["w_star"], dtype=float), float(d["noise"]), int(d["n"]))
    except KeyError as exc:
        raise ParameterError(f"design is missing {exc}") from exc
    raise ParameterError(f"unknown design kind {d['kind']!r}")


def _cmd_ls_verify(inputs: dict, seed: int) -> dict:
    spec = LsPosteriorSpec(
        float(_req(inputs, "alpha")), float(_req(inputs, "gamma")), float(_req(inputs, "lam", "lambda"))
    )
    datasets = int(inputs.get("datasets") or 1000)
    report = ls_probability_one_experiment(
        _design(inputs), spec, datasets, seed, int(inputs.get("workers") or 1)
    )
    return _with_meta(report.to_dict(), seed)


def _cmd_dp_measure(inputs: dict, seed: int) -> dict:
    n = int(_req(inputs, "n"))
    if inputs.get("kernel"):
        m = int(_req(inputs, "atoms"))
        h = int(_req(inputs, "hypotheses"))
        kernel = load_kernel_csv(inputs["kernel"], n, m, h)
        params = {"kernel": inputs["kernel"], "n": n, "atoms": m, "hypotheses": h}
    else:
        _, losses = load_world_csv(_req(inputs, "world"))
        gamma = float(_req(inputs, "gamma"))
        kernel = gibbs_kernel(GibbsKernel(gamma, losses), n)
        params = {"world": inputs["world"], "n": n, "gamma": gamma, "dp_guarantee": 2.0 * gamma / n}
    report = {"kind": "dp-epsilon", "epsilon": measure_dp_epsilon(kernel), "params": params,
              "paper_tag": "exhaustive-dp-measurement"}
    return _with_meta(report, None)


def _parse_grid(entries) -> dict[str, list]:
    grid: dict[str, list] = {}
    for entry in entries or []:
        if isinstance(entry, str):
            key, _, values = entry.partition("=")
            try:
                grid[key.strip()] = [float(v) for v in values.split(",") if v.strip()]
            except ValueError as exc:
                raise ParameterError(f"bad grid entry {entry!r}") from exc
    return grid


def _cmd_optimize(inputs: dict, seed: int) -> dict:
    grid = inputs.get("grid")
    search = dict(grid) if isinstance(grid, dict) else _parse_grid(grid)
    if not search:
        raise ParameterError("optimize needs at least one --grid key=v1,v2,...")
    bound = _req(inputs, "bound")
    if bound == "ls-gap":
        target = _ls_problem(inputs)
    else:
        target = _load_world(inputs)
        search["delta"] = float(_req(inputs, "delta"))
        if inputs.get("sample"):
            search["sample"] = [int(a) for a in str(inputs["sample"]).split("-")]
    for key, values in search.items():
        if key not in ("delta", "sample") and not values:
            raise ParameterError(f"grid for {key!r} is empty")
    best, cert = optimize_posterior(target, bound, search, seed)
    return _with_meta({**cert.to_dict(), "best": best}, seed)


HANDLERS = {
    "certify": _cmd_certify,
    "verify": _cmd_verify,
    "ls-certify": _cmd_ls_certify,
    "ls-verify": _cmd_ls_verify,
    "dp-measure": _cmd_dp_measure,
    "optimize": _cmd_optimize,
}


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return to_json(report) + "\n"
    if fmt == "csv":
        buf = _stdio.StringIO()
        write_csv([report], buf)
        return buf.getvalue()
    raise ParameterError(f"format must be json or csv, got {fmt!r}")


def _destination(config: RunConfig) -> Path | None:
    if config.output_path:
        return Path(config.output_path)
    out_dir = os.environ.get(OUTPUT_DIR_ENV)
    if out_dir:
        return Path(out_dir) / f"{config.command}-report.{config.format}"
    return None


def run(config: RunConfig) -> int:
    """Execute one command; report errors on stderr and map them to exit codes."""
    try:
        if config.command not in HANDLERS:
            raise ParameterError(f"unknown command {config.command!r}")
        text = render(HANDLERS[config.command](config.inputs, config.seed), config.format)
        dest = _destination(config)
        if dest is None:
            sys.stdout.write(text)
        else:
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_text(text)
    except InapplicableBoundError as exc:
        print(f"pbkernel: bound not applicable: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, ValueError, OSError) as exc:
        print(f"pbkernel: error: {exc}", file=sys.stderr)
        return 2
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pbkernel", description="PAC-Bayes certificates and checks.")
    parser.add_argument("--version", action="version", version=f"pbkernel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file whose keys override the flags")
        p.add_argument("--output", help=f"output file (default: stdout, or ${OUTPUT_DIR_ENV})")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--seed", type=int, default=0)

    def bound_flags(p):
        p.add_argument("--gamma", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--lambda-c", dest="lambda_c", type=float)
        p.add_argument("--lambda", dest="lam", type=float)
        p.add_argument("--M", type=float)
        p.add_argument("--xi", choices=("seeger", "maurer"))

    def world_flags(p):
        p.add_argument("--world", help="CSV: atom probabilities, then one loss row per hypothesis")
        p.add_argument("--n", type=int, help="sample size (default 3)")
        p.add_argument("--prior", help="uniform (default), gibbs:<gamma>, or a kernel CSV")
        p.add_argument("--posterior", help="gibbs:<gamma> (default gibbs:5), prior, or a kernel CSV")

    p = sub.add_parser("certify", help="evaluate one certificate from scalars")
    common(p)
    p.add_argument("--bound", choices=BOUND_KINDS)
    p.add_argument("--emp", type=float)
    p.add_argument("--kl", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--delta", type=float)
    bound_flags(p)

    p = sub.add_parser("verify", help="violation probability of a bound on a finite world")
    common(p)
    world_flags(p)
    p.add_argument("--bound", choices=BOUND_KINDS + ("basic",))
    p.add_argument("--delta", type=float)
    p.add_argument("--trials", help="'exhaustive' (default) or a number of Monte Carlo trials")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--f-kind", dest="f_kind", help="f for --bound basic (default sqrt_n_gap)")
    p.add_argument("--mode", choices=("expectation", "pointwise"))
    bound_flags(p)

    p = sub.add_parser("ls-certify", help="least-squares gap certificate for a dataset")
    common(p)
    p.add_argument("--data", help="CSV with header x1,...,xd,y")
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--c-mult", dest="c_mult", type=float, help="use lambda = c * eps_hat instead")

    p = sub.add_parser("ls-verify", help="probability-one check over sampled datasets")
    common(p)
    p.add_argument("--alpha", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--datasets", type=int)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("dp-measure", help="exact DP epsilon of a finite kernel")
    common(p)
    p.add_argument("--kernel", help="CSV rows sample,hypothesis,weight")
    p.add_argument("--atoms", type=int)
    p.add_argument("--hypotheses", type=int)
    p.add_argument("--world", help="measure the Gibbs kernel of this world instead")
    p.add_argument("--gamma", type=float)
    p.add_argument("--n", type=int)

    p = sub.add_parser("optimize", help="grid search for the smallest certificate")
    common(p)
    world_flags(p)
    p.add_argument("--bound", choices=BOUND_KINDS + ("ls-gap",))
    p.add_argument("--delta", type=float)
    p.add_argument("--data", help="least-squares CSV (with --bound ls-gap)")
    p.add_argument("--sample", help="observed sample as dash-joined atom indices")
    p.add_argument("--grid", action="append", help="key=v1,v2,... (repeatable)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    if args.get("config"):
        try:
            args.update(load_config(args["config"]))
        except ParameterError as exc:
            print(f"pbkernel: error: {exc}", file=sys.stderr)
            return 2
    # config files may spell the prior scale as in the library
    if "lambda" in args:
        args["lam"] = args.pop("lambda")
    command = args.pop("command")
    config = RunConfig(
        command=command,
        output_path=args.pop("output", None),
        seed=int(args.pop("seed", 0) or 0),
        format=args.pop("format", "json") or "json",
        inputs=args,
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
