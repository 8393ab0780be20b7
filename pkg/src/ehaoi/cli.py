"""Command line driver.

Exit codes: 0 success, 1 invalid input, 2 value iteration did not converge,
3 structural error in an induced chain (e.g. several recurrent classes).
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import yaml

from .approx import find_amax
from .errors import ConfigError, EhaoiError, InfeasibleAction, NotConverged, StructuralError
from .experiments import (
    METRIC_COLUMNS,
    SWEEP_EXTRA,
    alpha_points,
    bmax_points,
    check_increasing,
    evaluate_row,
    existing_keys,
    parse_grid,
    run_points,
    solve,
    solved_row,
    write_rows,
)
from .model import config_hash, dump_config, load_config, prepare, validate_config
from .policy import dump_policy, load_policy
from .presets import PRESETS
from .rewards import RewardSpec
from .sim import SimConfig, simulate, trace, write_trace_csv
from .solver import DEFAULT_EPS_C, DEFAULT_MAX_ITER
from .statespace import build_kernel

log = logging.getLogger("ehaoi")

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_STRUCTURAL = 0, 1, 2, 3

SIM_COLUMNS = [
    "avg_age", "se_avg_age", "peak_hit_prob", "se_peak_hit_prob",
    "avg_tx_power", "se_avg_tx_power", "avg_battery", "se_avg_battery",
    "slots", "horizon", "burn_in", "seed", "config_hash",
]


def _shared(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="instance file (YAML)")
    p.add_argument("--objective", choices=["peak", "avg", "weighted"], default="avg")
    p.add_argument("--alpha", type=float, default=1.0, help="weight for --objective weighted")
    p.add_argument("--r-prime", type=float, default=-1.0, help="cap reward for --objective peak")
    p.add_argument("--epsilon-c", type=float, default=DEFAULT_EPS_C, help="span stopping tolerance")
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ehaoi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="optimal policy and metrics for one instance")
    _shared(p)
    p.add_argument("--policy-out", help="write the policy file here")

    p = sub.add_parser("evaluate", help="metrics of a given policy file")
    _shared(p)
    p.add_argument("--policy", required=True)

    p = sub.add_parser("sweep-bmax", help="solve over battery capacities, recovery on/off, mode subsets")
    _shared(p)
    p.add_argument("--b-max", default="2:30", help="grid like 2:30 or 2,4,8")
    p.add_argument("--auto-amax", action="store_true", help="pick the age cap per point (avg objective)")
    p.add_argument("--amax-epsilon", type=float, default=1e-6)
    p.add_argument("--resume", action="store_true", help="append to --out, skipping finished rows")

    p = sub.add_parser("sweep-alpha", help="weighted objective over alpha")
    _shared(p)
    p.add_argument("--alphas", default="0:1:0.1")
    p.add_argument("--p-rec", help="comma-separated recovery probabilities (default: the config's)")
    p.add_argument("--resume", action="store_true")

    p = sub.add_parser("approx-amax", help="grow the age cap until the cap is rarely hit")
    _shared(p)
    p.add_argument("--k0", type=int, default=2)
    p.add_argument("--epsilon", type=float, default=1e-6)
    p.add_argument("--step", type=int, default=5)
    p.add_argument("--ceiling", type=int, default=500)
    p.add_argument("--policy-out")

    for name, horizon, burn_in in (("simulate", 10**6, 10**4), ("trace", 100, 0)):
        p = sub.add_parser(name, help=f"Monte Carlo {name} under a policy")
        _shared(p)
        p.add_argument("--policy", help="policy file (default: solve with --objective)")
        p.add_argument("--horizon", type=int, default=horizon)
        p.add_argument("--burn-in", type=int, default=burn_in)

    p = sub.add_parser("preset", help="write a preset instance file")
    p.add_argument("name", choices=sorted(PRESETS))
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="preset parameter, e.g. p_rec=0.6 (repeatable)")
    p.add_argument("--out")
    return parser


def _spec(args) -> RewardSpec:
    return RewardSpec(args.objective, alpha=args.alpha, r_prime=args.r_prime)


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _policy_for(args, cfg):
    kernel = build_kernel(prepare(cfg))
    if args.policy:
        return kernel, load_policy(args.policy, kernel)
    s = solve(cfg, _spec(args), args.epsilon_c, args.max_iter)
    return s.kernel, s.result.policy


def cmd_solve(args) -> int:
    cfg = validate_config(load_config(args.config))
    s = solve(cfg, _spec(args), args.epsilon_c, args.max_iter)
    if args.policy_out:
        dump_policy(s.result.policy, s.kernel, args.policy_out)
    write_rows([solved_row(s, _spec(args))], args.out, METRIC_COLUMNS + ["config_hash"])
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = validate_config(load_config(args.config))
    kernel = build_kernel(prepare(cfg))
    policy = load_policy(args.policy, kernel)
    write_rows([evaluate_row(kernel, policy, _spec(args))], args.out, METRIC_COLUMNS + ["config_hash"])
    return EXIT_OK


def _run_sweep(args, points) -> int:
    append = bool(args.resume and args.out)
    if append:
        done = existing_keys(args.out)
        points = [p for p in points if p.key() not in done]
    rows = run_points(points, args.jobs)
    write_rows(rows, args.out, METRIC_COLUMNS + SWEEP_EXTRA, append=append)
    return EXIT_OK


def cmd_sweep_bmax(args) -> int:
    base = validate_config(load_config(args.config))
    values = parse_grid(args.b_max, int)
    check_increasing(values, "--b-max")
    points = bmax_points(base, values, _spec(args), eps_c=args.epsilon_c, max_iter=args.max_iter,
                         auto_amax=args.auto_amax, amax_epsilon=args.amax_epsilon)
    return _run_sweep(args, points)


def cmd_sweep_alpha(args) -> int:
    base = validate_config(load_config(args.config))
    alphas = parse_grid(args.alphas, float)
    check_increasing(alphas, "--alphas")
    p_recs = parse_grid(args.p_rec, float) if args.p_rec else None
    points = alpha_points(base, alphas, p_recs, eps_c=args.epsilon_c, max_iter=args.max_iter)
    return _run_sweep(args, points)


def cmd_approx(args) -> int:
    cfg = validate_config(load_config(args.config))
    res = find_amax(cfg, k0=args.k0, epsilon=args.epsilon, step=args.step,
                    ceiling=args.ceiling, eps_c=args.epsilon_c)
    rows = [{"K": k, "peak_prob": repr(p)} for k, p in res.history]
    write_rows(rows, args.out, ["K", "peak_prob"])
    if args.policy_out:
        kernel = build_kernel(prepare(cfg.replace(a_max=res.a_max_final)))
        dump_policy(res.policy, kernel, args.policy_out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = validate_config(load_config(args.config))
    kernel, policy = _policy_for(args, cfg)
    sim = SimConfig(args.horizon, args.burn_in, args.seed)
    em = simulate(kernel.cfg, policy, sim)
    row = {c: repr(getattr(em, c)) for c in SIM_COLUMNS[:8]}
    row.update(slots=em.slots, horizon=sim.horizon, burn_in=sim.burn_in, seed=sim.seed,
               config_hash=config_hash(cfg))
    write_rows([row], args.out, SIM_COLUMNS)
    return EXIT_OK


def cmd_trace(args) -> int:
    cfg = validate_config(load_config(args.config))
    kernel, policy = _policy_for(args, cfg)
    events = trace(kernel.cfg, policy, SimConfig(args.horizon, args.burn_in, args.seed))
    _emit(write_trace_csv(events, kernel.cfg), args.out)
    return EXIT_OK


def cmd_preset(args) -> int:
    params = {}
    for item in args.set:
        key, _, value = item.partition("=")
        params[key.strip()] = yaml.safe_load(value)
    if "modes" in params and isinstance(params["modes"], list):
        params["modes"] = tuple(params["modes"])
    if "error_probs" in params:
        params["error_probs"] = tuple(params["error_probs"])
    try:
        cfg = PRESETS[args.name](**params)
    except TypeError as exc:
        raise ConfigError(f"preset {args.name}: {exc}") from None
    _emit(dump_config(validate_config(cfg)), args.out)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "evaluate": cmd_evaluate,
    "sweep-bmax": cmd_sweep_bmax,
    "sweep-alpha": cmd_sweep_alpha,
    "approx-amax": cmd_approx,
    "simulate": cmd_simulate,
    "trace": cmd_trace,
    "preset": cmd_preset,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BrokenPipeError:
        # downstream reader (e.g. head) closed early; not an error of ours
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except ConfigError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_INVALID
    except NotConverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except StructuralError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STRUCTURAL
    except (InfeasibleAction, ValueError, OSError, EhaoiError, csv.Error, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
