"""Command line entry point: ``resplan plan|run|account``."""
from __future__ import annotations

import argparse
import logging
import math
import sys

from . import __version__, files
from .accounting import PrivacyAccount, calibrate_budget
from .mechanism import NoiseSource, measure_all
from .planner import (MAXVAR, SUMVAR, LossSpec, SolverError, build_cost_model, marginal_variances,
                      max_variance, rmse, solve_max_variance, solve_sum_of_variances,
                      solve_utility_constrained)
from .reconstruct import reconstruct_all
from .schema import DataError, SchemaError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_DATA = 0, 2, 3, 4
DEFAULT_EPSILONS = (0.5, 1.0, 2.0, 4.0, 8.0)

log = logging.getLogger("resplan")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _budget_args(p, allow_loss=True):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--budget-pcost", type=float, metavar="C", help="privacy cost")
    g.add_argument("--budget-rho", type=float, metavar="RHO", help="rho-zCDP target")
    g.add_argument("--budget-mu", type=float, metavar="MU", help="mu-Gaussian DP target")
    g.add_argument("--budget-eps-delta", type=_floats, metavar="EPS,DELTA",
                   help="(epsilon, delta)-DP target")
    if allow_loss:
        g.add_argument("--loss-bound", type=float, metavar="GAMMA",
                       help="spend the least budget keeping the loss at most GAMMA")
    return g


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resplan", description=__doc__)
    parser.add_argument("--version", action="version", version=f"resplan {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--schema", required=True)
        p.add_argument("--workload", required=True)
        p.add_argument("--objective", choices=(SUMVAR, MAXVAR), default=SUMVAR)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--epsilons", type=_floats, default=list(DEFAULT_EPSILONS),
                       help="epsilons for the delta table in the report")

    p = sub.add_parser("plan", help="choose noise scales (never reads data)")
    common(p)
    _budget_args(p)

    p = sub.add_parser("run", help="plan (or load a plan), measure and reconstruct")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--plan", help="existing plan file; replaces the budget flags")
    _budget_args(p)
    p.add_argument("--seed", type=int, help="master seed (random if omitted; always recorded)")
    p.add_argument("--zero-noise", action="store_true",
                   help="TESTING ONLY: release exact counts with no privacy")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("account", help="convert a budget to DP guarantees")
    g = _budget_args(p, allow_loss=False)
    g.add_argument("--plan", help="read the privacy cost from a plan file header")
    p.add_argument("--epsilons", type=_floats, default=list(DEFAULT_EPSILONS))
    return parser


def _target_pcost(args) -> float | None:
    if args.budget_pcost is not None:
        if not args.budget_pcost > 0:
            raise ConfigError("--budget-pcost must be positive")
        return args.budget_pcost
    if args.budget_rho is not None:
        return calibrate_budget(rho=args.budget_rho)
    if args.budget_mu is not None:
        return calibrate_budget(mu=args.budget_mu)
    if args.budget_eps_delta is not None:
        if len(args.budget_eps_delta) != 2:
            raise ConfigError("--budget-eps-delta takes EPS,DELTA")
        eps, delta = args.budget_eps_delta
        return calibrate_budget(epsilon=eps, delta=delta)
    return None


def _solve(model, args):
    loss_bound = getattr(args, "loss_bound", None)
    if loss_bound is not None:
        return solve_utility_constrained(model, LossSpec(args.objective), loss_bound)
    pcost = _target_pcost(args)
    if pcost is None:
        raise ConfigError("give one of --budget-pcost, --budget-rho, --budget-mu, "
                          "--budget-eps-delta or --loss-bound")
    solve = solve_sum_of_variances if args.objective == SUMVAR else solve_max_variance
    return solve(model, pcost)


def _header(seed, pcost, **extra):
    acct = PrivacyAccount(pcost)
    return files.header_lines(__version__, seed, pcost, acct.rho, acct.mu, **extra)


def _report(model, plan, epsilons, seed=None) -> str:
    schema = model.schema
    acct = PrivacyAccount(plan.total_pcost)
    lines = _header(seed, plan.total_pcost, objective=plan.objective)
    lines += ["", f"objective: {plan.objective}", f"privacy cost: {files.fmt(acct.pcost)}",
              f"rho (zCDP): {files.fmt(acct.rho)}", f"mu (Gaussian DP): {files.fmt(acct.mu)}",
              f"rmse: {rmse(model, plan):.6f}", f"max variance: {max_variance(model, plan):.6f}",
              "", "epsilon,delta"]
    lines += [f"{files.fmt(e)},{files.fmt(acct.delta(e))}" for e in epsilons]
    lines += ["", "marginal,cells,weight,cell_variance"]
    var = marginal_variances(model, plan)
    for A, w in model.workload:
        name = files.attrs_key(schema, A) or "(total)"
        lines.append(f"{name},{schema.cell_count(A)},{files.fmt(w)},{files.fmt(var[A])}")
    return "\n".join(lines) + "\n"


def _write_plan_outputs(out, model, plan, epsilons, seed=None):
    header = _header(seed, plan.total_pcost, objective=plan.objective,
                     predicted_loss=files.fmt(plan.predicted_loss))
    files.write_plan(out / "plan.csv", model.schema, plan, header)
    report = _report(model, plan, epsilons, seed)
    (out / "report.txt").write_text(report, encoding="utf-8")
    return report


def cmd_plan(args) -> int:
    schema = files.load_schema(args.schema)
    workload = files.load_workload(args.workload, schema)
    model = build_cost_model(schema, workload)
    plan = _solve(model, args)
    out = files.ensure_dir(args.out)
    sys.stdout.write(_write_plan_outputs(out, model, plan, args.epsilons))
    return EXIT_OK


def cmd_run(args) -> int:
    schema = files.load_schema(args.schema)
    workload = files.load_workload(args.workload, schema)
    model = build_cost_model(schema, workload)
    if args.plan:
        if any(getattr(args, k) is not None for k in
               ("budget_pcost", "budget_rho", "budget_mu", "budget_eps_delta", "loss_bound")):
            raise ConfigError("--plan cannot be combined with budget flags")
        plan = files.read_plan(args.plan, model)
    else:
        plan = _solve(model, args)
    dataset = files.load_dataset(args.dataset, schema)
    noise = NoiseSource(args.seed)
    if args.zero_noise:
        log.warning("--zero-noise: outputs are exact counts and NOT differentially private")
    out = files.ensure_dir(args.out)
    report = _write_plan_outputs(out, model, plan, args.epsilons, noise.seed)
    residuals = measure_all(dataset, plan, noise, zero_noise=args.zero_noise, workers=args.workers)
    extra = {"mode": "ZERO-NOISE (not private)"} if args.zero_noise else {}
    header = _header(noise.seed, plan.total_pcost, **extra)
    files.write_residuals(out / "residuals.csv", schema, residuals, header)
    for est in reconstruct_all(schema, workload, residuals, workers=args.workers):
        files.write_marginal(out / files.marginal_filename(schema, est.attrset), schema, est, header)
    sys.stdout.write(report)
    return EXIT_OK


def cmd_account(args) -> int:
    if args.plan:
        pcost = _plan_header_pcost(args.plan)
    else:
        pcost = _target_pcost(args)
    if pcost is None:
        raise ConfigError("give a budget flag or --plan")
    acct = PrivacyAccount(pcost)
    lines = [f"pcost: {files.fmt(acct.pcost)}", f"rho: {files.fmt(acct.rho)}",
             f"mu: {files.fmt(acct.mu)}", "epsilon,delta"]
    lines += [f"{files.fmt(e)},{files.fmt(acct.delta(e))}" for e in args.epsilons]
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def _plan_header_pcost(path) -> float:
    try:
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.startswith("# pcost:"):
                    return float(line.split(":", 1)[1])
    except (OSError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from None
    raise ConfigError(f"{path}: no pcost header")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if any(not (math.isfinite(e) and e >= 0) for e in getattr(args, "epsilons", [])):
        print("error: epsilons must be finite and non-negative", file=sys.stderr)
        return EXIT_CONFIG
    handler = {"plan": cmd_plan, "run": cmd_run, "account": cmd_account}[args.command]
    try:
        return handler(args)
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except SolverError as e:
        print(f"solver failure: {e} {e.diagnostics}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, SchemaError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
