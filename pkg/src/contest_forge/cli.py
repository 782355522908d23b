"""Command-line interface: ``contest-forge <command> [flags]``.

Every command produces a result mapping plus a table.  JSON output wraps
both in ``{"manifest": ..., "result": ..., "table": ...}``; CSV output writes
the table after a ``# manifest: {...}`` comment line.  The manifest records
the exact argument vector, so re-running it reproduces the output byte for
byte (wall time is recorded only with ``--timing``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from .beliefs import ShortlistContext, marginal_posterior_cdf, marginal_posterior_pdf, normalizer_j
from .design import (
    optimal_complete_simple,
    optimal_max_effort,
    optimal_ratio,
    sup_optimal_m,
    sup_optimal_m_table,
    universal_bound,
    universal_bound_residual,
)
from .distributions import AbilityDistribution, Power, parse_distribution
from .equilibrium import best_response_gap, parse_cost, parse_prizes, solve_equilibrium
from .errors import ContestForgeError, DomainError, UnknownFigure
from .numerics import Quadrature
from .objectives import (
    Objective,
    SimpleContestSpec,
    effort_by_order_statistics,
    max_effort,
    total_effort,
)
from .simulate import estimate_objectives

#: Environment variable consulted when ``--workers`` is not given.
THREADS_ENV = "CONTEST_FORGE_THREADS"

FIGURES = ("beliefs", "dist_opt", "universal", "performance")


class UsageError(ContestForgeError):
    """A flag value violates a precondition; reported with exit status 2."""


@dataclass
class CommandResult:
    """Structured output of one command."""

    data: dict[str, Any]
    columns: list[str] = field(default_factory=list)
    rows: list[list[Any]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Flag parsing helpers
# ---------------------------------------------------------------------------


def _dist(text: str) -> AbilityDistribution:
    try:
        return parse_distribution(text)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def parse_n_list(text: str) -> list[int]:
    """Comma-separated integers and ``start:stop:step`` ranges (stop inclusive); ``a*b`` doubles."""
    values: list[int] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        try:
            if "*" in part:
                start, stop = (int(v) for v in part.split("*"))
                k = start
                while k <= stop:
                    values.append(k)
                    k *= 2
            elif ":" in part:
                pieces = [int(v) for v in part.split(":")]
                start, stop = pieces[0], pieces[1]
                step = pieces[2] if len(pieces) > 2 else 1
                values.extend(range(start, stop + 1, step))
            else:
                values.append(int(part))
        except ValueError as exc:
            raise UsageError(f"cannot parse n list entry {part!r}") from exc
    return values


def _require_n(n: int, minimum: int = 2) -> None:
    if n < 2:
        raise UsageError("n must be ≥ 2")
    if n < minimum:
        raise UsageError(f"n must be ≥ {minimum}")


def _require_m(n: int, m: int) -> None:
    if not 2 <= m <= n:
        raise UsageError(f"m must satisfy 2 ≤ m ≤ n, got m={m}, n={n}")


def _quad(args: argparse.Namespace) -> Quadrature | None:
    if args.tol is None:
        return None
    if not 0 < args.tol < 1:
        raise UsageError("tol must lie in (0, 1)")
    return Quadrature(relative_tolerance=args.tol, absolute_tolerance=args.tol * 1e-3, max_subdivisions=400)


def _finite(value: float) -> float | None:
    return None if value is None or not math.isfinite(value) else float(value)


def _fit(xs: Sequence[float], ys: Sequence[float]) -> dict[str, float] | None:
    """Least-squares line ``y = a + b x`` with its coefficient of determination."""
    if len(xs) < 3:
        return None
    x, y = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (intercept + slope * x)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid**2) / total) if total > 0 else 1.0
    return {"intercept": float(intercept), "slope": float(slope), "r_squared": r2}


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_design(args: argparse.Namespace) -> CommandResult:
    objective = Objective(args.objective)
    _require_n(args.n, 2 if objective is Objective.MAX else 3)
    if args.budget < 0:
        raise UsageError("budget must be non-negative")
    dist = _dist(args.dist)
    if objective is Objective.MAX:
        report = optimal_max_effort(dist, args.n, args.budget)
        rows = [[report.chosen_m, 1, report.objective_value]]
        return CommandResult(report.to_dict(), ["m", "prizes", "objective_value"], rows)
    report = optimal_complete_simple(dist, args.n, workers=args.workers)
    scale = args.budget
    sweep = report.diagnostics["sweep"]
    data = report.to_dict()
    data["prizes"] = [v * scale for v in report.chosen_prizes]
    data["objective_value"] = report.objective_value * scale
    data["diagnostics"] = {"sweep": [{"m": m, "value": v * scale, "representation": how} for m, v, how in sweep]}
    rows = [[m, v * scale, how] for m, v, how in sweep]
    return CommandResult(data, ["m", "total_effort", "representation"], rows)


def cmd_equilibrium(args: argparse.Namespace) -> CommandResult:
    _require_n(args.n)
    _require_m(args.n, args.m)
    if args.points < 2:
        raise UsageError("points must be at least 2")
    dist = _dist(args.dist)
    config = parse_prizes(args.prizes, args.n, args.m, args.budget)
    cost = parse_cost(args.cost)
    ctx = ShortlistContext(dist, args.n, args.m)
    schedule = solve_equilibrium(ctx, config, cost, grid_size=args.grid)
    q_lo, q_hi = dist.quantile_bounds()
    qs = np.linspace(q_hi, q_lo, args.points)
    xs = np.asarray(dist.ability_at(qs), dtype=float)
    efforts = np.asarray(schedule(xs), dtype=float)
    columns = ["x", "quantile", "effort"]
    rows: list[list[Any]] = [[float(x), float(q), float(e)] for x, q, e in zip(xs, qs, efforts)]
    data: dict[str, Any] = {"dist": dist.spec, "n": args.n, "m": args.m, "prizes": list(config.prizes), "cost": cost.spec}
    if args.certificate:
        columns.append("best_response_gap")
        gaps = []
        for row in rows:
            x = row[0]
            gap = best_response_gap(ctx, config, cost, schedule, x) if x > 0 else 0.0
            row.append(gap)
            gaps.append(gap)
        data["max_best_response_gap"] = max(gaps)
    return CommandResult(data, columns, rows)


def cmd_beliefs(args: argparse.Namespace) -> CommandResult:
    _require_n(args.n)
    _require_m(args.n, args.m)
    dist = _dist(args.dist)
    ctx = ShortlistContext(dist, args.n, args.m)
    return _belief_table(ctx, [args.x1], args.points)


def _belief_table(ctx: ShortlistContext, x1_values: Sequence[float], points: int) -> CommandResult:
    dist = ctx.dist
    q_lo, q_hi = dist.quantile_bounds()
    z = np.asarray(dist.ability_at(np.linspace(q_hi, q_lo, points)), dtype=float)
    prior_pdf = np.asarray(dist.pdf(z), dtype=float)
    prior_cdf = np.asarray(dist.cdf(z), dtype=float)
    rows = []
    for x1 in x1_values:
        lo, hi = dist.support
        if not lo <= x1 <= hi:
            raise UsageError(f"x1={x1} lies outside the support [{lo}, {hi}]")
        pdf = np.asarray(marginal_posterior_pdf(ctx, x1, z), dtype=float)
        cdf = np.asarray(marginal_posterior_cdf(ctx, x1, z), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            factor = np.where(prior_pdf > 0, pdf / prior_pdf, np.nan)
        for k in range(points):
            rows.append([x1, z[k], _finite(factor[k]), pdf[k], cdf[k], prior_pdf[k], prior_cdf[k]])
    data = {
        "dist": dist.spec,
        "n": ctx.n,
        "m": ctx.m,
        "x1": list(x1_values),
        "admission_probability": [float(normalizer_j(ctx, x)) for x in x1_values],
    }
    return CommandResult(data, ["x1", "z", "factor", "posterior_pdf", "posterior_cdf", "prior_pdf", "prior_cdf"], rows)


def cmd_simulate(args: argparse.Namespace) -> CommandResult:
    _require_n(args.n)
    _require_m(args.n, args.m)
    if args.trials < 1000:
        raise UsageError("trials must be at least 1000")
    dist = _dist(args.dist)
    config = parse_prizes(args.prizes, args.n, args.m, args.budget)
    cost = parse_cost(args.cost)
    ctx = ShortlistContext(dist, args.n, args.m)
    schedule = solve_equilibrium(ctx, config, cost, grid_size=512)
    te, me = estimate_objectives(config, dist, cost, schedule, args.trials, args.seed, args.workers)
    rows = []
    data: dict[str, Any] = {"dist": dist.spec, "n": args.n, "m": args.m, "prizes": list(config.prizes), "cost": cost.spec}
    for name, est, which in (("total", te, Objective.TOTAL), ("max", me, Objective.MAX)):
        reference = effort_by_order_statistics(dist, config, cost, which, schedule)
        z = est.z_score(reference)
        rows.append([name, est.mean, est.standard_error, reference, _finite(z), est.trials])
        data[name] = {**est.to_dict(), "analytic": reference, "z_score": _finite(z)}
    return CommandResult(data, ["objective", "mean", "standard_error", "analytic", "z_score", "trials"], rows)


def cmd_sweep(args: argparse.Namespace) -> CommandResult:
    _require_n(args.n, 3)
    dist = _dist(args.dist)
    quad = _quad(args)
    columns = ["n", "m", "l", "S_total", "S_max", "representation"]
    if args.timing:
        columns.append("wall_time_ms")
    rows = []
    for m in range(2, args.n + 1):
        ls = [m - 1] if args.prizes == "complete" else list(range(1, m))
        for l in ls:
            start = time.perf_counter()
            spec = SimpleContestSpec(args.n, m, l)
            row = [args.n, m, l, total_effort(dist, spec, quad), max_effort(dist, spec, quad), "quantile"]
            if args.timing:
                row.append(1e3 * (time.perf_counter() - start))
            rows.append(row)
    data = {"dist": dist.spec, "n": args.n, "prizes": args.prizes}
    return CommandResult(data, columns, rows)


def cmd_compare(args: argparse.Namespace) -> CommandResult:
    ns = parse_n_list(args.n_list)
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise UsageError("n list must be strictly ascending")
    if any(n < 4 for n in ns):
        raise UsageError("every n in the list must be ≥ 4")
    dist = _dist(args.dist)
    quad = _quad(args)
    rows = []
    for n in ns:
        me_two = max_effort(dist, SimpleContestSpec(n, 2, 1), quad)
        me_all = max_effort(dist, SimpleContestSpec(n, n, 1), quad)
        te_two = total_effort(dist, SimpleContestSpec(n, 2, 1), quad)
        te_all = total_effort(dist, SimpleContestSpec(n, n, 1), quad)
        best = optimal_complete_simple(dist, n, workers=args.workers)
        rows.append(
            [n, me_two, me_all, best.chosen_m, best.objective_value, te_two, te_all,
             me_two / me_all, best.objective_value / te_all, te_two / te_all]
        )
    columns = [
        "n", "max_effort_2_wta", "max_effort_n_wta", "m_star", "total_effort_opt", "total_effort_2_wta",
        "total_effort_n_wta", "ratio_max_2_vs_n", "ratio_total_opt_vs_n", "ratio_total_2_vs_n",
    ]
    logs = [math.log(r[0]) for r in rows]
    fits = {
        "ratio_max_2_vs_n~log_n": _fit(logs, [r[7] for r in rows]),
        "ratio_total_2_vs_n~log_n": _fit(logs, [r[9] for r in rows]),
        "total_effort_2_wta~log_n": _fit(logs, [r[5] for r in rows]),
        "ratio_total_opt_vs_n~n": _fit([r[0] for r in rows], [r[8] for r in rows]),
    }
    data = {"dist": dist.spec, "n_list": ns, "fits": fits}
    return CommandResult(data, columns, rows)


def cmd_bound(args: argparse.Namespace) -> CommandResult:
    k = universal_bound()
    residual = universal_bound_residual()
    return CommandResult({"k_bar": k, "residual": residual}, ["k_bar", "residual"], [[k, residual]])


def cmd_supm(args: argparse.Namespace) -> CommandResult:
    _require_n(args.n, 3)
    m = sup_optimal_m(args.n)
    table = sup_optimal_m_table(args.n)
    data = {"n": args.n, "m": m, "ratio": m / args.n}
    return CommandResult(data, ["m", "h_total"], [[mm, h] for mm, h in table])


def cmd_figures(args: argparse.Namespace) -> CommandResult:
    which = args.which
    if which not in FIGURES:
        raise UnknownFigure(f"unknown figure {which!r}; choose from {', '.join(FIGURES)}")
    if which == "beliefs":
        dist = _dist(args.dist) if args.dist else Power(2.0)
        ctx = ShortlistContext(dist, 5, 2)
        result = _belief_table(ctx, [0.4, 0.6, 0.8], args.points)
        result.data["figure"] = which
        return result
    ns = parse_n_list(args.n_list)
    for n in ns:
        _require_n(n, 3)
    if which == "universal":
        rows = [[n, sup_optimal_m(n), universal_bound() * n] for n in ns]
        return CommandResult({"figure": which}, ["n", "sup_optimal_m", "bound_times_n"], rows)
    dist = _dist(args.dist or "uniform:0,1")
    ratio = optimal_ratio(dist)
    if which == "dist_opt":
        rows = []
        for n in ns:
            best = optimal_complete_simple(dist, n, workers=args.workers)
            rows.append([n, best.chosen_m, ratio * n, min(max(round(ratio * n), 2), n)])
        data = {"figure": which, "dist": dist.spec, "ratio": ratio}
        return CommandResult(data, ["n", "argmax_m", "predicted_m", "predicted_m_rounded"], rows)
    # performance: total effort of competing designs
    k_bar = universal_bound()
    rows = []
    for n in ns:
        best = optimal_complete_simple(dist, n, workers=args.workers)
        sweep = {m: v for m, v, _ in best.diagnostics["sweep"]}
        m_ratio = min(max(round(ratio * n), 2), n)
        m_bar = min(max(round(k_bar * n), 2), n)
        te_all = total_effort(dist, SimpleContestSpec(n, n, 1))
        rows.append([n, best.objective_value, sweep[m_ratio], sweep[m_bar], sweep[2], te_all])
    data = {"figure": which, "dist": dist.spec, "ratio": ratio, "k_bar": k_bar}
    columns = ["n", "optimal", "asymptotic_ratio_design", "universal_bound_design", "two_wta", "n_wta"]
    return CommandResult(data, columns, rows)


COMMANDS: dict[str, Callable[[argparse.Namespace], CommandResult]] = {
    "design": cmd_design,
    "equilibrium": cmd_equilibrium,
    "beliefs": cmd_beliefs,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
    "bound": cmd_bound,
    "supm": cmd_supm,
    "figures": cmd_figures,
}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _default_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        return max(int(raw), 1) if raw else 1
    except ValueError:
        return 1


def _global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--seed", type=int, default=default(0), help="random seed (default 0)")
    parser.add_argument(
        "--workers", type=int, default=default(None), help=f"worker threads (default ${THREADS_ENV} or 1)"
    )
    parser.add_argument("--out", default=default(None), help="write output to this file instead of stdout")
    parser.add_argument("--format", choices=("json", "csv"), default=default("json"), help="output format")
    parser.add_argument("--tol", type=float, default=default(None), help="relative quadrature tolerance")
    parser.add_argument(
        "--timing", action="store_true", default=default(False), help="record wall time in the manifest"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contest-forge", description="Equilibria and optimal design of rank-order contests with a shortlist."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, description=help_text)
        _global_flags(p, suppress=True)
        return p

    p = add("design", "optimal contest for an objective")
    p.add_argument("--objective", choices=("total", "max"), default="total")
    p.add_argument("--dist", default="uniform:0,1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--budget", type=float, default=1.0)
    p.add_argument("--json", dest="json_out", default=None, help="also write the JSON document to this file")

    p = add("equilibrium", "tabulate the equilibrium effort schedule")
    p.add_argument("--dist", default="uniform:0,1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--prizes", default="wta", help="wta, complete, equal:l or a comma-separated list")
    p.add_argument("--budget", type=float, default=1.0)
    p.add_argument("--cost", default="linear", help="linear[:c] or power:p[,c]")
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--certificate", action="store_true", help="add the best-response gap per point")

    p = add("beliefs", "posterior beliefs of an admitted contestant")
    p.add_argument("--dist", default="power:2")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--x1", type=float, required=True)
    p.add_argument("--points", type=int, default=101)

    p = add("simulate", "Monte Carlo estimates of total and maximum effort")
    p.add_argument("--dist", default="uniform:0,1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--prizes", default="complete")
    p.add_argument("--budget", type=float, default=1.0)
    p.add_argument("--cost", default="linear")
    p.add_argument("--trials", type=int, default=100_000)

    p = add("sweep", "objectives of simple contests over the shortlist size")
    p.add_argument("--dist", default="uniform:0,1")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--prizes", choices=("complete", "all"), default="complete")

    p = add("compare", "growth of objectives with and without a shortlist")
    p.add_argument("--dist", default="uniform:0,1")
    p.add_argument("--n-list", default="8*256", help="e.g. 8,16,32 or 8:64:8 or 8*1024 (doubling)")

    add("bound", "universal cap on the optimal admission ratio")

    p = add("supm", "largest optimal shortlist over all priors")
    p.add_argument("--n", type=int, required=True)

    p = add("figures", "data series behind the figures")
    p.add_argument("which", help=", ".join(FIGURES))
    p.add_argument("--dist", default=None)
    p.add_argument("--n-list", default="4:64:4")
    p.add_argument("--points", type=int, default=101)
    return parser


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _clean(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return _finite(float(value))
    return value


def build_manifest(argv: Sequence[str], args: argparse.Namespace, wall_time: float | None) -> dict[str, Any]:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("timing",)}
    manifest: dict[str, Any] = {
        "tool": "contest-forge",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "flags": flags,
        "seed": args.seed,
        "outputs": [p for p in (args.out, getattr(args, "json_out", None)) if p],
    }
    if wall_time is not None:
        manifest["wall_time_seconds"] = wall_time
    return _clean(manifest)


def render(result: CommandResult, manifest: dict[str, Any], fmt: str) -> str:
    if fmt == "json":
        doc = {
            "manifest": manifest,
            "result": _clean(result.data),
            "table": {"columns": result.columns, "rows": _clean(result.rows)},
        }
        return json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n"
    buffer = io.StringIO()
    buffer.write("# manifest: " + json.dumps(manifest, sort_keys=False, allow_nan=False) + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(result.columns)
    for row in _clean(result.rows):
        writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buffer.getvalue()


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.workers is None:
        args.workers = _default_workers()
    start = time.perf_counter()
    try:
        if args.workers < 1:
            raise UsageError("workers must be at least 1")
        result = COMMANDS[args.command](args)
    except (UsageError, DomainError, UnknownFigure) as exc:
        print(f"contest-forge: error: {exc}", file=sys.stderr)
        return 2
    except ContestForgeError as exc:
        print(f"contest-forge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    wall = time.perf_counter() - start if args.timing else None
    manifest = build_manifest(argv, args, wall)
    text = render(result, manifest, args.format)
    json_out = getattr(args, "json_out", None)
    if json_out:
        with open(json_out, "w", encoding="utf-8") as fh:
            fh.write(render(result, manifest, "json"))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
