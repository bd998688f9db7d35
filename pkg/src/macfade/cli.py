"""Command-line front end: JSON config in, CSV out.

Commands
    solve      solve the power prices for an explicit weight vector
    boundary   sweep a simplex grid of weight vectors into boundary points
    verify-mc  cross-check analytic rates and powers against Monte Carlo
    compare    corrected-vs-naive gap report at one weight vector

Exit codes: 0 success, 1 config error, 2 solver or quadrature
non-convergence, 3 verification failure.  All randomness flows from the
single seed in the config; CSV numbers carry 17 significant digits.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .boundary import compare_modes, rate_point, simplex_grid, sweep
from .fading import ExponentialGain, PiecewiseLinearEmpirical, UniformGain
from .kernel import (
    CdfMode,
    ChannelConfig,
    RateAwardVector,
    UserSpec,
)
from .montecarlo import estimate
from .quadrature import QuadratureError
from .solver import SolverError, SolverSettings, solve_lambda

__all__ = ["ConfigError", "GridSpec", "RunConfig", "load_config", "dump_config", "main", "entry"]

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_CONVERGENCE = 2
EXIT_VERIFY_FAILED = 3

LN2 = math.log(2.0)
_MISSING = object()


class ConfigError(Exception):
    """Configuration problem; the message names the offending field."""


@dataclass(frozen=True)
class GridSpec:
    resolution: int
    mu_min: float = 1e-3


@dataclass(frozen=True)
class RunConfig:
    channel: ChannelConfig
    mu: object  # RateAwardVector or GridSpec
    power_rel_tol: float
    max_outer_iters: int
    bracket_growth: float
    outer_abs_tol: float
    tail_epsilon: float
    mc_samples: int
    mc_seed: int
    mode: str  # corrected | naive | both
    units: str  # nats | bits
    threads: int
    output: str | None


def _expect_mapping(node, path):
    if not isinstance(node, dict):
        raise ConfigError(f"{path}: expected an object")
    return node


def _take(node: dict, key: str, path: str, default=_MISSING):
    if key in node:
        return node.pop(key)
    if default is _MISSING:
        raise ConfigError(f"{path}.{key}: missing required field")
    return default


def _no_leftovers(node: dict, path: str):
    if node:
        raise ConfigError(f"{path}.{next(iter(node))}: unknown field")


def _as_float(value, path, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number")
    out = float(value)
    if positive and not out > 0.0:
        raise ConfigError(f"{path}: must be positive")
    return out


def _as_int(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be at least {minimum}")
    return value


def _parse_fading(node, path, base_dir: Path):
    node = dict(_expect_mapping(node, path))
    kind = _take(node, "kind", path)
    if kind == "exponential":
        mean = _as_float(_take(node, "mean", path), f"{path}.mean", positive=True)
        _no_leftovers(node, path)
        return ExponentialGain(mean)
    if kind == "uniform":
        low = _as_float(_take(node, "low", path), f"{path}.low")
        high = _as_float(_take(node, "high", path), f"{path}.high")
        _no_leftovers(node, path)
        try:
            return UniformGain(low, high)
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if kind == "empirical":
        knots = node.pop("knots", None)
        csv_path = node.pop("csv", None)
        _no_leftovers(node, path)
        if (knots is None) == (csv_path is None):
            raise ConfigError(f"{path}: give exactly one of 'knots' or 'csv'")
        try:
            if csv_path is not None:
                return PiecewiseLinearEmpirical.from_csv(base_dir / csv_path)
            pairs = [(float(h), float(F)) for h, F in knots]
            return PiecewiseLinearEmpirical(
                tuple(h for h, _ in pairs), tuple(F for _, F in pairs)
            )
        except (OSError, TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: unknown fading kind {kind!r}")


def _parse_mu(node, path):
    if isinstance(node, list):
        try:
            return RateAwardVector(tuple(float(x) for x in node))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if isinstance(node, dict):
        node = dict(node)
        resolution = _as_int(_take(node, "resolution", path), f"{path}.resolution", minimum=1)
        mu_min = _as_float(node.pop("mu_min", 1e-3), f"{path}.mu_min", positive=True)
        _no_leftovers(node, path)
        return GridSpec(resolution, mu_min)
    raise ConfigError(f"{path}: expected a weight list or a grid object")


def parse_config(data: dict, base_dir: Path) -> RunConfig:
    root = dict(_expect_mapping(data, "config"))

    channel_node = dict(_expect_mapping(_take(root, "channel", "config"), "channel"))
    sigma2 = _as_float(_take(channel_node, "sigma2", "channel"), "channel.sigma2", positive=True)
    users_node = _take(channel_node, "users", "channel")
    _no_leftovers(channel_node, "channel")
    if not isinstance(users_node, list) or not users_node:
        raise ConfigError("channel.users: expected a nonempty list")
    users = []
    for idx, user_node in enumerate(users_node):
        upath = f"channel.users[{idx}]"
        user_node = dict(_expect_mapping(user_node, upath))
        fading = _parse_fading(_take(user_node, "fading", upath), f"{upath}.fading", base_dir)
        pbar = _as_float(_take(user_node, "pbar", upath), f"{upath}.pbar", positive=True)
        _no_leftovers(user_node, upath)
        users.append(UserSpec(fading, pbar))
    try:
        channel = ChannelConfig(sigma2, tuple(users))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"channel: {exc}") from exc

    mu = _parse_mu(_take(root, "mu", "config"), "mu")
    if isinstance(mu, RateAwardVector) and len(mu) != channel.n_users:
        raise ConfigError("mu: length must match the number of users")

    solver_node = dict(_expect_mapping(root.pop("solver", {}), "solver"))
    power_rel_tol = _as_float(solver_node.pop("power_rel_tol", 1e-6),
                              "solver.power_rel_tol", positive=True)
    max_outer_iters = _as_int(solver_node.pop("max_outer_iters", 200),
                              "solver.max_outer_iters", minimum=1)
    bracket_growth = _as_float(solver_node.pop("bracket_growth", 4.0),
                               "solver.bracket_growth")
    if not bracket_growth > 1.0:
        raise ConfigError("solver.bracket_growth: must exceed 1")
    _no_leftovers(solver_node, "solver")

    quad_node = dict(_expect_mapping(root.pop("quadrature", {}), "quadrature"))
    outer_abs_tol = _as_float(quad_node.pop("outer_abs_tol", 1e-8),
                              "quadrature.outer_abs_tol", positive=True)
    tail_epsilon = _as_float(quad_node.pop("tail_epsilon", 1e-12),
                             "quadrature.tail_epsilon", positive=True)
    if not tail_epsilon < 1.0:
        raise ConfigError("quadrature.tail_epsilon: must be below 1")
    _no_leftovers(quad_node, "quadrature")

    mc_node = dict(_expect_mapping(root.pop("mc", {}), "mc"))
    mc_samples = _as_int(mc_node.pop("n_samples", 1_000_000), "mc.n_samples", minimum=1)
    mc_seed = _as_int(mc_node.pop("seed", 12345), "mc.seed", minimum=0)
    _no_leftovers(mc_node, "mc")

    mode = root.pop("mode", "corrected")
    if mode not in ("corrected", "naive", "both"):
        raise ConfigError("mode: expected 'corrected', 'naive' or 'both'")
    units = root.pop("units", "nats")
    if units not in ("nats", "bits"):
        raise ConfigError("units: expected 'nats' or 'bits'")
    threads = _as_int(root.pop("threads", os.cpu_count() or 1), "threads", minimum=1)
    output = root.pop("output", None)
    if output is not None and not isinstance(output, str):
        raise ConfigError("output: expected a path string")
    _no_leftovers(root, "config")

    return RunConfig(
        channel=channel,
        mu=mu,
        power_rel_tol=power_rel_tol,
        max_outer_iters=max_outer_iters,
        bracket_growth=bracket_growth,
        outer_abs_tol=outer_abs_tol,
        tail_epsilon=tail_epsilon,
        mc_samples=mc_samples,
        mc_seed=mc_seed,
        mode=mode,
        units=units,
        threads=threads,
        output=output,
    )


def load_config(path: str) -> RunConfig:
    config_path = Path(path)
    try:
        text = config_path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(data, config_path.resolve().parent)


def _fading_to_dict(dist) -> dict:
    if isinstance(dist, ExponentialGain):
        return {"kind": "exponential", "mean": dist.mean_gain}
    if isinstance(dist, UniformGain):
        return {"kind": "uniform", "low": dist.low, "high": dist.high}
    if isinstance(dist, PiecewiseLinearEmpirical):
        return {"kind": "empirical",
                "knots": [[h, F] for h, F in zip(dist.h_knots, dist.cdf_knots)]}
    raise TypeError(f"cannot serialize fading {type(dist).__name__}")


def dump_config(cfg: RunConfig) -> str:
    """Canonical JSON form; re-parsing it yields an identical RunConfig."""
    if isinstance(cfg.mu, RateAwardVector):
        mu_node: object = list(cfg.mu.mu)
    else:
        mu_node = {"resolution": cfg.mu.resolution, "mu_min": cfg.mu.mu_min}
    doc = {
        "channel": {
            "sigma2": cfg.channel.sigma2,
            "users": [
                {"fading": _fading_to_dict(u.fading), "pbar": u.pbar}
                for u in cfg.channel.users
            ],
        },
        "mu": mu_node,
        "solver": {
            "power_rel_tol": cfg.power_rel_tol,
            "max_outer_iters": cfg.max_outer_iters,
            "bracket_growth": cfg.bracket_growth,
        },
        "quadrature": {
            "outer_abs_tol": cfg.outer_abs_tol,
            "tail_epsilon": cfg.tail_epsilon,
        },
        "mc": {"n_samples": cfg.mc_samples, "seed": cfg.mc_seed},
        "mode": cfg.mode,
        "units": cfg.units,
        "threads": cfg.threads,
        "output": cfg.output,
    }
    return json.dumps(doc, indent=2)


def _solver_settings(cfg: RunConfig, mode: CdfMode) -> SolverSettings:
    return SolverSettings(
        power_rel_tol=cfg.power_rel_tol,
        max_outer_iters=cfg.max_outer_iters,
        bracket_growth=cfg.bracket_growth,
        mode=mode,
        quad_abs_tol=cfg.outer_abs_tol,
        tail_epsilon=cfg.tail_epsilon,
    )


def _modes(cfg: RunConfig):
    if cfg.mode == "both":
        return [CdfMode.CORRECTED, CdfMode.NAIVE_ZERO]
    return [CdfMode.CORRECTED if cfg.mode == "corrected" else CdfMode.NAIVE_ZERO]


def _rate_scale(cfg: RunConfig) -> float:
    return 1.0 / LN2 if cfg.units == "bits" else 1.0


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(cfg: RunConfig, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if cfg.output is None:
        sys.stdout.write(text)
    else:
        with open(cfg.output, "w", newline="") as fh:
            fh.write(text)


def _require_explicit_mu(cfg: RunConfig) -> RateAwardVector:
    if not isinstance(cfg.mu, RateAwardVector):
        raise ConfigError("mu: this command needs an explicit weight vector, not a grid")
    return cfg.mu


def cmd_solve(cfg: RunConfig) -> int:
    mu = _require_explicit_mu(cfg)
    m = cfg.channel.n_users
    header = ["mode", "user", "mu", "lambda", "pbar", "achieved_power",
              "residual_rel", "solver_iters"]
    rows = []
    for mode in _modes(cfg):
        solution = solve_lambda(mu, cfg.channel, _solver_settings(cfg, mode))
        for i in range(m):
            rows.append([
                mode.value, i + 1, mu[i], solution.lam[i], cfg.channel.users[i].pbar,
                solution.achieved[i], solution.certified_residuals[i], solution.sweeps,
            ])
        print(f"{mode.value}: converged in {solution.sweeps} sweeps "
              f"({solution.power_evals} power evaluations)", file=sys.stderr)
    _write_csv(cfg, header, rows)
    return EXIT_OK


def cmd_boundary(cfg: RunConfig) -> int:
    if not isinstance(cfg.mu, GridSpec):
        raise ConfigError("mu: the boundary command needs a grid spec "
                          "{'resolution': ..., 'mu_min': ...}")
    m = cfg.channel.n_users
    try:
        grid = simplex_grid(m, cfg.mu.resolution, cfg.mu.mu_min)
    except ValueError as exc:
        raise ConfigError(f"mu: {exc}") from exc
    scale = _rate_scale(cfg)
    header = (["mode"]
              + [f"mu_{i + 1}" for i in range(m)]
              + [f"lambda_{i + 1}" for i in range(m)]
              + [f"R_{i + 1}" for i in range(m)]
              + [f"Pach_{i + 1}" for i in range(m)]
              + ["quad_err", "solver_iters", "status"])
    rows = []
    n_ok = 0
    for mode in _modes(cfg):
        points = sweep(cfg.channel, grid, _solver_settings(cfg, mode),
                       rate_tol=cfg.outer_abs_tol, tail_eps=cfg.tail_epsilon)
        for point in points:
            row: list = [mode.value]
            row.extend(point.mu[i] for i in range(m))
            if point.ok:
                n_ok += 1
                row.extend(point.lam[i] for i in range(m))
                row.extend(point.rates[i] * scale for i in range(m))
                row.extend(point.achieved_powers[i] for i in range(m))
                row.append(max(point.diagnostics.rate_quad_errors) * scale)
                row.append(point.diagnostics.solver_sweeps)
                row.append("ok")
            else:
                row.extend([math.nan] * (3 * m + 1))
                row.append(0)
                row.append(point.status.replace(",", ";"))
            rows.append(row)
    _write_csv(cfg, header, rows)
    return EXIT_OK if n_ok > 0 else EXIT_NO_CONVERGENCE


def cmd_verify_mc(cfg: RunConfig) -> int:
    mu = _require_explicit_mu(cfg)
    m = cfg.channel.n_users
    scale = _rate_scale(cfg)
    header = ["mode", "user", "quantity", "analytic", "mc_mean", "mc_se", "z_score"]
    rows = []
    worst = 0.0
    for mode in _modes(cfg):
        solution = solve_lambda(mu, cfg.channel, _solver_settings(cfg, mode))
        rates = rate_point(mu, solution.lam, cfg.channel, mode,
                           cfg.outer_abs_tol, cfg.tail_epsilon)
        mc = estimate(cfg.channel, mu, solution.lam, cfg.mc_samples, cfg.mc_seed,
                      threads=cfg.threads)
        for i in range(m):
            for quantity, analytic, sampled, se in (
                ("rate", rates[i] * scale, mc.rates[i] * scale, mc.rate_se[i] * scale),
                ("power", cfg.channel.users[i].pbar, mc.powers[i], mc.power_se[i]),
            ):
                if se > 0.0:
                    z = (sampled - analytic) / se
                else:
                    z = 0.0 if sampled == analytic else math.inf
                worst = max(worst, abs(z))
                rows.append([mode.value, i + 1, quantity, analytic, sampled, se, z])
    _write_csv(cfg, header, rows)
    return EXIT_OK if worst <= 4.0 else EXIT_VERIFY_FAILED


def cmd_compare(cfg: RunConfig) -> int:
    mu = _require_explicit_mu(cfg)
    scale = _rate_scale(cfg)
    report = compare_modes(cfg.channel, mu,
                           _solver_settings(cfg, CdfMode.CORRECTED),
                           rate_tol=cfg.outer_abs_tol, tail_eps=cfg.tail_epsilon)
    header = ["user", "rate_corrected", "rate_naive_same_lambda",
              "same_lambda_gap_abs", "same_lambda_gap_rel",
              "rate_naive_end_to_end", "end_to_end_gap_abs", "end_to_end_gap_rel"]
    rows = []
    for i in range(cfg.channel.n_users):
        rows.append([
            i + 1,
            report.rates_corrected[i] * scale,
            report.rates_naive_same_lambda[i] * scale,
            report.same_lambda_gap_abs[i] * scale,
            report.same_lambda_gap_rel[i],
            report.rates_naive_end_to_end[i] * scale,
            report.end_to_end_gap_abs[i] * scale,
            report.end_to_end_gap_rel[i],
        ])
    _write_csv(cfg, header, rows)
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "boundary": cmd_boundary,
    "verify-mc": cmd_verify_mc,
    "compare": cmd_compare,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="macfade",
        description="Capacity region boundary of Gaussian multiple-access "
                    "fading channels, with Monte Carlo cross-verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("solve", "solve power prices for an explicit weight vector"),
        ("boundary", "sweep a simplex grid into boundary points"),
        ("verify-mc", "cross-check analytics against Monte Carlo"),
        ("compare", "corrected-vs-naive gap report"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="path to the JSON run config")
        cmd.add_argument("--output", help="write the CSV here instead of stdout")
        cmd.add_argument("--mode", choices=["corrected", "naive", "both"],
                         help="override the config mode")
        cmd.add_argument("--units", choices=["nats", "bits"],
                         help="override the config rate units")
        cmd.add_argument("--threads", type=int, help="override the config thread count")
        cmd.add_argument("--dump-config", action="store_true",
                         help="print the effective config as JSON and exit")
    return parser


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    updates = {}
    if args.output is not None:
        updates["output"] = args.output
    if args.mode is not None:
        updates["mode"] = args.mode
    if args.units is not None:
        updates["units"] = args.units
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("threads: must be at least 1")
        updates["threads"] = args.threads
    if not updates:
        return cfg
    from dataclasses import replace

    return replace(cfg, **updates)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_CONFIG
        return EXIT_OK if code == 0 else EXIT_CONFIG
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.dump_config:
            print(dump_config(cfg))
            return EXIT_OK
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        if exc.residuals is not None:
            print(f"last residuals: {exc.residuals}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except QuadratureError as exc:
        print(f"quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE


def entry() -> None:
    raise SystemExit(main())
