"""Command-line front end.

Six subcommands map onto the library surface: ``nsw`` (best single direction),
``threshold`` (specialization thresholds with the hull-test trace), ``eq``
(closed-form equilibrium CDF tables and samples as CSV), ``verify`` (full
numerical equilibrium check), ``profit`` (equilibrium profit and the
positive-profit flag), and ``nmf`` (ratings CSV to embeddings CSV).

Reports are flat JSON objects with snake_case keys and embed the resolved run
configuration.  Floats are serialized at 17 significant digits, infinities as
the strings "inf"/"-inf", so identical argv plus seed reproduce every output
byte for byte.  Exit codes: 0 success, 2 usage error, 3 input-data error,
4 non-convergence (the report is still written).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass

import numpy as np

from .closedform import (
    FinitePCurve,
    InfiniteTwoGenre,
    OnePopulation,
    QuarterCircle,
    angle_cdf,
    eq_cdf_quality,
    eq_sample,
    finite_p_x_cdf,
    make_infinite_two_genre,
    make_one_population,
)
from .geometry import CostSpec, UserSet, two_user_plane
from .ingest import (
    InputDataError,
    NmfConfig,
    load_embeddings_csv,
    load_ratings_csv,
    nmf_factorize,
    save_embeddings_csv,
)
from .optimize import nsw_direction
from .threshold import HullTestConfig, threshold_report
from .verify import best_response_gap, equilibrium_profit, positive_profit_condition

__all__ = ["RunConfig", "run", "main"]

_EXIT_OK = 0
_EXIT_USAGE = 2
_EXIT_INPUT = 3
_EXIT_NOCONV = 4


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation parameters, embedded in every JSON report."""

    subcommand: str
    users_source: str | None = None
    variant: str | None = None
    q: float | None = None
    beta: float | None = None
    alpha: tuple | None = None
    producers: int | None = None
    samples: int | None = None
    n_users: int | None = None
    theta: float | None = None
    seed: int = 0
    cdf_grid: int | None = None
    grid_angles: int | None = None
    grid_radii: int | None = None
    factors: int | None = None
    epochs: int | None = None
    format: str = "json"
    out: str | None = None


def _render(value, indent):
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = ",\n".join(
            f'{pad}  {json.dumps(str(k))}: {_render(v, indent + 1)}' for k, v in value.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if len(value) == 0:
            return "[]"
        items = ",\n".join(f"{pad}  {_render(v, indent + 1)}" for v in value)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(value, np.ndarray):
        return _render(value.tolist(), indent)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isinf(v):
            return '"inf"' if v > 0 else '"-inf"'
        if math.isnan(v):
            return '"nan"'
        return format(v, ".17g")
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def render_json(report: dict) -> str:
    return _render(report, 0) + "\n"


def _write_text(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _parse_users(source: str | None) -> UserSet | None:
    if source is None:
        return None
    if source == "basis2":
        return UserSet(np.eye(2))
    if source.startswith("angle:"):
        theta = float(source[len("angle:"):])
        return UserSet(np.array([[1.0, 0.0], [math.cos(theta), math.sin(theta)]]))
    if source.startswith("orthonormal:"):
        n = int(source[len("orthonormal:"):])
        return UserSet(np.eye(n))
    return load_embeddings_csv(source)


def _parse_alpha(raw: str | None) -> np.ndarray | None:
    if raw is None:
        return None
    return np.array([float(tok) for tok in raw.split(",")])


def _resolve_seed(ns) -> int:
    if ns.seed is not None:
        return ns.seed
    env = os.environ.get("SUPPLY_EQ_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"SUPPLY_EQ_SEED must be an integer, got {env!r}") from None
    return 0


def _spec(ns) -> CostSpec:
    beta = ns.beta if ns.beta is not None else 2.0
    return CostSpec(q=ns.q, beta=beta, alpha=_parse_alpha(ns.alpha))


def _plane_from(users: UserSet | None, theta: float | None):
    if users is not None:
        if users.n_users != 2:
            raise ValueError("this variant takes exactly two users")
        return two_user_plane(users.embeddings[0], users.embeddings[1])
    if theta is not None:
        return two_user_plane(
            np.array([1.0, 0.0]), np.array([math.cos(theta), math.sin(theta)])
        )
    return None


def _build_dist(ns, users, spec):
    """Distribution for the chosen variant plus an optimizer-converged flag."""
    producers = ns.producers
    if ns.variant == "onepop":
        n_users = ns.n_users if ns.n_users is not None else (
            users.n_users if users is not None else 1
        )
        if users is None:
            return OnePopulation(
                direction=np.array([1.0, 0.0]),
                n_users=n_users,
                beta=spec.beta,
                producers=producers,
            ), True
        if users.n_users == 1:
            return make_one_population(users.embeddings[0], n_users, spec, producers), True
        res = nsw_direction(users, spec)
        dist = OnePopulation(
            direction=res.point, n_users=n_users, beta=spec.beta, producers=producers
        )
        return dist, res.converged
    if spec.q != 2.0 or spec.alpha is not None:
        raise ValueError("planar variants are defined for q = 2 with unit weights")
    plane = _plane_from(users, ns.theta)
    if ns.variant == "p2":
        if producers not in (None, 2):
            raise ValueError("the p2 variant fixes producers = 2")
        if plane is None:
            plane = _plane_from(UserSet(np.eye(2)), None)
        return QuarterCircle(beta=spec.beta, plane=plane), True
    if ns.variant == "finitep":
        if ns.beta is not None and ns.beta != 2.0:
            raise ValueError("the finitep variant fixes beta = 2")
        if plane is None:
            plane = _plane_from(UserSet(np.eye(2)), None)
        return FinitePCurve(producers=producers, plane=plane), True
    if ns.variant == "infinite":
        if plane is None:
            raise ValueError("the infinite variant needs --users or --theta")
        return make_infinite_two_genre(plane, spec.beta), True
    raise ValueError(f"unknown variant {ns.variant!r}")


def _cmd_nsw(ns) -> int:
    users = _parse_users(ns.users)
    spec = _spec(ns)
    res = nsw_direction(users, spec)
    rc = RunConfig(
        subcommand="nsw",
        users_source=ns.users,
        q=spec.q,
        beta=spec.beta,
        alpha=None if spec.alpha is None else tuple(spec.alpha),
        seed=_resolve_seed(ns),
        out=ns.out,
    )
    report = {
        "direction": res.point,
        "nsw_value": res.value,
        "kkt_residual": res.kkt_residual,
        "iters": res.iters,
        "converged": res.converged,
        "run_config": asdict(rc),
    }
    _write_text(render_json(report), ns.out)
    return _EXIT_OK if res.converged else _EXIT_NOCONV


def _cmd_threshold(ns) -> int:
    users = _parse_users(ns.users)
    spec = _spec(ns)
    seed = _resolve_seed(ns)
    cfg = HullTestConfig(
        trials=ns.trials, hull_points=ns.hull_points, tau=ns.tau, gap=ns.gap, seed=seed
    )
    rep = threshold_report(users, spec, cfg)
    rc = RunConfig(
        subcommand="threshold",
        users_source=ns.users,
        q=spec.q,
        beta=spec.beta,
        alpha=None if spec.alpha is None else tuple(spec.alpha),
        seed=seed,
        out=ns.out,
    )
    report = {
        "beta_star_closed": rep.beta_star_closed,
        "beta_upper": rep.beta_upper,
        "beta_estimate": rep.beta_estimate,
        "condition_trace": [
            {"beta": p.beta, "holds": p.holds, "lhs_log": p.lhs_log, "rhs_log": p.rhs_log}
            for p in rep.condition_trace
        ],
        "run_config": asdict(rc),
    }
    _write_text(render_json(report), ns.out)
    unresolved = any(p.holds is None for p in rep.condition_trace)
    return _EXIT_NOCONV if unresolved else _EXIT_OK


_CDF_AXES = {
    "onepop": "quality",
    "p2": "angle",
    "finitep": "x",
    "infinite": "quality",
}


def _cdf_point(dist, x: float) -> float:
    if isinstance(dist, QuarterCircle):
        return angle_cdf(dist, x)
    if isinstance(dist, FinitePCurve):
        return finite_p_x_cdf(dist, x)
    if isinstance(dist, InfiniteTwoGenre):
        return eq_cdf_quality(dist, x, genre_index=0)
    return eq_cdf_quality(dist, x)


def _cdf_grid_max(dist) -> float:
    if isinstance(dist, QuarterCircle):
        return math.pi / 2
    if isinstance(dist, FinitePCurve):
        return 1.0
    return dist.support_max


def _cmd_eq(ns) -> int:
    if ns.cdf_grid <= 0 and ns.n <= 0:
        raise ValueError("nothing to emit: pass --cdf-grid and/or --n")
    users = _parse_users(ns.users)
    spec = _spec(ns)
    seed = _resolve_seed(ns)
    dist, converged = _build_dist(ns, users, spec)
    if ns.cdf_grid > 0:
        axis = _CDF_AXES[ns.variant]
        xs = np.linspace(0.0, _cdf_grid_max(dist), ns.cdf_grid)
        lines = [f"{axis},cdf"]
        lines += [f"{_fmt(x)},{_fmt(_cdf_point(dist, float(x)))}" for x in xs]
        _write_text("\n".join(lines) + "\n", ns.out)
    if ns.n > 0:
        pts = eq_sample(dist, ns.n, seed)
        lines = [",".join(f"f{k}" for k in range(pts.shape[1]))]
        lines += [",".join(_fmt(v) for v in row) for row in pts]
        _write_text("\n".join(lines) + "\n", ns.samples_out)
    return _EXIT_OK if converged else _EXIT_NOCONV


def _parse_grid(raw: str) -> tuple[int, int]:
    parts = raw.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"grid must look like 200x200, got {raw!r}")
    return int(parts[0]), int(parts[1])


def _report_from_verify(rep, rc) -> dict:
    return {
        "eq_profit": rep.eq_profit,
        "eq_profit_mc": rep.eq_profit_mc,
        "eq_profit_mc_stderr": rep.eq_profit_mc_stderr,
        "best_response_gap": rep.best_response_gap,
        "gap_argmax": rep.gap_argmax,
        "genre_count_estimate": rep.genre_count_estimate,
        "foc_residual_max": rep.foc_residual_max,
        "positive_profit": rep.positive_profit,
        "q_alignment": rep.q_alignment,
        "q_threshold": rep.q_threshold,
        "run_config": asdict(rc),
    }


def _cmd_verify(ns) -> int:
    users = _parse_users(ns.users)
    spec = _spec(ns)
    seed = _resolve_seed(ns)
    grid = _parse_grid(ns.grid)
    dist, converged = _build_dist(ns, users, spec)
    rep = best_response_gap(
        dist, users, spec, ns.producers, n_samples=ns.samples, grid=grid, seed=seed
    )
    rc = RunConfig(
        subcommand="verify",
        users_source=ns.users,
        variant=ns.variant,
        q=spec.q,
        beta=spec.beta,
        alpha=None if spec.alpha is None else tuple(spec.alpha),
        producers=ns.producers,
        samples=ns.samples,
        seed=seed,
        grid_angles=grid[0],
        grid_radii=grid[1],
        out=ns.out,
    )
    _write_text(render_json(_report_from_verify(rep, rc)), ns.out)
    if not converged or rep.positive_profit is None:
        return _EXIT_NOCONV
    return _EXIT_OK


def _cmd_profit(ns) -> int:
    users = _parse_users(ns.users)
    spec = _spec(ns)
    dist, converged = _build_dist(ns, users, spec)
    eq = equilibrium_profit(dist, users, spec, ns.producers)
    flag, qval, qthr = positive_profit_condition(users, spec, ns.producers)
    rc = RunConfig(
        subcommand="profit",
        users_source=ns.users,
        variant=ns.variant,
        q=spec.q,
        beta=spec.beta,
        alpha=None if spec.alpha is None else tuple(spec.alpha),
        producers=ns.producers,
        seed=_resolve_seed(ns),
        out=ns.out,
    )
    report = {
        "eq_profit": eq,
        "positive_profit": flag,
        "q_alignment": qval,
        "q_threshold": qthr,
        "run_config": asdict(rc),
    }
    _write_text(render_json(report), ns.out)
    if not converged or flag is None:
        return _EXIT_NOCONV
    return _EXIT_OK


def _cmd_nmf(ns) -> int:
    table = load_ratings_csv(ns.ratings)
    seed = _resolve_seed(ns)
    cfg = NmfConfig(
        factors=ns.factors,
        epochs=ns.epochs,
        seed=seed,
        init_scale=ns.init_scale,
        min_entry=ns.min_entry,
    )
    res = nmf_factorize(table, cfg)
    save_embeddings_csv(res.users, ns.out, user_ids=res.user_ids)
    rc = RunConfig(
        subcommand="nmf",
        users_source=ns.ratings,
        samples=None,
        seed=seed,
        factors=ns.factors,
        epochs=ns.epochs,
        format="csv",
        out=ns.out,
    )
    report = {
        "n_users": res.users.n_users,
        "n_items": len(res.item_ids),
        "dropped_users": list(res.dropped_users),
        "final_objective": float(res.objective_trace[-1]),
        "run_config": asdict(rc),
    }
    sys.stdout.write(render_json(report))
    return _EXIT_OK


def _add_common(p, users_required: bool) -> None:
    p.add_argument(
        "--users",
        required=users_required,
        help="basis2 | angle:<theta> | orthonormal:<N> | path to embeddings CSV",
    )
    p.add_argument("--q", type=float, default=2.0)
    p.add_argument("--alpha", help="comma-separated positive weights")
    p.add_argument("--seed", type=int, default=None, help="falls back to $SUPPLY_EQ_SEED, then 0")
    p.add_argument("--out", help="output path (default stdout)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supply-eq",
        description="Supply-side equilibria of producer competition under "
        "personalized recommendations.",
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("nsw", help="best single-genre direction and its welfare value")
    _add_common(p, users_required=True)
    p.add_argument("--beta", type=float, default=2.0)
    p.set_defaults(fn=_cmd_nsw)

    p = sub.add_parser("threshold", help="specialization threshold report")
    _add_common(p, users_required=True)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--hull-points", type=int, default=75)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--gap", type=float, default=0.05)
    p.set_defaults(fn=_cmd_threshold)

    p = sub.add_parser("eq", help="equilibrium CDF table and samples as CSV")
    _add_common(p, users_required=False)
    p.add_argument("--variant", required=True, choices=["onepop", "p2", "finitep", "infinite"])
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--producers", type=int, default=2)
    p.add_argument("--n-users", type=int, default=None, help="population size for onepop")
    p.add_argument("--theta", type=float, default=None, help="user angle for infinite")
    p.add_argument("--n", type=int, default=0, help="sample count")
    p.add_argument("--cdf-grid", type=int, default=0, help="CDF table size")
    p.add_argument("--samples-out", help="samples path (default stdout)")
    p.set_defaults(fn=_cmd_eq)

    p = sub.add_parser("verify", help="numerical equilibrium verification report")
    _add_common(p, users_required=True)
    p.add_argument("--variant", required=True, choices=["onepop", "p2", "finitep"])
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--producers", type=int, default=2)
    p.add_argument("--n-users", type=int, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--grid", default="200x200")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("profit", help="equilibrium profit and positive-profit condition")
    _add_common(p, users_required=True)
    p.add_argument("--variant", required=True, choices=["onepop", "p2", "finitep"])
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--producers", type=int, default=2)
    p.add_argument("--n-users", type=int, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.set_defaults(fn=_cmd_profit)

    p = sub.add_parser("nmf", help="factorize a ratings CSV into embeddings")
    p.add_argument("--ratings", required=True, help="ratings CSV path")
    p.add_argument("--factors", type=int, required=True)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--init-scale", type=float, default=0.1)
    p.add_argument("--min-entry", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="embeddings CSV path")
    p.set_defaults(fn=_cmd_nmf)

    return parser


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return _EXIT_OK if exc.code in (0, None) else _EXIT_USAGE
    try:
        return ns.fn(ns)
    except InputDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_USAGE


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
