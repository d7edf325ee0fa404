"""``conestab`` command line.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage,
config and input errors (message on stderr).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .cones import (
    CONE_KINDS,
    Cone,
    ExtendedRealCone,
    FunctionCone,
    RealCone,
    VectorCone,
    VectorElement,
    cancellation_witness,
    check_cone_axioms,
    check_order_laws,
    make_cone,
)
from .config import ConfigError, parse_config
from .expr import EvaluationError, ExpressionError, parse_expression
from .lab import ReportError, SweepConfig, run_sweep, write_report
from .stability import (
    ApproxQuadraticMap,
    HypothesisError,
    StabilityError,
    admissible_pairs,
    banach_case_verify,
    stabilize,
)
from .topology import neighborhood_law_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

FUNCTION_KEYS = ("p", "q", "r")
VECTOR_DIMS = (1, 2, 3, 4)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="conestab", description="Cone law suites and quadratic stabilization.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    laws = sub.add_parser("laws", help="run the cone axiom, order and neighborhood suites")
    laws.add_argument("--cone", choices=CONE_KINDS)
    laws.add_argument("--dim", type=int, help="vector dimension (default: 1 to 4)")
    laws.add_argument("--seed", type=int)
    laws.add_argument("--config")

    st = sub.add_parser("stabilize", help="stabilize a single approximately quadratic map")
    _map_args(st)

    bn = sub.add_parser("banach", help="verify the vector-space corollary bounds")
    _map_args(bn)
    bn.add_argument("--r", type=float, help="band multiplier, must exceed 1 (default 1.5)")

    sw = sub.add_parser("sweep", help="run a perturbation sweep and write a report")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out")
    sw.add_argument("--format", choices=("csv", "jsonl"))
    sw.add_argument("--seed", type=int, help="override the seed list with one seed")
    sw.add_argument("--tol", type=float)
    sw.add_argument("--max-iter", type=int)
    return p


def _map_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--expr")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--dim", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--config")


def _settings(args, section: str) -> dict:
    """Config-file values overlaid with explicit flags."""
    out: dict = {}
    if getattr(args, "config", None):
        cfg = parse_config(Path(args.config))
        out.update(cfg.section(section))
    flags = {
        "cone": "cone",
        "expr": "expr",
        "epsilon": "epsilon",
        "dim": "dimension",
        "tol": "tol",
        "max_iter": "max_iter",
        "seed": "seed",
        "r": "r",
        "out": "output",
        "format": "format",
    }
    for attr, key in flags.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    return out


def _positive(settings: dict, key: str) -> None:
    value = settings.get(key)
    if value is not None and not value > 0:
        raise UsageError(f"--{key.replace('_', '-')} must be positive")


# laws


def _law_cones(kind: str, dim: int | None) -> list[Cone]:
    if kind == "vector":
        return [VectorCone(d) for d in ((dim,) if dim else VECTOR_DIMS)]
    if kind == "function":
        return [FunctionCone(FUNCTION_KEYS)]
    return [make_cone(kind)]


def cmd_laws(args) -> int:
    s = _settings(args, "laws")
    kind = s.get("cone")
    if kind is None:
        raise UsageError("laws: --cone is required")
    if s.get("dimension") is not None and s["dimension"] < 1:
        raise UsageError("--dim must be >= 1")
    seed = s.get("seed") or 0
    ok = True
    for cone in _law_cones(kind, s.get("dimension")):
        reports = [
            check_cone_axioms(cone, seed=seed),
            check_order_laws(cone, seed=seed),
        ]
        if isinstance(cone, (ExtendedRealCone, VectorCone)) and not isinstance(cone, RealCone):
            reports.append(neighborhood_law_suite(cone, _neighborhood_samples(cone)))
        for rep in reports:
            print(f"[{cone.name}] {rep}")
            ok = ok and rep.passed
        witness = cancellation_witness(cone)
        if witness is not None:
            a, b, c = witness
            print(f"[{cone.name}] cancellation fails: {a!r} + {c!r} == {b!r} + {c!r}")
    print("laws: PASS" if ok else "laws: FAIL")
    return EXIT_OK if ok else EXIT_FAIL


def _neighborhood_samples(cone: Cone) -> list:
    grid = list(cone.grid())
    return grid[:6]


# stabilize / banach


def _build_map(s: dict, codomain: Cone) -> tuple[ApproxQuadraticMap, VectorCone]:
    if not s.get("expr"):
        raise UsageError("--expr is required")
    if s.get("epsilon") is None:
        raise UsageError("--epsilon is required")
    _positive(s, "epsilon")
    _positive(s, "tol")
    _positive(s, "max_iter")
    if s.get("dimension") is not None and s["dimension"] < 1:
        raise UsageError("--dim must be >= 1")
    expr = parse_expression(s["expr"], s.get("dimension"))
    domain = VectorCone(expr.dimension)
    return ApproxQuadraticMap(expr, domain, codomain, name=s["expr"]), domain


def _grid(dimension: int, radius: float) -> list:
    """Half-integer grid on ``[-radius, radius]``; sparser in higher dimension."""
    step = 0.5 if dimension == 1 else 1.0 if dimension == 2 else 2.0
    n = int(radius / step)
    axis = [k * step for k in range(-n, n + 1)]
    pts = [()]
    for _ in range(dimension):
        pts = [p + (t,) for p in pts for t in axis]
    return [VectorElement(p) for p in pts]


def cmd_stabilize(args) -> int:
    s = _settings(args, "stabilize")
    f, domain = _build_map(s, ExtendedRealCone())
    points = _grid(domain.dimension, s.get("radius") or 5.0)
    pairs = admissible_pairs(domain, points)
    try:
        res = stabilize(
            f,
            points,
            s["epsilon"],
            s.get("tol") or 1e-9,
            s.get("max_iter") or 40,
            validation_pairs=pairs,
        )
    except HypothesisError as exc:
        rep = exc.report
        x, y = rep.worst_pair
        print(f"rejected: f is not approximately quadratic at epsilon={s['epsilon']!r}")
        print(f"worst residual {rep.max_residual!r} at x={_show(x)} y={_show(y)}")
        return EXIT_FAIL
    print(res.certificate)
    verdict = "pass" if res.sandwich_ok else "FAIL"
    band = res.certificate.gamma * res.certificate.epsilon
    print(f"sandwich: {verdict} max_gap={res.max_gap!r} <= gamma*eps={band!r} over {len(points)} points")
    return EXIT_OK if res.sandwich_ok else EXIT_FAIL


def cmd_banach(args) -> int:
    s = _settings(args, "banach")
    r = s.get("r") if s.get("r") is not None else 1.5
    if not r > 1:
        raise UsageError("--r must exceed 1")
    f, domain = _build_map(s, RealCone())
    points = _grid(domain.dimension, s.get("radius") or 4.0)
    try:
        rep = banach_case_verify(
            f,
            s["epsilon"],
            r,
            points,
            s.get("tol") or 1e-9,
            max_iter=s.get("max_iter") or 40,
        )
    except HypothesisError as exc:
        x, y = exc.report.worst_pair
        print(f"rejected: worst residual {exc.report.max_residual!r} at x={_show(x)} y={_show(y)}")
        return EXIT_FAIL
    print(rep.stabilization.certificate)
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _show(x) -> str:
    coords = getattr(x, "coords", (x,))
    return "(" + ", ".join(repr(c) for c in coords) + ")"


# sweep


def cmd_sweep(args) -> int:
    cfg = parse_config(Path(args.config))
    s = dict(cfg.section("sweep"))
    if args.seed is not None:
        s["seeds"] = [args.seed]
    for attr, key in (("tol", "tol"), ("max_iter", "max_iter"), ("out", "output"), ("format", "format")):
        if getattr(args, attr) is not None:
            s[key] = getattr(args, attr)
    _positive(s, "tol")
    _positive(s, "max_iter")
    if not s.get("output"):
        raise UsageError("sweep: no output path (use --out or 'output' in [sweep])")
    config = SweepConfig(
        epsilons=tuple(s["epsilon"]),
        dims=tuple(s["dims"]),
        seeds=tuple(s["seeds"]),
        noises=tuple(s["noise"]),
        tol=s["tol"],
        max_iter=s["max_iter"],
        n_points=s["points"],
        n_pairs=s["pairs"],
        radius=s["radius"],
    )
    records = run_sweep(config)
    write_report(records, s["output"], s["format"])
    failed = [r for r in records if not r.passed]
    print(f"sweep: {len(records)} cells, {len(failed)} failed; report written to {s['output']}")
    for r in failed:
        print(f"  FAIL eps={r.epsilon!r} d={r.dimension} seed={r.seed} noise={r.noise}")
    return EXIT_OK if not failed else EXIT_FAIL


COMMANDS = {
    "laws": cmd_laws,
    "stabilize": cmd_stabilize,
    "banach": cmd_banach,
    "sweep": cmd_sweep,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, ExpressionError, ReportError) as exc:
        print(f"conestab: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EvaluationError, StabilityError, ValueError) as exc:
        print(f"conestab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
