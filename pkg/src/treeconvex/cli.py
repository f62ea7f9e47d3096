"""Command-line front end: solve, check, obstacle, converge.

Exit codes: 0 success, 2 configuration or input error, 3 non-convergence
(artifacts are still written).  Identical configuration and inputs produce
byte-identical outputs; floats are serialized as the shortest decimal that
round-trips a 64-bit value.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .boundary import parse_datum, sample_leaves, convergence_study
from .convexity import is_binary_convex, is_convex_operator, is_convex_segment
from .functions import TreeFunction
from .solver import (
    LAPLACIAN_VARIANTS,
    SolveConfig,
    solve_dirichlet,
    solve_laplacian,
    solve_obstacle,
)
from .tree import TruncatedTree, Vertex, psi

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3

VARIANT_NAMES = {
    "convex": "convex",
    "binary": "binary",
    "kconvex": "kconvex",
    "laplacian-full": "laplacian_full",
    "laplacian-arb": "laplacian_arborescence",
}


def _fmt(x: float) -> str:
    return repr(float(x))


def write_solution_csv(path: str, tree: TruncatedTree, values: np.ndarray,
                       coincidence: np.ndarray | None = None) -> None:
    header = "vertex,level,index,psi,value"
    if coincidence is not None:
        header += ",coincidence"
    lines = [header]
    for flat, v in enumerate(tree.vertices()):
        row = f"{v},{v.level},{v.index},{_fmt(float(psi(v)))},{_fmt(values[flat])}"
        if coincidence is not None:
            row += f",{'true' if coincidence[flat] else 'false'}"
        lines.append(row)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_dot(path: str, tree: TruncatedTree, values: np.ndarray) -> None:
    lines = ["digraph tree {"]
    for flat, v in enumerate(tree.vertices()):
        lines.append(f'  "{v}" [label="{v}\\n{_fmt(values[flat])}"];')
    for v in tree.vertices():
        if not v.is_root:
            lines.append(f'  "{v.parent}" -> "{v}";')
    lines.append("}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(payload, indent=2) + "\n")


def read_function_csv(path: str, tree: TruncatedTree) -> TreeFunction:
    """Read a function CSV (needs 'vertex' and 'value' columns) covering the
    whole truncated tree exactly once."""
    values = np.full(tree.vertex_count, np.nan)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"vertex", "value"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns 'vertex' and 'value'")
        for n, row in enumerate(reader, start=2):
            try:
                vertex = Vertex.parse(tree.m, row["vertex"])
                flat = tree.flat_index(vertex)
            except ValueError as exc:
                raise ValueError(f"{path}: row {n}: {exc}") from exc
            if not np.isnan(values[flat]):
                raise ValueError(f"{path}: row {n}: duplicate vertex {row['vertex']!r}")
            try:
                values[flat] = float(row["value"])
            except ValueError as exc:
                raise ValueError(f"{path}: row {n}: bad value {row['value']!r}") from exc
    missing = int(np.isnan(values).sum())
    if missing:
        raise ValueError(f"{path}: {missing} of {tree.vertex_count} vertices missing "
                         f"for m={tree.m}, depth={tree.depth}")
    return TreeFunction.from_values(tree, values)


def _parse_sampling(spec: str) -> tuple[str, int]:
    if spec == "point":
        return "point", 16
    if spec == "inf":
        return "inf_subsample", 16
    if spec.startswith("inf:"):
        try:
            n = int(spec.split(":", 1)[1])
        except ValueError as exc:
            raise ValueError(f"malformed sampling spec {spec!r}") from exc
        return "inf_subsample", n
    raise ValueError(f"sampling must be 'point' or 'inf:N', got {spec!r}")


def _build_config(args: argparse.Namespace) -> SolveConfig:
    variant = VARIANT_NAMES[args.variant]
    k = args.k if variant == "kconvex" else None
    if variant != "kconvex" and args.k is not None:
        raise ValueError("--k only applies to --variant kconvex")
    sweep = "jacobi" if args.sweep == "jacobi" else "gauss_seidel_level_order"
    return SolveConfig(variant=variant, k=k, tol=args.tol, max_iter=args.max_iter,
                       sweep=sweep, workers=args.workers)


def _config_echo(args: argparse.Namespace, command: str) -> dict:
    echo = {
        "command": command,
        "m": args.m,
        "depth": getattr(args, "depth", None),
        "variant": args.variant,
        "k": args.k,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "sweep": args.sweep,
        "workers": args.workers,
    }
    if getattr(args, "datum", None) is not None:
        echo["datum"] = args.datum
        echo["sampling"] = args.sampling
    if args.variant == "kconvex" and args.k is not None and args.k > args.m - 2:
        echo["k_range_note"] = (
            f"k={args.k} exceeds m-2={args.m - 2}: the k-subset equation is "
            "applied beyond the range where k-convexity is usually posed")
    return echo


def _report_dict(report) -> dict:
    return {
        "iterations": report.iterations,
        "final_residual": report.final_residual,
        "converged": report.converged,
        "monotone": report.monotone,
    }


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    tree = TruncatedTree(args.m, args.depth)
    datum = parse_datum(args.datum)
    mode, subsamples = _parse_sampling(args.sampling)
    leaves = sample_leaves(datum, tree, mode, subsamples)
    if cfg.variant in LAPLACIAN_VARIANTS:
        report = solve_laplacian(tree, leaves, cfg)
    else:
        report = solve_dirichlet(tree, leaves, cfg)

    values = report.solution.values
    if args.out_csv:
        write_solution_csv(args.out_csv, tree, values)
    if args.out_dot:
        write_dot(args.out_dot, tree, values)
    if args.out_json:
        payload = _config_echo(args, "solve")
        payload.update(_report_dict(report))
        write_json(args.out_json, payload)
    if not report.converged:
        print(f"did not converge within {cfg.max_iter} iterations "
              f"(residual {report.final_residual})", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _check_payload(check) -> dict:
    out: dict = {}
    if check.skipped is not None:
        out["skipped"] = check.skipped
        out["ok"] = None
    else:
        out["ok"] = check.ok
        out["checked"] = check.checked
        out["violations"] = [str(v) for v in check.violations]
    return out


def cmd_check(args: argparse.Namespace) -> int:
    tree = TruncatedTree(args.m, args.depth)
    u = read_function_csv(args.function, tree)
    tol = args.tol
    checks = {
        "convex_operator": _check_payload(is_convex_operator(u, tol)),
        "binary_operator": _check_payload(is_binary_convex(u, tol, mode="operator")),
        "segment": _check_payload(is_convex_segment(u, tol)),
        "binary_subtrees": _check_payload(is_binary_convex(u, tol, mode="subtrees")),
    }
    payload = {
        "command": "check",
        "m": args.m,
        "depth": args.depth,
        "function": args.function,
        "tol": tol,
        "checks": checks,
    }
    if args.out_json:
        write_json(args.out_json, payload)
    else:
        print(json.dumps(payload, indent=2))
    return EXIT_OK


def cmd_obstacle(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    tree = TruncatedTree(args.m, args.depth)
    f = read_function_csv(args.obstacle, tree)
    result = solve_obstacle(tree, f, cfg)
    values = result.envelope.values

    if args.out_csv:
        write_solution_csv(args.out_csv, tree, values, coincidence=result.coincidence_mask)
    if args.out_dot:
        write_dot(args.out_dot, tree, values)
    if args.out_json:
        min_env = float(values.min())
        min_obs = float(f.values.min())
        obstacle_minimizers = np.nonzero(f.values <= min_obs + cfg.tol)[0]
        preserved = bool(np.all(values[obstacle_minimizers] <= min_env + cfg.tol))
        payload = _config_echo(args, "obstacle")
        payload["obstacle"] = args.obstacle
        payload.update(_report_dict(result.report))
        payload.update({
            "coincidence_count": int(result.coincidence_mask.sum()),
            "min_envelope": min_env,
            "min_obstacle": min_obs,
            "min_values_match": bool(abs(min_env - min_obs) <= cfg.tol),
            "obstacle_minimizers_preserved": preserved,
        })
        write_json(args.out_json, payload)
    if not result.report.converged:
        print(f"did not converge within {cfg.max_iter} iterations "
              f"(residual {result.report.final_residual})", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_converge(args: argparse.Namespace) -> int:
    cfg = _build_config(args)
    datum = parse_datum(args.datum)
    mode, subsamples = _parse_sampling(args.sampling)
    depths = [int(d) for d in args.depths.split(",")]
    series = convergence_study(datum, args.m, depths, cfg, mode, subsamples)

    if args.out_csv:
        lines = ["depth,root_value,delta"]
        for i, (depth, root) in enumerate(zip(series.depths, series.root_values)):
            delta = "" if i == 0 else _fmt(series.deltas[i - 1])
            lines.append(f"{depth},{_fmt(root)},{delta}")
        with open(args.out_csv, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    if args.out_json:
        payload = _config_echo(args, "converge")
        payload["depths"] = series.depths
        payload["root_values"] = series.root_values
        payload["deltas"] = series.deltas
        payload["converged"] = series.converged
        payload["deltas_all_positive"] = bool(all(d > 0 for d in series.deltas))
        payload["deltas_non_increasing_after_first"] = bool(all(
            b <= a for a, b in zip(series.deltas[1:], series.deltas[2:])))
        write_json(args.out_json, payload)
    if not all(series.converged):
        bad = [d for d, ok in zip(series.depths, series.converged) if not ok]
        print(f"did not converge at depths {bad}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser, need_depth: bool = True,
                predicate_tol: bool = False) -> None:
    parser.add_argument("--m", type=int, required=True, help="branching factor (>= 2)")
    if need_depth:
        parser.add_argument("--depth", type=int, required=True, help="truncation depth (>= 1)")
    parser.add_argument("--variant", choices=sorted(VARIANT_NAMES), default="convex")
    parser.add_argument("--k", type=int, default=None, help="subset size for kconvex")
    parser.add_argument("--tol", type=float, default=1e-9 if predicate_tol else 1e-12)
    parser.add_argument("--max-iter", type=int, default=1_000_000)
    parser.add_argument("--sweep", choices=["jacobi", "gs"], default="jacobi")
    parser.add_argument("--workers", type=int, default=1,
                        help="Jacobi worker chunks per level (output-invariant)")


def _add_outputs(parser: argparse.ArgumentParser, dot: bool = True) -> None:
    parser.add_argument("--out-csv", default=None)
    parser.add_argument("--out-json", default=None)
    if dot:
        parser.add_argument("--out-dot", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treeconvex",
        description="Convex envelopes, obstacle problems, and Laplacians on "
                    "regular m-branching trees")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_solve = sub.add_parser("solve", help="solve a Dirichlet problem from a boundary datum")
    _add_common(p_solve)
    p_solve.add_argument("--datum", required=True,
                         help="constant:c | affine:a,b | power:p | absdev:c | "
                              "indicator:lo,hi | piecewise CSV path")
    p_solve.add_argument("--sampling", default="point", help="point | inf:N")
    _add_outputs(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_check = sub.add_parser("check", help="run convexity predicates on a function CSV")
    p_check.add_argument("--m", type=int, required=True)
    p_check.add_argument("--depth", type=int, required=True)
    p_check.add_argument("--function", required=True, help="function CSV covering the tree")
    p_check.add_argument("--tol", type=float, default=1e-9)
    p_check.add_argument("--out-json", default=None)
    p_check.set_defaults(func=cmd_check)

    p_obs = sub.add_parser("obstacle", help="solve the obstacle problem for a function CSV")
    _add_common(p_obs)
    p_obs.add_argument("--obstacle", required=True, help="obstacle CSV covering the tree")
    _add_outputs(p_obs)
    p_obs.set_defaults(func=cmd_obstacle)

    p_conv = sub.add_parser("converge", help="root-value depth-convergence study")
    _add_common(p_conv, need_depth=False)
    p_conv.add_argument("--datum", required=True)
    p_conv.add_argument("--sampling", default="point")
    p_conv.add_argument("--depths", required=True, help="comma-separated increasing depths")
    _add_outputs(p_conv, dot=False)
    p_conv.set_defaults(func=cmd_converge)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
