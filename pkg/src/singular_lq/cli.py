"""Command-line front end: solve one problem, index a DAE, or sweep.

Exit codes: 0 success, 1 usage error, 2 unreadable or invalid input,
3 numerical failure (SVD non-convergence).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from math import isclose, log10
from pathlib import Path

import numpy as np

from .algorithm import final_submanifold, run
from .dae import LinearDAE, dae_constraint_chain
from .experiments import (
    run_sweep,
    slope_summary,
    write_records_csv,
    write_slopes_csv,
)
from .problem import validate

__all__ = ["main"]

USAGE_ERROR = 1
INPUT_ERROR = 2
NUMERICAL_ERROR = 3


class InputError(Exception):
    """Problem or DAE file is missing, malformed, or fails validation."""


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; this tool reserves 2 for bad
    # input files, so remap.
    def error(self, message):
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _positive_float(text: str) -> float:
    value = float(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return value


def _parse_sizes(text: str) -> list[int]:
    sizes = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        n = int(token)
        if n < 1:
            raise argparse.ArgumentTypeError(f"size {n} is not positive")
        sizes.append(n)
    if not sizes:
        raise argparse.ArgumentTypeError("empty size list")
    return sizes


def _parse_deltas(text: str) -> list[float]:
    """Comma list of magnitudes; ``a..b`` expands the decades a..b inclusive."""
    deltas: list[float] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        if ".." in token:
            lo_text, hi_text = token.split("..", 1)
            try:
                lo, hi = float(lo_text), float(hi_text)
            except ValueError as exc:
                raise argparse.ArgumentTypeError(f"bad delta range {token!r}") from exc
            if lo <= 0 or hi <= 0:
                raise argparse.ArgumentTypeError("delta range endpoints must be positive")
            e_lo, e_hi = round(log10(lo)), round(log10(hi))
            if not isclose(lo, 10.0 ** e_lo, rel_tol=1e-12) or not isclose(
                hi, 10.0 ** e_hi, rel_tol=1e-12
            ):
                raise argparse.ArgumentTypeError(
                    f"range endpoints must be powers of ten, got {token!r}"
                )
            step = 1 if e_hi >= e_lo else -1
            deltas.extend(10.0 ** e for e in range(e_lo, e_hi + step, step))
        else:
            try:
                value = float(token)
            except ValueError as exc:
                raise argparse.ArgumentTypeError(f"bad delta {token!r}") from exc
            if value < 0:
                raise argparse.ArgumentTypeError("deltas must be non-negative")
            deltas.append(value)
    if not deltas:
        raise argparse.ArgumentTypeError("empty delta list")
    return deltas


def _read_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}: top level must be an object")
    return data


def _matrix_field(data: dict, name: str, rows: int, cols: int, path: str) -> np.ndarray:
    if name not in data:
        raise InputError(f"{path}: missing field {name!r}")
    try:
        arr = np.asarray(data[name], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: field {name!r} is not numeric: {exc}") from exc
    if arr.ndim == 1 and arr.size == rows * cols:
        arr = arr.reshape(rows, cols)  # flat row-major
    if arr.shape != (rows, cols):
        raise InputError(
            f"{path}: field {name!r} must be {rows}x{cols}, got shape {arr.shape}"
        )
    if not np.isfinite(arr).all():
        raise InputError(f"{path}: field {name!r} contains non-finite entries")
    return arr


def _load_problem(path: str):
    data = _read_json(path)
    for name in ("n", "m"):
        if name not in data:
            raise InputError(f"{path}: missing field {name!r}")
        if not isinstance(data[name], int) or data[name] < 1:
            raise InputError(f"{path}: field {name!r} must be a positive integer")
    n, m = data["n"], data["m"]
    A = _matrix_field(data, "A", n, n, path)
    B = _matrix_field(data, "B", n, m, path)
    Q = _matrix_field(data, "Q", n, n, path)
    N = _matrix_field(data, "N", n, m, path)
    R = _matrix_field(data, "R", m, m, path)
    try:
        return validate(A, B, Q, N, R)
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from exc


def _load_dae(path: str) -> LinearDAE:
    data = _read_json(path)
    if "A" not in data:
        raise InputError(f"{path}: missing field 'A'")
    try:
        A = np.asarray(data["A"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: field 'A' is not numeric: {exc}") from exc
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise InputError(f"{path}: field 'A' must be a square matrix")
    n = A.shape[0]
    B = _matrix_field(data, "B", n, n, path)
    if not np.isfinite(A).all():
        raise InputError(f"{path}: field 'A' contains non-finite entries")
    return LinearDAE(A=A, B=B)


def _print_matrix(M: np.ndarray) -> None:
    for row in M:
        print(" ".join(f"{value:.17g}" for value in row))


def _cmd_solve(args) -> int:
    problem = _load_problem(args.problem)
    result = run(problem, tol=args.tol)
    basis = final_submanifold(result, args.tol)
    print(f"steps={result.steps} codim={result.codim} reason={result.halt_reason}")
    print(f"phi rows={result.phi.rows.shape[0]} cols={result.phi.width}")
    _print_matrix(result.phi.rows)
    print(f"subspace dim={basis.shape[1]}")
    _print_matrix(basis)
    return 0


def _cmd_dae(args) -> int:
    dae = _load_dae(args.system)
    chain, steps = dae_constraint_chain(dae, tol=args.tol)
    print(f"steps={steps} dim={chain[-1].shape[1]}")
    return 0


def _slopes_path(records_path: str) -> str:
    root, ext = os.path.splitext(records_path)
    return root + ".slopes" + (ext if ext else ".csv")


def _cmd_sweep(args) -> int:
    records = run_sweep(
        family=args.family,
        sizes=args.n,
        deltas=args.deltas,
        tol=args.tol,
        trials=args.trials,
        seed=args.seed,
        jobs=args.jobs,
    )
    summaries = []
    for axis, values in (("delta", {r.delta for r in records}), ("n", {r.n for r in records})):
        if len(values) < 2:
            continue
        try:
            summaries.append(slope_summary(records, axis))
        except ValueError as exc:
            print(f"slope axis={axis}: not available ({exc})")
    for s in summaries:
        print(
            f"slope axis={s.axis} family={s.family} slope={s.slope:.17g} "
            f"r_squared={s.r_squared:.17g} num_points={s.num_points}"
        )
    if args.out:
        write_records_csv(records, args.out)
        print(f"records written to {args.out}")
        if summaries:
            spath = _slopes_path(args.out)
            write_slopes_csv(summaries, spath)
            print(f"slopes written to {spath}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="singular-lq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="run the constraint recursion on a problem file")
    solve.add_argument("problem", help="JSON problem file with fields n, m, A, B, Q, N, R")
    solve.add_argument("--tol", type=_positive_float, default=1e-6)
    solve.set_defaults(func=_cmd_solve)

    dae = sub.add_parser("dae", help="subspace chain of a linear DAE A xdot = B x")
    dae.add_argument("system", help="JSON file with square matrices A, B")
    dae.add_argument("--tol", type=_positive_float, default=1e-9)
    dae.set_defaults(func=_cmd_dae)

    sweep = sub.add_parser("sweep", help="perturbation sweep over a problem family")
    sweep.add_argument("--family", type=int, choices=(1, 2, 3), required=True)
    sweep.add_argument("--n", type=_parse_sizes, required=True, help="comma list of sizes")
    sweep.add_argument(
        "--deltas",
        type=_parse_deltas,
        required=True,
        help="comma list of magnitudes; a..b expands decades (e.g. 1e-16..1e-1)",
    )
    sweep.add_argument("--tol", type=_positive_float, default=1e-6)
    sweep.add_argument("--trials", type=int, default=1)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--out", help="records CSV path (slope CSV lands beside it)")
    sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return NUMERICAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
