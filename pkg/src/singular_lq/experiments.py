"""Perturbation experiments over three structured problem families.

Family 1: square control (m = n), rank-one R, orthogonal B, N = B V with V
symmetric; generic A, Q. Exact index 3. Family 2: A = Q = I, B the all-ones
column, N = 0, R = 0. Exact index 3 with codimension 3 at any n. Family 3:
A the upper shift, Q = A + A', B the all-ones column, N = B, R = 0. Exact
index n with all rho blocks zero (pure gauge).

A sweep perturbs each family's defining matrices at a range of magnitudes
and records how the recursion's step count, codimension and final subspace
respond. Every record regenerates bit for bit from (family, n, delta, tol,
seed, trial): the unperturbed problem is seeded by (seed, family, n) and
the perturbation by the full tuple.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import exp, log

import numpy as np

from .algorithm import AlgorithmResult, final_submanifold, run
from .geometry import (
    Subspace,
    SubspaceDimensionMismatch,
    loglog_fit,
    max_principal_angle,
    perturb,
)
from .problem import LQProblem, validate

__all__ = [
    "ExperimentRecord",
    "SlopeSummary",
    "gen_experiment1",
    "gen_experiment2",
    "gen_experiment3",
    "run_sweep",
    "slope_report",
    "slope_summary",
    "records_to_csv",
    "write_records_csv",
    "slopes_to_csv",
    "write_slopes_csv",
    "RECORD_HEADER",
    "SLOPE_HEADER",
]

RECORD_HEADER = ["family", "n", "delta", "tol", "seed", "exact_steps", "steps", "codim", "alpha"]
SLOPE_HEADER = ["family", "axis", "slope", "r_squared", "num_points"]


@dataclass(frozen=True)
class ExperimentRecord:
    """One perturbed run; alpha is None when subspace dimensions mismatch."""

    family: int
    n: int
    delta: float
    tol: float
    seed: int
    trial: int
    exact_steps: int
    steps: int
    codim: int
    alpha: float | None


@dataclass(frozen=True)
class SlopeSummary:
    family: int
    axis: str
    slope: float
    r_squared: float
    num_points: int


def _random_orthogonal(n: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def _random_symmetric(n: int, rng) -> np.ndarray:
    g = rng.uniform(-1.0, 1.0, (n, n))
    return (g + g.T) / 2.0


def gen_experiment1(n: int, rng) -> LQProblem:
    """Family 1: m = n, R of rank one, B orthogonal, N = B V, V symmetric.

    V is rejection-resampled until the matrix B'QB - N'AB - B'A'N that
    controls the level-3 feedback is comfortably invertible (|det| above
    1e-3), so the unperturbed recursion reliably halts at step 3.
    """
    if n < 2:
        raise ValueError("family 1 needs n >= 2")
    u = _random_orthogonal(n, rng)
    r_diag = np.zeros(n)
    r_diag[0] = 1.0 + rng.uniform(0.0, 1.0)
    R = u.T @ np.diag(r_diag) @ u
    R = (R + R.T) / 2.0
    B = _random_orthogonal(n, rng)
    Q = _random_symmetric(n, rng)
    A = rng.uniform(-1.0, 1.0, (n, n))
    while True:
        V = _random_symmetric(n, rng)
        N = B @ V
        halting = B.T @ Q @ B - N.T @ A @ B - B.T @ A.T @ N
        sign, logdet = np.linalg.slogdet(halting)
        if sign != 0.0 and logdet > log(1e-3):
            break
    return validate(A, B, Q, N, R)


def gen_experiment2(n: int) -> LQProblem:
    """Family 2: A = Q = I, B = ones, N = 0, R = 0 (index 3, codim 3)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return validate(
        np.eye(n),
        np.ones((n, 1)),
        np.eye(n),
        np.zeros((n, 1)),
        np.zeros((1, 1)),
    )


def gen_experiment3(n: int) -> LQProblem:
    """Family 3: nilpotent shift A, Q = A + A', B = N = ones, R = 0.

    Index n with every rho block zero: the constraint chain grows one row
    per level and never reaches a feedback, a maximally gauge problem.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    A = np.eye(n, k=1)
    B = np.ones((n, 1))
    return validate(A, B, A + A.T, B.copy(), np.zeros((1, 1)))


def _symmetric_noise(n: int, delta: float, rng) -> np.ndarray:
    direction = rng.standard_normal((n, n))
    direction = (direction + direction.T) / 2.0
    norm = np.linalg.norm(direction, 2)
    magnitude = rng.uniform(0.0, delta)
    return direction * (magnitude / norm)


def _perturbed_problem(family: int, problem: LQProblem, delta: float, rng) -> LQProblem:
    if delta == 0.0:
        return problem
    if family == 1:
        # N = BV with B orthogonal, so V = B'N recovers the symmetric factor.
        V = problem.B.T @ problem.N
        V = (V + V.T) / 2.0
        a_t = perturb(problem.A, delta, rng)
        b_t = perturb(problem.B, delta, rng)
        q_t = problem.Q + _symmetric_noise(problem.n, delta, rng)
        v_t = V + _symmetric_noise(problem.n, delta, rng)
        return validate(a_t, b_t, q_t, b_t @ v_t, problem.R)
    if family == 2:
        a_t = perturb(problem.A, delta, rng)
        n_t = perturb(problem.N, delta, rng)
        b_t = perturb(problem.B, delta, rng)
        return validate(a_t, b_t, problem.Q, n_t, problem.R)
    if family == 3:
        a_t = perturb(problem.A, delta, rng)
        b_t = perturb(problem.B, delta, rng)
        r_t = perturb(problem.R, delta, rng)
        return validate(a_t, b_t, a_t + a_t.T, b_t, r_t)
    raise ValueError(f"unknown family {family}")


def _problem_rng(seed: int, family: int, n: int):
    return np.random.default_rng(np.random.SeedSequence([seed, family, n]))


def _cell_rng(seed: int, family: int, n: int, delta: float, trial: int):
    delta_bits = int(np.float64(delta).view(np.uint64))
    return np.random.default_rng(np.random.SeedSequence([seed, family, n, delta_bits, trial]))


def _exact_problem(family: int, n: int, seed: int) -> LQProblem:
    if family == 1:
        return gen_experiment1(n, _problem_rng(seed, family, n))
    if family == 2:
        return gen_experiment2(n)
    if family == 3:
        return gen_experiment3(n)
    raise ValueError(f"unknown family {family}")


def _run_cell(
    family: int,
    problem: LQProblem,
    exact: AlgorithmResult,
    exact_space: Subspace,
    n: int,
    delta: float,
    trial: int,
    tol: float,
    seed: int,
) -> ExperimentRecord:
    rng = _cell_rng(seed, family, n, delta, trial)
    perturbed = _perturbed_problem(family, problem, delta, rng)
    result = run(perturbed, tol)
    try:
        alpha: float | None = max_principal_angle(
            exact_space, Subspace(final_submanifold(result, tol))
        )
    except SubspaceDimensionMismatch:
        alpha = None
    return ExperimentRecord(
        family=family,
        n=n,
        delta=delta,
        tol=tol,
        seed=seed,
        trial=trial,
        exact_steps=exact.steps,
        steps=result.steps,
        codim=result.codim,
        alpha=alpha,
    )


def run_sweep(
    family: int,
    sizes,
    deltas,
    tol: float,
    trials: int = 1,
    seed: int = 0,
    jobs: int = 1,
) -> list[ExperimentRecord]:
    """Run a perturbation sweep and return one record per (n, delta, trial).

    For each size the exact problem is generated once, run once, and its
    final subspace compared against every perturbed run. Cells are
    independent; ``jobs > 1`` runs them on a thread pool (the work is
    BLAS-bound). Record order is deterministic regardless of jobs.
    """
    if family not in (1, 2, 3):
        raise ValueError("family must be 1, 2 or 3")
    sizes = list(sizes)
    deltas = [float(d) for d in deltas]
    if not sizes or not deltas:
        raise ValueError("sizes and deltas must be non-empty")
    if any(d < 0 for d in deltas):
        raise ValueError("deltas must be non-negative")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if tol <= 0:
        raise ValueError("tol must be positive")

    tasks = []
    for n in sizes:
        problem = _exact_problem(family, n, seed)
        exact = run(problem, tol)
        exact_space = Subspace(final_submanifold(exact, tol))
        for delta in deltas:
            for trial in range(trials):
                tasks.append((family, problem, exact, exact_space, n, delta, trial, tol, seed))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(lambda t: _run_cell(*t), tasks))
    return [_run_cell(*t) for t in tasks]


def _usable(records) -> list[ExperimentRecord]:
    return [
        r
        for r in records
        if r.alpha is not None and r.alpha > 0.0 and r.steps == r.exact_steps
    ]


def _grouped_fit(records, axis: str):
    if axis not in ("delta", "n"):
        raise ValueError("axis must be 'delta' or 'n'")
    usable = _usable(records)
    groups: dict[float, list[float]] = {}
    for r in usable:
        key = float(getattr(r, axis))
        if key > 0.0:
            groups.setdefault(key, []).append(log(r.alpha))
    points = [(key, exp(np.mean(vals))) for key, vals in sorted(groups.items())]
    if len(points) < 2:
        raise ValueError(
            f"need at least two usable {axis} groups for a slope, got {len(points)}"
        )
    return loglog_fit(points)


def slope_report(records, axis: str) -> float:
    """Log-log slope of alpha against ``axis`` ('delta' or 'n').

    Uses only usable records (finite positive alpha, steps equal to the
    exact count); trials at the same axis value are averaged in log space
    before the fit.
    """
    return _grouped_fit(records, axis).slope


def slope_summary(records, axis: str) -> SlopeSummary:
    """Same fit as :func:`slope_report` packaged for the summary CSV."""
    families = {r.family for r in records}
    if len(families) != 1:
        raise ValueError("records must come from a single family")
    fit = _grouped_fit(records, axis)
    return SlopeSummary(
        family=families.pop(),
        axis=axis,
        slope=fit.slope,
        r_squared=fit.r_squared,
        num_points=fit.num_points,
    )


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records) -> str:
    """Records as CSV text; alpha is a decimal or the literal ``mismatch``."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_HEADER)
    for r in records:
        writer.writerow(
            [
                r.family,
                r.n,
                _fmt(r.delta),
                _fmt(r.tol),
                r.seed,
                r.exact_steps,
                r.steps,
                r.codim,
                "mismatch" if r.alpha is None else _fmt(r.alpha),
            ]
        )
    return buf.getvalue()


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(records_to_csv(records))


def slopes_to_csv(summaries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SLOPE_HEADER)
    for s in summaries:
        writer.writerow([s.family, s.axis, _fmt(s.slope), _fmt(s.r_squared), s.num_points])
    return buf.getvalue()


def write_slopes_csv(summaries, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(slopes_to_csv(summaries))
