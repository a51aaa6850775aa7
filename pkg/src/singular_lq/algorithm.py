"""Recursive constraint generation for singular LQ problems.

Starting from the primary constraint rows [-N' | B' | -R], each step splits
the control coefficient rho by SVD, peels off the directions in which the
control derivative is determined, and propagates the undetermined part into
a new block of constraint rows. The recursion halts when rho becomes
regular (full row rank: the remaining control derivatives are all
determined) or when the stacked constraint matrix stops gaining rank
(gauge directions remain).

Rank conventions. :func:`numerical_rank` defaults to the relative rule
``s_i > tol * s_1``, which is scale invariant and what the split residual
bound is stated against. The recursion itself (:func:`run`,
:func:`independent_rows`, :func:`final_submanifold`) counts ``s_i > tol``
with an absolute threshold: the published index tables this code
reproduces degrade at perturbation sizes that cross ``tol`` itself, which
only an absolute cut reproduces (a perturbed zero R must read as
rank-deficient while its norm stays below tol). Both rules are exposed via
the ``relative`` flag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import ConstraintBlock, LQProblem, primary_constraint

__all__ = [
    "FEEDBACK",
    "STAGNATION",
    "EXHAUSTED",
    "ConstraintMatrix",
    "SvdSplit",
    "PartialFeedback",
    "AlgorithmResult",
    "numerical_rank",
    "svd_split",
    "step",
    "independent_rows",
    "run",
    "final_submanifold",
    "feedback_rate_map",
]

FEEDBACK = "feedback"
STAGNATION = "stagnation"
EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class ConstraintMatrix:
    """Stacked constraint rows over (x, p, u), shape (c, 2n + m)."""

    rows: np.ndarray
    n: int
    m: int

    @property
    def width(self) -> int:
        return 2 * self.n + self.m

    @property
    def sigma_part(self) -> np.ndarray:
        return self.rows[:, : self.n]

    @property
    def beta_part(self) -> np.ndarray:
        return self.rows[:, self.n : 2 * self.n]

    @property
    def rho_part(self) -> np.ndarray:
        return self.rows[:, 2 * self.n :]


@dataclass(frozen=True)
class SvdSplit:
    """SVD split of a rho block: rho = u_full @ diag(s) @ V'.

    u_top holds the first ``rank`` rows of u_full', u_bottom the rest;
    u_bottom @ rho is numerically zero, so u_bottom selects the constraint
    directions that survive into the next level.
    """

    u_full: np.ndarray
    singular_values: np.ndarray
    rank: int
    u_top: np.ndarray
    u_bottom: np.ndarray


@dataclass(frozen=True)
class PartialFeedback:
    """Determined part of the control derivative at one level.

    On the final submanifold the determined components satisfy
    diag(sigma_r) @ (v_top @ udot) + drift_x @ x + drift_p @ p
    + drift_u @ u = 0, where drift_* are u_top times the derivative
    coefficients of this level's rows.
    """

    level: int
    sigma_r: np.ndarray
    u_top: np.ndarray
    v_top: np.ndarray
    drift_x: np.ndarray
    drift_p: np.ndarray
    drift_u: np.ndarray


@dataclass(frozen=True)
class AlgorithmResult:
    """Outcome of the constraint recursion.

    steps counts constraint levels that refined the submanifold (the
    recursion index); codim is the row count of the filtered constraint
    matrix phi. halt_reason is one of FEEDBACK (rho regular, every
    remaining control derivative determined), STAGNATION (new rows added
    no rank: gauge directions remain) or EXHAUSTED (reserved: an empty
    new block is reported as FEEDBACK since full-rank rho determines
    everything). rank_history holds one (rank rho, rank phi) pair per
    generated level; selectors the u_bottom factor of each executed
    split; blocks the raw per-level rows before independence filtering.
    """

    phi: ConstraintMatrix
    steps: int
    codim: int
    halt_reason: str
    rank_history: list[tuple[int, int]] = field(default_factory=list)
    partial_feedback: list[PartialFeedback] = field(default_factory=list)
    selectors: list[np.ndarray] = field(default_factory=list)
    blocks: list[ConstraintBlock] = field(default_factory=list)
    tol: float = 1e-6


def _rank(M: np.ndarray, tol: float, relative: bool) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    threshold = tol * s[0] if relative else tol
    return int(np.count_nonzero(s > threshold))


def numerical_rank(M, tol: float, relative: bool = True) -> int:
    """Number of singular values above the tolerance threshold.

    With ``relative=True`` (default) the threshold is ``tol * s_1``; with
    ``relative=False`` it is ``tol`` itself, matching the rank calls the
    recursion makes. Empty and zero matrices have rank 0.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = np.asarray(M, dtype=float)
    return _rank(M, tol, relative)


def svd_split(rho, tol: float, relative: bool = True) -> SvdSplit:
    """Full SVD of rho with the left factor split at the numerical rank."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    rho = np.asarray(rho, dtype=float)
    if rho.ndim != 2 or rho.shape[0] < 1:
        raise ValueError(f"rho must be a matrix with at least one row, got shape {rho.shape}")
    u_full, svals, _ = np.linalg.svd(rho, full_matrices=True)
    if svals.size and svals[0] > 0.0:
        threshold = tol * svals[0] if relative else tol
        rank = int(np.count_nonzero(svals > threshold))
    else:
        rank = 0
    ut = u_full.T
    return SvdSplit(
        u_full=u_full,
        singular_values=svals,
        rank=rank,
        u_top=ut[:rank],
        u_bottom=ut[rank:],
    )


def step(block: ConstraintBlock, split: SvdSplit, problem: LQProblem) -> ConstraintBlock:
    """Propagate the undetermined rows of a block one level.

    sigma_next = Ub (sigma A + beta Q), beta_next = Ub (-beta A'),
    rho_next = Ub (sigma B + beta N), with Ub the u_bottom selector.
    Raises if the split has nothing to propagate (rho full row rank); the
    caller halts with FEEDBACK in that case.
    """
    if split.u_bottom.shape[0] == 0:
        raise ValueError("rho has full row rank at this tolerance; nothing to propagate")
    ub = split.u_bottom
    return ConstraintBlock(
        sigma=ub @ (block.sigma @ problem.A + block.beta @ problem.Q),
        beta=ub @ (-block.beta @ problem.A.T),
        rho=ub @ (block.sigma @ problem.B + block.beta @ problem.N),
        level=block.level + 1,
    )


def _independent_rows_array(M: np.ndarray, tol: float, relative: bool) -> np.ndarray:
    """Greedy top-down row filter at tolerance tol.

    Keeps each row iff appending it raises the numerical rank of the rows
    kept so far, so the kept count always equals the numerical rank of the
    result. Rank-0 or empty input yields the empty (void) matrix.
    """
    l = M.shape[0]
    if l == 0:
        return M[:0].copy()
    total = _rank(M, tol, relative)
    if total == 0:
        return M[:0].copy()
    if total == l:
        # Full row rank: by singular value interlacing every prefix is full
        # rank too, so the greedy pass keeps every row. One SVD instead of l.
        return M.copy()
    kept = M[:0]
    kept_rank = 0
    for i in range(l):
        candidate = np.vstack([kept, M[i : i + 1]])
        r = _rank(candidate, tol, relative)
        if r > kept_rank:
            kept, kept_rank = candidate, r
    return kept


def independent_rows(phi: ConstraintMatrix, tol: float, relative: bool = False) -> ConstraintMatrix:
    """Filter phi to its greedily selected independent rows (idempotent)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return ConstraintMatrix(
        rows=_independent_rows_array(np.asarray(phi.rows, dtype=float), tol, relative),
        n=phi.n,
        m=phi.m,
    )


def _partial_feedback(block: ConstraintBlock, split: SvdSplit, problem: LQProblem) -> PartialFeedback:
    sigma_r = split.singular_values[: split.rank]
    # V'_top recovered from the split: Sigma_r V'_top = u_top rho.
    v_top = (split.u_top @ block.rho) / sigma_r[:, None]
    return PartialFeedback(
        level=block.level,
        sigma_r=sigma_r.copy(),
        u_top=split.u_top,
        v_top=v_top,
        drift_x=split.u_top @ (block.sigma @ problem.A + block.beta @ problem.Q),
        drift_p=split.u_top @ (-block.beta @ problem.A.T),
        drift_u=split.u_top @ (block.sigma @ problem.B + block.beta @ problem.N),
    )


def run(problem: LQProblem, tol: float = 1e-6) -> AlgorithmResult:
    """Run the constraint recursion to the final submanifold.

    Parameters
    ----------
    problem : LQProblem
        Validated problem data.
    tol : float
        Rank tolerance. All rank decisions inside the loop use the
        absolute rule (``s > tol``); see the module docstring.

    Returns
    -------
    AlgorithmResult
        Filtered constraint matrix, step count, codimension, halt reason
        and the per-level trace.

    The loop mirrors the reference pseudocode: while rho is rank
    deficient and phi gained rank last level, split rho, peel off the
    determined directions, append the propagated rows to phi and refilter.
    The final step count drops by one when the last generated level added
    no rank, and is clamped to at least 1 (a problem with no effective
    constraints stabilizes at the first level).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")

    block = primary_constraint(problem)
    blocks = [block]
    l = block.rho.shape[0]
    phi = _independent_rows_array(block.stacked(), tol, relative=False)
    p = 0
    k = 1
    rho_rank = _rank(block.rho, tol, relative=False)
    phi_rank = _rank(phi, tol, relative=False)
    rank_history = [(rho_rank, phi_rank)]
    feedbacks: list[PartialFeedback] = []
    selectors: list[np.ndarray] = []
    halt = STAGNATION

    while True:
        if rho_rank >= l:
            # rho regular: the equation-of-motion feedback determines the rest.
            if rho_rank >= 1:
                feedbacks.append(_partial_feedback(block, svd_split(block.rho, tol, relative=False), problem))
            halt = FEEDBACK
            break
        if phi_rank <= p:
            if rho_rank >= 1:
                feedbacks.append(_partial_feedback(block, svd_split(block.rho, tol, relative=False), problem))
            halt = STAGNATION
            break
        k += 1
        p = phi_rank
        l = block.rho.shape[0]
        split = svd_split(block.rho, tol, relative=False)
        if split.rank >= 1:
            feedbacks.append(_partial_feedback(block, split, problem))
        if split.rank == l:
            # New block would be empty: all of rho's rows are independent,
            # so the feedback determines everything. The pseudocode appends
            # nothing and the final rank check undoes the k increment below.
            halt = FEEDBACK
            break
        selectors.append(split.u_bottom)
        block = step(block, split, problem)
        blocks.append(block)
        phi = _independent_rows_array(np.vstack([phi, block.stacked()]), tol, relative=False)
        rho_rank = _rank(block.rho, tol, relative=False)
        phi_rank = _rank(phi, tol, relative=False)
        rank_history.append((rho_rank, phi_rank))

    if phi_rank <= p:
        k -= 1
    k = max(k, 1)

    return AlgorithmResult(
        phi=ConstraintMatrix(rows=phi, n=problem.n, m=problem.m),
        steps=k,
        codim=phi.shape[0],
        halt_reason=halt,
        rank_history=rank_history,
        partial_feedback=feedbacks,
        selectors=selectors,
        blocks=blocks,
        tol=tol,
    )


def final_submanifold(result: AlgorithmResult, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the null space of phi, shape (2n + m, d).

    d equals 2n + m minus the numerical rank of phi at ``tol`` (defaults
    to the tolerance the recursion ran with). The columns span the set of
    consistent (x, p, u) triples.
    """
    tol = result.tol if tol is None else tol
    if tol <= 0:
        raise ValueError("tol must be positive")
    width = result.phi.width
    M = result.phi.rows
    if M.shape[0] == 0:
        return np.eye(width)
    _, svals, vh = np.linalg.svd(M, full_matrices=True)
    rank = int(np.count_nonzero(svals > tol))
    return vh[rank:].T


def feedback_rate_map(result: AlgorithmResult) -> np.ndarray:
    """Minimal-norm linear map L with udot = L @ (x, p, u).

    Stacks the recorded per-level feedback relations and solves them in
    the least-squares sense; on the final submanifold the stacked system
    is consistent, so the returned udot satisfies every determined
    relation there. With no determined directions (all rho blocks zero)
    the map is zero: the control derivative is pure gauge.
    """
    m = result.phi.m
    width = result.phi.width
    if not result.partial_feedback:
        return np.zeros((m, width))
    lhs = np.vstack([pf.sigma_r[:, None] * pf.v_top for pf in result.partial_feedback])
    rhs = np.vstack([
        np.hstack([pf.drift_x, pf.drift_p, pf.drift_u]) for pf in result.partial_feedback
    ])
    solution, *_ = np.linalg.lstsq(lhs, -rhs, rcond=None)
    return solution
