"""Unprojected constraint blocks and their closed forms.

Dropping the SVD selectors from the recursion gives m-row "tilde" blocks
satisfying sigma~(k+1) = sigma~(k) A + beta~(k) Q, beta~(k+1) = -beta~(k) A',
rho~(k+1) = sigma~(k) B + beta~(k) N from (-N', B', -R). These admit closed
forms in powers of A, and the projected blocks of the recursion are exactly
the recorded selector products applied to them. Cross-checking the two
routes is a cheap consistency test for any run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ConstraintBlock, LQProblem

__all__ = ["TildeBlock", "tilde_recurrence", "tilde_closed_form", "theorem2_blocks"]


@dataclass(frozen=True)
class TildeBlock:
    """Unprojected level-k block; sigma_t, beta_t are m x n, rho_t is m x m."""

    sigma_t: np.ndarray
    beta_t: np.ndarray
    rho_t: np.ndarray
    level: int


def tilde_recurrence(problem: LQProblem, k_max: int) -> list[TildeBlock]:
    """Tilde blocks for levels 1..k_max via the recurrence."""
    if k_max < 1:
        raise ValueError("k_max must be at least 1")
    A, B, Q, N, R = problem.A, problem.B, problem.Q, problem.N, problem.R
    sigma = -N.T.copy()
    beta = B.T.copy()
    rho = -R.copy()
    out = [TildeBlock(sigma, beta, rho, 1)]
    for level in range(2, k_max + 1):
        sigma, beta, rho = (
            sigma @ A + beta @ Q,
            -beta @ A.T,
            sigma @ B + beta @ N,
        )
        out.append(TildeBlock(sigma, beta, rho, level))
    return out


def _powers(M: np.ndarray, top: int) -> list[np.ndarray]:
    # M^0 .. M^top by repeated multiplication
    out = [np.eye(M.shape[0])]
    for _ in range(top):
        out.append(out[-1] @ M)
    return out


def tilde_closed_form(problem: LQProblem, k: int) -> TildeBlock:
    """Level-k tilde block straight from powers of A.

    For j = k - 1 >= 1:
      beta~(k)  = (-1)^j B' (A')^j
      sigma~(k) = -N' A^j + B' sum_{i=0}^{j-1} (-1)^i (A')^i Q A^(j-1-i)
      rho~(2)   = -N'B + B'N
      rho~(k)   = -N' A^(j-1) B + (-1)^(j-1) B' (A')^(j-1) N
                  + B' [sum_{i=0}^{j-2} (-1)^i (A')^i Q A^(j-2-i)] B   (k >= 3)
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    A, B, Q, N, R = problem.A, problem.B, problem.Q, problem.N, problem.R
    if k == 1:
        return TildeBlock(-N.T.copy(), B.T.copy(), -R.copy(), 1)

    j = k - 1
    pow_a = _powers(A, j)
    pow_at = _powers(A.T, j)
    bt = B.T

    beta = (-1.0) ** j * bt @ pow_at[j]

    acc = np.zeros((problem.n, problem.n))
    for i in range(j):
        acc += (-1.0) ** i * pow_at[i] @ Q @ pow_a[j - 1 - i]
    sigma = -N.T @ pow_a[j] + bt @ acc

    if k == 2:
        rho = -N.T @ B + bt @ N
    else:
        acc2 = np.zeros((problem.n, problem.n))
        for i in range(j - 1):
            acc2 += (-1.0) ** i * pow_at[i] @ Q @ pow_a[j - 2 - i]
        rho = (
            -N.T @ pow_a[j - 1] @ B
            + (-1.0) ** (j - 1) * bt @ pow_at[j - 1] @ N
            + bt @ acc2 @ B
        )
    return TildeBlock(sigma, beta, rho, k)


def theorem2_blocks(
    problem: LQProblem, u_selectors: list[np.ndarray], k: int
) -> ConstraintBlock:
    """Level-k projected block as selector products applied to tilde blocks.

    u_selectors are the recorded u_bottom factors of a run, in level
    order; the level-k block is U(k-1) ... U(1) applied to the level-k
    tilde block. k = 1 reproduces the primary constraint.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(u_selectors) < k - 1:
        raise ValueError(
            f"need {k - 1} selectors for level {k}, got {len(u_selectors)}"
        )
    tilde = tilde_closed_form(problem, k)
    proj = np.eye(problem.m)
    for sel in u_selectors[: k - 1]:
        sel = np.asarray(sel, dtype=float)
        if sel.shape[1] != proj.shape[0]:
            raise ValueError(
                f"selector with {sel.shape[1]} columns cannot follow a "
                f"{proj.shape[0]}-row product; selectors inconsistent with k"
            )
        proj = sel @ proj
    return ConstraintBlock(
        sigma=proj @ tilde.sigma_t,
        beta=proj @ tilde.beta_t,
        rho=proj @ tilde.rho_t,
        level=k,
    )
