"""Linear constant-coefficient DAEs A xdot = B x and their subspace chain.

The chain M0 = R^n, M_{k+1} = { x in M_k : B x in Im(A restricted to M_k) }
stabilizes after finitely many steps at the set of consistent initial
conditions. For a regular pencil brought to Weierstrass form
(E A F = blkdiag(I, Nnil), E B F = blkdiag(W, I)) the number of steps is
nu + 1, where nu is the nilpotency index of Nnil normalized so that
Nnil^nu != 0 and Nnil^(nu+1) = 0 (nu = 0 for Nnil = 0).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinearDAE",
    "WeierstrassSpec",
    "dae_constraint_chain",
    "build_weierstrass",
    "pencil_is_regular",
    "random_weierstrass_spec",
]


@dataclass(frozen=True)
class LinearDAE:
    """Square coefficient pair for A xdot = B x."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"A must be square, got shape {A.shape}")
        if B.shape != A.shape:
            raise ValueError(f"B must match A, got {B.shape} vs {A.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class WeierstrassSpec:
    """Canonical data (W, Nnil, nu) plus the transforms E, F that hide it.

    Nnil is nilpotent with Nnil^nu != 0 and Nnil^(nu+1) = 0; E and F must
    be invertible (the generator keeps them orthogonal or bounded in
    condition number so the chain's rank decisions stay clean).
    """

    W: np.ndarray
    Nnil: np.ndarray
    nu: int
    E: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        Nnil = np.asarray(self.Nnil, dtype=float)
        E = np.asarray(self.E, dtype=float)
        F = np.asarray(self.F, dtype=float)
        d, q = W.shape[0], Nnil.shape[0]
        if W.shape != (d, d) or Nnil.shape != (q, q):
            raise ValueError("W and Nnil must be square")
        if q < 1:
            raise ValueError("Nnil must be at least 1x1")
        if E.shape != (d + q, d + q) or F.shape != (d + q, d + q):
            raise ValueError(f"E and F must be {(d + q, d + q)}")
        if not 0 <= self.nu <= q - 1:
            raise ValueError(f"nu must lie in [0, q-1], got {self.nu}")
        power = np.linalg.matrix_power(Nnil, self.nu) if self.nu else np.eye(q)
        if not np.any(power):
            raise ValueError(f"Nnil^{self.nu} vanishes; nu overstated")
        if np.any(power @ Nnil):
            raise ValueError(f"Nnil^{self.nu + 1} does not vanish; nu understated")
        for name, M in (("W", W), ("Nnil", Nnil), ("E", E), ("F", F)):
            object.__setattr__(self, name, M)

    @property
    def d(self) -> int:
        return self.W.shape[0]

    @property
    def q(self) -> int:
        return self.Nnil.shape[0]


def _null_basis(M: np.ndarray, cut: float) -> np.ndarray:
    """Orthonormal null-space basis of M; singular values <= cut are zero.

    The cut is absolute and must be anchored to the scale of the original
    system matrices, not of M: deep in the chain M is a product whose
    entries can be pure roundoff, and a relative threshold would read such
    noise as full rank.
    """
    cols = M.shape[1]
    if M.shape[0] == 0 or cols == 0:
        return np.eye(cols)
    _, svals, vh = np.linalg.svd(M, full_matrices=True)
    rank = int(np.count_nonzero(svals > cut))
    return vh[rank:].T


def _refine(dae: LinearDAE, basis: np.ndarray, cut_a: float, cut_b: float) -> np.ndarray:
    """One chain step: basis of { x in span(basis) : B x in Im(A basis) }."""
    restricted = dae.A @ basis
    left_null = _null_basis(restricted.T, cut_a)  # z with z' A basis = 0
    if left_null.shape[1] == 0:
        return basis
    conditions = left_null.T @ dae.B @ basis
    kernel = _null_basis(conditions, cut_b)
    return basis @ kernel


def dae_constraint_chain(dae: LinearDAE, tol: float = 1e-9) -> tuple[list[np.ndarray], int]:
    """Subspace chain M1 >= M2 >= ... and the step count.

    Returns (chain, r) where chain[k-1] is an orthonormal basis of M_k,
    r is the smallest k >= 1 with M_k = M_{k+1} (strict refinements plus
    one), and chain ends at M_r, the consistent initial conditions.
    Subspaces are compared by dimension, which suffices because each step
    refines the previous subspace.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    norm_a = np.linalg.norm(dae.A, 2)
    norm_b = np.linalg.norm(dae.B, 2)
    cut_a = tol * (norm_a if norm_a > 0 else 1.0)
    cut_b = tol * (norm_b if norm_b > 0 else 1.0)
    basis = np.eye(dae.n)
    chain: list[np.ndarray] = []
    k = 0
    while True:
        refined = _refine(dae, basis, cut_a, cut_b)
        k += 1
        if refined.shape[1] == basis.shape[1] and chain:
            # M_k equals M_{k-1}: the chain stabilized one step earlier.
            return chain, k - 1
        if refined.shape[1] == basis.shape[1]:
            # M1 = M0 = R^n: no constraint at all, r = 1.
            chain.append(refined)
            return chain, 1
        chain.append(refined)
        basis = refined
        if k > dae.n + 1:  # dimensions strictly decrease; cannot happen
            raise RuntimeError("constraint chain failed to stabilize")


def build_weierstrass(spec: WeierstrassSpec) -> LinearDAE:
    """Assemble A = E^-1 blkdiag(I, Nnil) F^-1, B = E^-1 blkdiag(W, I) F^-1."""
    d, q = spec.d, spec.q
    core_a = np.zeros((d + q, d + q))
    core_a[:d, :d] = np.eye(d)
    core_a[d:, d:] = spec.Nnil
    core_b = np.zeros((d + q, d + q))
    core_b[:d, :d] = spec.W
    core_b[d:, d:] = np.eye(q)
    f_inv = np.linalg.inv(spec.F)
    A = np.linalg.solve(spec.E, core_a) @ f_inv
    B = np.linalg.solve(spec.E, core_b) @ f_inv
    return LinearDAE(A=A, B=B)


def pencil_is_regular(
    dae: LinearDAE, trials: int = 16, tol: float = 1e-12, rng=None
) -> bool:
    """Probabilistic regularity test: det(lambda A - B) != 0 somewhere.

    Evaluates the determinant at ``trials`` random real lambda and
    compares |det| against tol times the Hadamard bound (product of row
    norms) of the evaluated pencil. An irregular pencil vanishes
    identically, so any single clear non-zero certifies regularity; a
    regular pencil fails all trials only if every sampled lambda lands
    near a generalized eigenvalue, which has probability zero under a
    continuous sampling distribution.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(0) if rng is None else rng
    for _ in range(trials):
        lam = rng.standard_normal()
        pencil = lam * dae.A - dae.B
        sign, logdet = np.linalg.slogdet(pencil)
        if sign == 0.0:
            continue
        row_norms = np.linalg.norm(pencil, axis=1)
        if np.any(row_norms == 0.0):
            continue
        if logdet > np.log(tol) + np.log(row_norms).sum():
            return True
    return False


def _random_orthogonal(dim: int, rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def random_weierstrass_spec(
    rng,
    d_max: int = 3,
    q_max: int = 6,
    nu_max: int = 5,
    max_cond: float = 1.0,
) -> WeierstrassSpec:
    """Draw a spec with known index: one nilpotent Jordan block plus zeros.

    E and F are random orthogonal for ``max_cond = 1`` (the default);
    larger values mix in a diagonal with condition number up to max_cond.
    """
    d = int(rng.integers(1, d_max + 1))
    nu = int(rng.integers(0, min(nu_max, q_max - 1) + 1))
    q = int(rng.integers(nu + 1, q_max + 1))
    W = rng.uniform(-1.0, 1.0, (d, d))
    nnil = np.zeros((q, q))
    for i in range(nu):
        nnil[i, i + 1] = 1.0
    size = d + q

    def transform():
        M = _random_orthogonal(size, rng)
        if max_cond > 1.0:
            spread = np.exp(rng.uniform(0.0, np.log(max_cond), size))
            spread /= spread.min()
            M = M * spread  # scale columns; condition number <= max_cond
        return M

    return WeierstrassSpec(W=W, Nnil=nnil, nu=nu, E=transform(), F=transform())
