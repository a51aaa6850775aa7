"""Principal angles, seeded perturbations and log-log slope fits."""

from __future__ import annotations

from dataclasses import dataclass
from math import acos, asin, pi
from typing import Iterable, NamedTuple

import numpy as np

__all__ = [
    "Subspace",
    "SubspaceDimensionMismatch",
    "max_principal_angle",
    "perturb",
    "loglog_slope",
    "LogLogFit",
    "loglog_fit",
]


class SubspaceDimensionMismatch(ValueError):
    """Compared subspaces have different dimensions; no angle is defined.

    Experiment drivers record this outcome explicitly instead of
    fabricating an angle.
    """


@dataclass(frozen=True)
class Subspace:
    """A subspace of R^D held as an orthonormal basis matrix (D x d)."""

    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2:
            raise ValueError(f"basis must be a matrix, got shape {basis.shape}")
        d = basis.shape[1]
        gram_dev = np.abs(basis.T @ basis - np.eye(d)).max() if d else 0.0
        if gram_dev > 1e-12 * max(d, 1):
            raise ValueError(f"basis columns not orthonormal (deviation {gram_dev:.3e})")
        object.__setattr__(self, "basis", basis)

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def max_principal_angle(first: Subspace, second: Subspace) -> float:
    """Largest principal angle between two equal-dimensional subspaces.

    The cosine of the largest angle is the smallest singular value of
    basis1' basis2. That formula alone loses half the working precision
    near zero (acos of 1 - eps), so small angles are recomputed from the
    sine: the largest singular value of basis2 projected off span(basis1).
    Raises SubspaceDimensionMismatch when the subspace dimensions differ
    and ValueError when the ambient spaces do.
    """
    if first.ambient_dim != second.ambient_dim:
        raise ValueError(
            f"ambient dimensions differ: {first.ambient_dim} vs {second.ambient_dim}"
        )
    if first.dim != second.dim:
        raise SubspaceDimensionMismatch(
            f"subspace dimensions differ: {first.dim} vs {second.dim}"
        )
    if first.dim == 0:
        return 0.0
    cross = first.basis.T @ second.basis
    svals = np.linalg.svd(cross, compute_uv=False)
    cos_min = min(max(float(svals[-1]), 0.0), 1.0)
    if cos_min ** 2 > 0.5:  # angle below pi/4: sine route keeps full precision
        residual = second.basis - first.basis @ cross
        sin_max = float(np.linalg.svd(residual, compute_uv=False)[0])
        angle = asin(min(max(sin_max, 0.0), 1.0))
    else:
        angle = acos(cos_min)
    return min(max(angle, 0.0), pi / 2)


def perturb(M, delta: float, rng) -> np.ndarray:
    """M plus a dense random matrix of spectral norm uniform on (0, delta).

    delta = 0 returns M unchanged. The draw is deterministic for a given
    generator state: the direction first, then the magnitude.
    """
    M = np.asarray(M, dtype=float)
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta == 0.0:
        return M.copy()
    direction = rng.standard_normal(M.shape)
    norm = np.linalg.norm(direction, 2)
    if norm == 0.0:  # astronomically unlikely; retry once keeps the contract
        direction = rng.standard_normal(M.shape)
        norm = np.linalg.norm(direction, 2)
    magnitude = rng.uniform(0.0, delta)
    return M + direction * (magnitude / norm)


class LogLogFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float
    num_points: int


def loglog_fit(pairs: Iterable[tuple[float, float]]) -> LogLogFit:
    """Least-squares fit of ln y against ln x."""
    data = [(float(x), float(y)) for x, y in pairs]
    if len(data) < 2:
        raise ValueError("need at least two points for a slope")
    if any(x <= 0 or y <= 0 for x, y in data):
        raise ValueError("log-log fit requires positive coordinates")
    lx = np.log([x for x, _ in data])
    ly = np.log([y for _, y in data])
    if np.allclose(lx, lx[0]):
        raise ValueError("all x values coincide; slope undefined")
    slope, intercept = np.polyfit(lx, ly, 1)
    residual = ly - (slope * lx + intercept)
    total = ly - ly.mean()
    ss_tot = float(total @ total)
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(residual @ residual) / ss_tot
    return LogLogFit(float(slope), float(intercept), r2, len(data))


def loglog_slope(pairs: Iterable[tuple[float, float]]) -> float:
    """Slope of the least-squares line through (ln x, ln y)."""
    return loglog_fit(pairs).slope
