"""Exact geometry on point sets: difference matrices, log simplex volumes, linear maps.

Volumes are only ever handled as natural logarithms. A k-point simplex has
volume sqrt(det(P^T P)) / (k-1)! where P is the N x (k-1) difference matrix,
and we get log sqrt(det(P^T P)) as the sum of log singular values of P.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

DEFAULT_RANK_TOL = 1e-10


class InvalidInputError(ValueError):
    """Raised when point data or map shapes do not fit together."""


class DegenerateInputError(InvalidInputError):
    """Raised when a point set carries no nondegenerate subset to measure."""


@dataclass(frozen=True)
class PointSet:
    """n points in R^N stored row-wise as an (n, N) float array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2:
            raise InvalidInputError(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise InvalidInputError(f"need at least 2 points, got {pts.shape[0]}")
        if pts.shape[1] < 1:
            raise InvalidInputError("points must have dimension >= 1")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("points contain non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "PointSet":
        lengths = {len(r) for r in rows}
        if len(lengths) > 1:
            raise InvalidInputError(f"rows have mixed dimensions {sorted(lengths)}")
        return cls(np.asarray(rows, dtype=float))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def N(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n

    def subset(self, indices: Sequence[int]) -> np.ndarray:
        return self.points[list(indices)]


@dataclass(frozen=True)
class LinearMap:
    """The map x -> scale * (matrix @ x) from R^N to R^d."""

    matrix: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
            raise InvalidInputError(f"matrix must be a non-empty 2-d array, got shape {mat.shape}")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise InvalidInputError(f"scale must be a positive finite number, got {self.scale}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def N(self) -> int:
        return self.matrix.shape[1]

    def rescaled(self, factor: float) -> "LinearMap":
        return LinearMap(self.matrix, self.scale * factor)

    def effective_matrix(self) -> np.ndarray:
        return self.scale * self.matrix


class LogVolume(NamedTuple):
    value: float
    degenerate: bool


def _as_point_array(points) -> np.ndarray:
    if isinstance(points, PointSet):
        return points.points
    try:
        arr = np.asarray(points, dtype=float)
    except ValueError as exc:  # ragged input
        raise InvalidInputError(f"points have mismatched dimensions: {exc}") from None
    if arr.ndim != 2:
        raise InvalidInputError(f"expected a list of equal-length vectors, got shape {arr.shape}")
    return arr


def difference_matrix(points) -> np.ndarray:
    """Return the N x (k-1) matrix whose column j is p_{j+1} - p_1."""
    arr = _as_point_array(points)
    if arr.shape[0] < 2:
        raise InvalidInputError("a difference matrix needs at least 2 points")
    return (arr[1:] - arr[0]).T


def batch_log_volumes(diffs: np.ndarray, rank_tol: float = DEFAULT_RANK_TOL):
    """Log volumes for a stack of difference matrices of shape (m, N, s).

    Returns ``(values, degenerate)``; ``values`` is NaN where degenerate.
    """
    m, N, s = diffs.shape
    if m == 0:
        return np.empty(0), np.zeros(0, dtype=bool)
    sv = np.linalg.svd(diffs, compute_uv=False)
    top = sv[:, 0]
    degenerate = (top == 0) | (sv[:, -1] < rank_tol * top)
    if s > N:
        degenerate[:] = True
    with np.errstate(divide="ignore"):
        values = np.log(sv).sum(axis=1) - math.lgamma(s + 1)
    values[degenerate] = np.nan
    return values, degenerate


def log_simplex_volume(points, rank_tol: float = DEFAULT_RANK_TOL) -> LogVolume:
    """Natural log of the (k-1)-dimensional volume of the simplex on k points."""
    diff = difference_matrix(points)
    values, degenerate = batch_log_volumes(diff[None], rank_tol)
    if degenerate[0]:
        return LogVolume(float("nan"), True)
    return LogVolume(float(values[0]), False)


def apply_map(f: LinearMap, P: PointSet) -> PointSet:
    if f.N != P.N:
        raise InvalidInputError(f"map expects dimension {f.N}, point set has dimension {P.N}")
    return PointSet(f.scale * (P.points @ f.matrix.T))


def subset_differences(points: np.ndarray, subsets: np.ndarray) -> np.ndarray:
    """Stack of difference matrices, shape (m, N, size-1), for index rows ``subsets``."""
    gathered = points[subsets]  # (m, size, N)
    return np.swapaxes(gathered[:, 1:, :] - gathered[:, :1, :], 1, 2)


def general_position_check(P: PointSet, k: int, rank_tol: float = DEFAULT_RANK_TOL):
    """Check that every subset of at most ``k`` points is affinely independent.

    Returns ``(True, None)`` or ``(False, witness)`` with the first offending
    subset found, smallest sizes first.
    """
    if not 2 <= k <= P.n:
        raise InvalidInputError(f"need 2 <= k <= n, got k={k}, n={P.n}")
    for size in range(2, k + 1):
        combos = itertools.combinations(range(P.n), size)
        while True:
            chunk = list(itertools.islice(combos, 50_000))
            if not chunk:
                break
            idx = np.asarray(chunk, dtype=np.intp)
            _, degenerate = batch_log_volumes(subset_differences(P.points, idx), rank_tol)
            if degenerate.any():
                return False, tuple(int(i) for i in idx[np.argmax(degenerate)])
    return True, None
