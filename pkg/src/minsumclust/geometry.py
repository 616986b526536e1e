"""Distance models, exact min-sum cluster costs, and power-of-b scale arithmetic.

Everything here is a pure function over an immutable :class:`Instance`; the
distance matrix is computed once and cached, so repeated calls are cheap and
safe to issue from multiple threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Load-time tolerance for matrix sanity checks (symmetry, triangle inequality).
MATRIX_REL_TOL = 1e-6
# Relative tolerance for float equality throughout the package.
EQ_REL_TOL = 1e-9


class DistanceMode(str, Enum):
    """How pairwise distances are defined for an instance."""

    SQEUCLIDEAN = "sqeuclid"
    EXPLICIT_METRIC = "metric"


class InstanceError(ValueError):
    """Raised for malformed instances: bad matrices, bad parameters."""


@dataclass
class Instance:
    """A clustering instance: a point set plus the targets k, n' and epsilon.

    Exactly one of ``points`` (squared-Euclidean mode) or ``dist_matrix``
    (explicit-metric mode) must be given.  Explicit matrices are validated at
    construction: symmetric, zero diagonal, nonnegative, and triangle
    inequality within relative ``MATRIX_REL_TOL``.

    Treat instances as immutable after construction.
    """

    mode: DistanceMode
    k: int
    n_prime: int
    epsilon: float
    points: np.ndarray | None = None
    dist_matrix: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.mode = DistanceMode(self.mode)
        if self.mode is DistanceMode.SQEUCLIDEAN:
            if self.points is None or self.dist_matrix is not None:
                raise InstanceError("sqeuclid mode takes points and no matrix")
            pts = np.asarray(self.points, dtype=float)
            if pts.ndim == 1:
                pts = pts.reshape(-1, 1)
            if pts.ndim != 2 or pts.shape[0] < 1:
                raise InstanceError("points must be a nonempty n x d array")
            if not np.all(np.isfinite(pts)):
                raise InstanceError("points contain non-finite values")
            self.points = pts
        else:
            if self.dist_matrix is None or self.points is not None:
                raise InstanceError("metric mode takes a matrix and no points")
            self.dist_matrix = _validated_metric(np.asarray(self.dist_matrix, dtype=float))

        if self.k < 1:
            raise InstanceError("k must be at least 1")
        if not 1 <= self.n_prime <= self.n:
            raise InstanceError("n_prime must satisfy 1 <= n_prime <= n")
        if not 0.0 < self.epsilon <= 1.0:
            raise InstanceError("epsilon must lie in (0, 1]")

    @property
    def n(self) -> int:
        if self.points is not None:
            return self.points.shape[0]
        return self.dist_matrix.shape[0]

    def distances(self) -> np.ndarray:
        """Full n x n pairwise distance matrix (cached)."""
        dmat = self._cache.get("dmat")
        if dmat is None:
            if self.mode is DistanceMode.SQEUCLIDEAN:
                diff = self.points[:, None, :] - self.points[None, :, :]
                dmat = np.einsum("ijk,ijk->ij", diff, diff)
                # exact symmetry and zero diagonal despite rounding
                dmat = np.maximum(dmat, dmat.T)
                np.fill_diagonal(dmat, 0.0)
            else:
                dmat = self.dist_matrix
            self._cache["dmat"] = dmat
        return dmat

    def max_distance(self) -> float:
        d = self._cache.get("maxd")
        if d is None:
            d = float(self.distances().max()) if self.n > 1 else 0.0
            self._cache["maxd"] = d
        return d

    def spread(self) -> float:
        """Ratio of largest to smallest nonzero distance (diagnostic only)."""
        dmat = self.distances()
        nonzero = dmat[dmat > 0.0]
        if nonzero.size == 0:
            return 1.0
        return float(nonzero.max() / nonzero.min())


def _validated_metric(mat: np.ndarray) -> np.ndarray:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
        raise InstanceError("distance matrix must be square and nonempty")
    if not np.all(np.isfinite(mat)):
        raise InstanceError("distance matrix contains non-finite values")
    scale = float(np.abs(mat).max()) if mat.size else 0.0
    tol = MATRIX_REL_TOL * max(scale, 1e-300)
    if np.abs(mat - mat.T).max() > tol:
        raise InstanceError("distance matrix is not symmetric")
    if np.abs(np.diagonal(mat)).max() > tol:
        raise InstanceError("distance matrix has a nonzero diagonal")
    if mat.min() < -tol:
        raise InstanceError("distance matrix has negative entries")
    mat = np.maximum((mat + mat.T) / 2.0, 0.0)
    np.fill_diagonal(mat, 0.0)
    n = mat.shape[0]
    for j in range(n):
        # d(i, l) <= d(i, j) + d(j, l) for all i, l
        if (mat - (mat[:, j][:, None] + mat[j, :][None, :])).max() > tol:
            raise InstanceError("distance matrix violates the triangle inequality")
    return mat


@dataclass
class ScaledCluster:
    """A candidate cluster carrying its frozen scale bookkeeping.

    ``scale_exp`` is the exponent j with base**j = floor_pow(base, |members|)
    recorded when the cluster first became tight; it is deliberately never
    recomputed when members are added later.  ``center`` is a point index and
    need not remain a member once downstream phases reassign points.
    """

    members: set[int]
    scale_exp: int
    center: int
    created: int = 0


def pair_distance(inst: Instance, i: int, j: int) -> float:
    """Distance between points i and j under the instance's model."""
    n = inst.n
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"point index out of range: {i}, {j}")
    return float(inst.distances()[i, j])


def cluster_cost(inst: Instance, members) -> float:
    """Exact min-sum cost of a cluster: half the sum over ordered pairs."""
    idx = _member_index(inst, members)
    sub = inst.distances()[np.ix_(idx, idx)]
    return float(sub.sum() / 2.0)


def centroid(inst: Instance, members) -> np.ndarray:
    """Coordinate mean of the members (squared-Euclidean mode only)."""
    if inst.mode is not DistanceMode.SQEUCLIDEAN:
        raise InstanceError("centroid requires coordinate (sqeuclid) mode")
    idx = _member_index(inst, members)
    return inst.points[idx].mean(axis=0)


def centroid_cost(inst: Instance, members) -> float:
    """Sum of squared distances from the members to their coordinate mean."""
    if inst.mode is not DistanceMode.SQEUCLIDEAN:
        raise InstanceError("centroid_cost requires coordinate (sqeuclid) mode")
    idx = _member_index(inst, members)
    diff = inst.points[idx] - inst.points[idx].mean(axis=0)
    return float((diff * diff).sum())


def best_medoid(inst: Instance, members) -> tuple[int, float]:
    """Member minimizing the summed distance to the cluster, with that sum.

    Ties resolve to the lowest point index.
    """
    idx = _member_index(inst, members)
    sums = inst.distances()[np.ix_(idx, idx)].sum(axis=1)
    pos = int(np.argmin(sums))
    return int(idx[pos]), float(sums[pos])


def floor_pow(base: int, m: int) -> int:
    """Largest power of ``base`` that is <= m, by integer multiplication."""
    if base < 2:
        raise ValueError("base must be at least 2")
    if m < 1:
        raise ValueError("m must be positive")
    p = 1
    while p * base <= m:
        p *= base
    return p


def scale_exponent(base: int, m: int) -> int:
    """Exponent j such that base**j = floor_pow(base, m)."""
    if base < 2:
        raise ValueError("base must be at least 2")
    if m < 1:
        raise ValueError("m must be positive")
    j = 0
    p = 1
    while p * base <= m:
        p *= base
        j += 1
    return j


def scaled_cost(inst: Instance, members, center: int, exp: int, base: int) -> float:
    """base**exp times the summed distance from the members to ``center``."""
    idx = _member_index(inst, members)
    return float(base**exp * inst.distances()[idx, center].sum())


def _member_index(inst: Instance, members) -> np.ndarray:
    idx = np.fromiter(members, dtype=np.intp)
    if idx.size == 0:
        raise ValueError("cluster must be nonempty")
    idx.sort()
    if idx[0] < 0 or idx[-1] >= inst.n:
        raise IndexError("point index out of range")
    return idx
