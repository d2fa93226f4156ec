#  Copyright (C) 2025 The pctmi Developers
#
#  This program is free software: you can redistribute it and/or modify
#  it under the terms of the GNU General Public License as published by
#  the Free Software Foundation, either version 3 of the License, or
#  (at your option) any later version.
#
#  This program is distributed in the hope that it will be useful,
#  but WITHOUT ANY WARRANTY; without even the implied warranty of
#  MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#  GNU General Public License for more details.
#
#  You should have received a copy of the GNU General Public License
#  along with this program.  If not, see <http://www.gnu.org/licenses/>.

from __future__ import annotations

import logging

import numpy as np
from joblib import Parallel, delayed
from scipy.special import digamma
from scipy.stats import rankdata
from sklearn.neighbors import KDTree

from .config import KnnParams, PermutationParams, config
from .errors import InsufficientSamplesError, InvalidConfigError, InvalidDataError
from .utility import checksum, derive_rng

logger = logging.getLogger(__name__)


def _as_matrix(rows, name: str) -> np.ndarray:
    matrix = np.asarray(rows, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise InvalidDataError(f"{name} must be a non-empty matrix.")
    if not np.all(np.isfinite(matrix)):
        raise InvalidDataError(f"{name} contains non-finite values.")
    return matrix


def _prepare(block: np.ndarray, params: KnnParams, jitter: bool = True) -> np.ndarray:
    """
    Standardise (or rank-transform) each column and, if `jitter` is set, add seeded jitter.
    The jitter of a column depends only on the seed and the transformed column itself.
    """
    out = np.empty_like(block)
    for c in range(block.shape[1]):
        column = block[:, c]
        if params.transform == "rank":
            column = rankdata(column)
        column = column - column.mean()
        std = column.std()
        if std > 0:
            column = column / std
        if jitter:
            column = column + params.jitter_scale * derive_rng(
                params.seed, checksum(column)
            ).standard_normal(len(column))
        out[:, c] = column
    return out


def _check(n: int, k: int):
    if n <= k:
        raise InsufficientSamplesError(n, k + 1, "samples")


class NeighborCounter:
    """
    Max-norm neighbour queries backed by a KD-tree.

    `kth_distance` returns the distance to the k-th neighbour of every point, excluding the point itself.
    `count_within` returns, for every point, the number of other points strictly closer than the given radius.
    """

    def __init__(self, points: np.ndarray, leaf_size: int = 30):
        self._points: np.ndarray = points
        self._tree: KDTree = KDTree(points, leaf_size=leaf_size, metric="chebyshev")

    def kth_distance(self, k: int) -> np.ndarray:
        return self._tree.query(self._points, k=k + 1)[0][:, k]

    def count_within(self, radius: np.ndarray) -> np.ndarray:
        return (
            self._tree.query_radius(
                self._points, np.nextafter(radius, 0), count_only=True
            )
            - 1
        )

    def nearest(self, k: int) -> np.ndarray:
        return self._tree.query(self._points, k=k)[1]


class BruteForceCounter(NeighborCounter):
    """
    The same queries by exhaustive O(n^2) distance computation, used as a reference.
    """

    def __init__(self, points: np.ndarray, leaf_size: int = 30):  # noqa
        self._points = points
        self._distance = np.max(
            np.abs(points[:, None, :] - points[None, :, :]), axis=2
        )

    def kth_distance(self, k: int) -> np.ndarray:
        return np.sort(self._distance, axis=1)[:, k]

    def count_within(self, radius: np.ndarray) -> np.ndarray:
        return np.sum(self._distance < radius[:, None], axis=1) - 1

    def nearest(self, k: int) -> np.ndarray:
        return np.argsort(self._distance, axis=1, kind="stable")[:, :k]


def _floor(eps: np.ndarray) -> np.ndarray:
    return np.maximum(eps, np.finfo(float).tiny)


def knn_counts(
    x_rows: np.ndarray,
    y_rows: np.ndarray,
    z_rows: np.ndarray | None,
    k: int,
    counter: type[NeighborCounter] = NeighborCounter,
) -> tuple[np.ndarray, ...]:
    """
    Neighbour counts entering the estimators, on already prepared blocks.

    Without conditioning, returns `(n_x, n_y)`; with conditioning, returns `(n_xz, n_yz, n_z)`.
    Distances are floored at the smallest positive float, so exact duplicates count as neighbours
    for both counters.
    """
    if z_rows is None:
        eps = _floor(counter(np.hstack((x_rows, y_rows))).kth_distance(k))
        return counter(x_rows).count_within(eps), counter(y_rows).count_within(eps)

    eps = _floor(counter(np.hstack((x_rows, y_rows, z_rows))).kth_distance(k))
    return (
        counter(np.hstack((x_rows, z_rows))).count_within(eps),
        counter(np.hstack((y_rows, z_rows))).count_within(eps),
        counter(z_rows).count_within(eps),
    )


def knn_mi(x_rows, y_rows, params: KnnParams | None = None) -> float:
    """
    Nearest-neighbour estimate of I(X;Y) in nats under the max norm,
    `psi(k) + psi(n) - <psi(n_x + 1) + psi(n_y + 1)>`.

    The estimate is not clipped and can be slightly negative.

    :raise InsufficientSamplesError: if there are not more samples than neighbours
    :raise InvalidDataError: if the input contains non-finite values
    """
    if params is None:
        params = KnnParams()

    x = _as_matrix(x_rows, "x_rows")
    y = _as_matrix(y_rows, "y_rows")
    if len(x) != len(y):
        raise InvalidDataError("x_rows and y_rows must have the same number of rows.")
    n = len(x)
    _check(n, params.k)

    n_x, n_y = knn_counts(_prepare(x, params), _prepare(y, params), None, params.k)
    return float(
        digamma(params.k) + digamma(n) - np.mean(digamma(n_x + 1) + digamma(n_y + 1))
    )


def knn_cmi(x_rows, y_rows, z_rows, params: KnnParams | None = None) -> float:
    """
    Nearest-neighbour estimate of I(X;Y|Z) in nats under the max norm,
    `psi(k) - <psi(n_xz + 1) + psi(n_yz + 1) - psi(n_z + 1)>`.
    """
    if params is None:
        params = KnnParams()

    x = _as_matrix(x_rows, "x_rows")
    y = _as_matrix(y_rows, "y_rows")
    z = _as_matrix(z_rows, "z_rows")
    if not len(x) == len(y) == len(z):
        raise InvalidDataError("All blocks must have the same number of rows.")
    _check(len(x), params.k)

    n_xz, n_yz, n_z = knn_counts(
        _prepare(x, params), _prepare(y, params), _prepare(z, params), params.k
    )
    return float(
        digamma(params.k)
        - np.mean(digamma(n_xz + 1) + digamma(n_yz + 1) - digamma(n_z + 1))
    )


def estimate(x_rows, y_rows, z_rows=None, params: KnnParams | None = None) -> float:
    if z_rows is None:
        return knn_mi(x_rows, y_rows, params)
    return knn_cmi(x_rows, y_rows, z_rows, params)


def local_permutation(
    z_rows: np.ndarray, neighbors: int, rng: np.random.Generator
) -> np.ndarray:
    """
    A permutation of row indices where each row draws its replacement among the
    `neighbors` nearest rows in the conditioning space, preferring rows not used yet.
    """
    n = len(z_rows)
    neighbors = min(neighbors, n)
    candidates = NeighborCounter(_prepare(z_rows, KnnParams(), jitter=False)).nearest(
        neighbors
    )

    order = rng.permutation(n)
    used = np.zeros(n, dtype=bool)
    result = np.empty(n, dtype=np.int64)
    for i in order:
        pool = candidates[i][rng.permutation(neighbors)]
        free = pool[~used[pool]]
        pick = free[0] if len(free) else pool[0]
        used[pick] = True
        result[i] = pick
    return result


def _replicate(
    x, y, z, knn: KnnParams, perm: PermutationParams, b: int, stream: tuple = ()
) -> float:
    rng = derive_rng(knn.seed, "permutation", *stream, b)
    if z is None:
        index = rng.permutation(len(x))
    else:
        index = local_permutation(z, perm.local_neighbors, rng)
    return estimate(x[index], y, z, knn)


def permutation_null(
    x_rows,
    y_rows,
    z_rows=None,
    knn: KnnParams | None = None,
    perm: PermutationParams | None = None,
    *,
    stream: tuple = (),
    n_jobs: int | None = None,
) -> np.ndarray:
    """
    The estimates of all permutation replicates, in replicate order.

    :param stream: extra keys of the replicate generators, so that separate sample sets draw separate permutations
    :raise InvalidConfigError: if the number of permutations is below 1
    """
    if knn is None:
        knn = KnnParams()
    if perm is None:
        perm = PermutationParams()
    if perm.n_permutations < 1:
        raise InvalidConfigError("At least one permutation is required.")

    x = _as_matrix(x_rows, "x_rows")
    y = _as_matrix(y_rows, "y_rows")
    z = None if z_rows is None else _as_matrix(z_rows, "z_rows")

    return np.asarray(
        Parallel(n_jobs=config.n_jobs if n_jobs is None else n_jobs)(
            delayed(_replicate)(x, y, z, knn, perm, b, tuple(stream))
            for b in range(perm.n_permutations)
        ),
        dtype=float,
    )


def null_p_value(statistic: float, null: np.ndarray) -> float:
    return float((1 + np.count_nonzero(null >= statistic)) / (1 + len(null)))


def permutation_test(
    x_rows,
    y_rows,
    z_rows=None,
    knn: KnnParams | None = None,
    perm: PermutationParams | None = None,
    *,
    statistic: float | None = None,
    n_jobs: int | None = None,
) -> tuple[float, float]:
    """
    Significance of the (conditional) mutual information by permuting `x_rows`.

    Without conditioning the rows are shuffled freely. With conditioning each row is exchanged
    only within its neighbourhood in the conditioning space, preserving the dependence of X on Z.
    Replicate `b` draws from a generator derived from `(knn.seed, b)`, so the result does not
    depend on the number of workers.

    :param statistic: the observed estimate, when already known
    :return: the observed statistic and `(1 + #{stat_b >= statistic}) / (1 + B)`
    :raise InvalidConfigError: if the number of permutations is below 1
    """
    if knn is None:
        knn = KnnParams()
    if perm is None:
        perm = PermutationParams()

    null = permutation_null(x_rows, y_rows, z_rows, knn, perm, n_jobs=n_jobs)

    if statistic is None:
        statistic = estimate(
            _as_matrix(x_rows, "x_rows"),
            _as_matrix(y_rows, "y_rows"),
            None if z_rows is None else _as_matrix(z_rows, "z_rows"),
            knn,
        )

    p_value = null_p_value(statistic, null)
    logger.debug("statistic=%.5f p=%.4f (B=%d)", statistic, p_value, perm.n_permutations)
    return float(statistic), p_value
