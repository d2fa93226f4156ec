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

from dataclasses import dataclass, field, fields, replace
from typing import Literal

from .errors import InvalidConfigError


@dataclass
class Config:
    min_samples: int = 50
    knn_k: int = 10
    jitter_scale: float = 1e-10
    n_permutations: int = 100
    perm_neighbors: int = 5
    alpha: float = 0.05
    lambda_max: int = 5
    gamma_max: int = 5
    tie_tolerance: float = 1e-12
    n_jobs: int = 1
    cond_sweeps: int = 2
    self_loops: bool = True


config = Config()


def configure(
    *,
    min_samples: int | None = None,
    knn_k: int | None = None,
    jitter_scale: float | None = None,
    n_permutations: int | None = None,
    perm_neighbors: int | None = None,
    alpha: float | None = None,
    lambda_max: int | None = None,
    gamma_max: int | None = None,
    tie_tolerance: float | None = None,
    n_jobs: int | None = None,
    cond_sweeps: int | None = None,
    self_loops: bool | None = None,
):
    """
    This function is used to configure the library-wide defaults. It accepts any number of keyword arguments.
    Values of the wrong type or outside of the valid range are silently ignored.

    The defaults are read when parameter objects (`KnnParams`, `PermutationParams`, `DiscoveryConfig`)
    are created, so objects created before the call are not affected.

    :param min_samples:
            The minimum number of joint rows a sample set must have to be estimated.
    :param knn_k:
            The number of nearest neighbours used by the estimators.
    :param jitter_scale:
            The magnitude of the tie-breaking noise, relative to the standard deviation of each column.
            Must be positive, the estimators assume continuous samples.
    :param n_permutations:
            The number of permutation replicates of the significance test.
    :param perm_neighbors:
            The size of the neighbourhood in the conditioning space used by the local permutation scheme.
    :param alpha:
            The significance level, 0 < alpha < 1.
    :param lambda_max:
            The largest window size searched.
    :param gamma_max:
            The largest absolute temporal gap (in time units) searched.
    :param tie_tolerance:
            Estimates closer than this are considered equal when selecting the best configuration.
    :param n_jobs:
            The number of parallel workers, follows the `joblib` convention (-1 for all cores).
    :param cond_sweeps:
            The number of coordinate-wise sweeps used when minimising over conditioning windows.
    :param self_loops:
            Flag to assert self-loops on every node of the discovered graph.
    """
    if isinstance(min_samples, int) and min_samples > 0:
        config.min_samples = min_samples

    if isinstance(knn_k, int) and knn_k > 0:
        config.knn_k = knn_k

    if isinstance(jitter_scale, (int, float)) and jitter_scale > 0:
        config.jitter_scale = float(jitter_scale)

    if isinstance(n_permutations, int) and n_permutations > 0:
        config.n_permutations = n_permutations

    if isinstance(perm_neighbors, int) and perm_neighbors > 0:
        config.perm_neighbors = perm_neighbors

    if isinstance(alpha, (int, float)) and 0 < alpha < 1:
        config.alpha = float(alpha)

    if isinstance(lambda_max, int) and lambda_max > 0:
        config.lambda_max = lambda_max

    if isinstance(gamma_max, int) and gamma_max >= 0:
        config.gamma_max = gamma_max

    if isinstance(tie_tolerance, (int, float)) and tie_tolerance >= 0:
        config.tie_tolerance = float(tie_tolerance)

    if isinstance(n_jobs, int) and n_jobs != 0:
        config.n_jobs = n_jobs

    if isinstance(cond_sweeps, int) and cond_sweeps > 0:
        config.cond_sweeps = cond_sweeps

    if isinstance(self_loops, bool):
        config.self_loops = self_loops


@dataclass(frozen=True)
class KnnParams:
    """
    Parameters of the nearest-neighbour estimators.

    The jitter added to column `c` has standard deviation `jitter_scale * std(c)`,
    its generator is seeded from `seed` and the content of the column.
    """

    k: int = field(default_factory=lambda: config.knn_k)
    jitter_scale: float = field(default_factory=lambda: config.jitter_scale)
    seed: int = 0
    transform: Literal["standardize", "rank"] = "standardize"

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise InvalidConfigError(f"k must be a positive integer, got {self.k}.")
        if not self.jitter_scale > 0:
            raise InvalidConfigError("jitter_scale must be positive.")
        if self.transform not in ("standardize", "rank"):
            raise InvalidConfigError(f"Unknown transform {self.transform}.")

    def reseed(self, seed: int) -> KnnParams:
        return replace(self, seed=seed)


@dataclass(frozen=True)
class PermutationParams:
    n_permutations: int = field(default_factory=lambda: config.n_permutations)
    local_neighbors: int = field(default_factory=lambda: config.perm_neighbors)
    alpha: float = field(default_factory=lambda: config.alpha)

    def __post_init__(self):
        if not isinstance(self.n_permutations, int) or self.n_permutations < 1:
            raise InvalidConfigError(
                f"n_permutations must be at least 1, got {self.n_permutations}."
            )
        if not isinstance(self.local_neighbors, int) or self.local_neighbors < 1:
            raise InvalidConfigError("local_neighbors must be a positive integer.")
        if not 0 < self.alpha < 1:
            raise InvalidConfigError(f"alpha must lie in (0, 1), got {self.alpha}.")


@dataclass(frozen=True)
class DiscoveryConfig:
    lambda_max: int = field(default_factory=lambda: config.lambda_max)
    gamma_max: int = field(default_factory=lambda: config.gamma_max)
    alpha: float = field(default_factory=lambda: config.alpha)
    knn: KnnParams = field(default_factory=KnnParams)
    perm: PermutationParams = field(default_factory=PermutationParams)
    seed: int = 0
    min_samples: int = field(default_factory=lambda: config.min_samples)
    n_jobs: int = field(default_factory=lambda: config.n_jobs)
    self_loops: bool = field(default_factory=lambda: config.self_loops)

    def __post_init__(self):
        if self.lambda_max < 1 or self.gamma_max < 1:
            raise InvalidConfigError("Window and lag bounds must be at least 1.")
        if not 0 < self.alpha < 1:
            raise InvalidConfigError(f"alpha must lie in (0, 1), got {self.alpha}.")
        if self.min_samples < 1:
            raise InvalidConfigError("min_samples must be positive.")
        if self.perm.alpha != self.alpha:
            object.__setattr__(self, "perm", replace(self.perm, alpha=self.alpha))

    @property
    def bounds(self) -> tuple[int, int]:
        return self.lambda_max, self.gamma_max

    @classmethod
    def from_mapping(cls, values: dict) -> DiscoveryConfig:
        """
        Build a configuration from a flat mapping, as read from a `key=value` file or command line flags.
        Unknown keys raise `InvalidConfigError`.

        Recognised keys are the fields of this class plus `knn_k`, `jitter_scale`, `transform`,
        `n_permutations` and `perm_neighbors`.
        """
        knn_keys = {"knn_k": "k", "jitter_scale": "jitter_scale", "transform": "transform"}
        perm_keys = {"n_permutations": "n_permutations", "perm_neighbors": "local_neighbors"}
        own_keys = {f.name for f in fields(cls)} - {"knn", "perm"}

        knn_args: dict = {}
        perm_args: dict = {}
        own_args: dict = {}
        for key, value in values.items():
            if key in knn_keys:
                knn_args[knn_keys[key]] = value
            elif key in perm_keys:
                perm_args[perm_keys[key]] = value
            elif key in own_keys:
                own_args[key] = value
            else:
                raise InvalidConfigError(f"Unknown configuration key {key}.")

        seed = own_args.get("seed", 0)
        return cls(
            knn=KnnParams(seed=seed, **knn_args),
            perm=PermutationParams(**perm_args),
            **own_args,
        )
