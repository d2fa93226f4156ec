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
import numpy as np
import pytest
from generate import gaussian_chain, gaussian_mi, gaussian_pair

from pctmi.config import KnnParams, PermutationParams
from pctmi.errors import InsufficientSamplesError, InvalidConfigError, InvalidDataError
from pctmi.estimator import (
    BruteForceCounter,
    knn_cmi,
    knn_counts,
    knn_mi,
    local_permutation,
    null_p_value,
    permutation_null,
    permutation_test,
)


@pytest.mark.parametrize("seed", range(50))
def test_tree_counts_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 500))
    x = rng.standard_normal((n, int(rng.integers(1, 3))))
    y = rng.standard_normal((n, int(rng.integers(1, 3))))
    z = rng.standard_normal((n, int(rng.integers(1, 4))))
    k = int(rng.integers(1, 11))

    for block in (None, z):
        fast = knn_counts(x, y, block, k)
        slow = knn_counts(x, y, block, k, BruteForceCounter)
        for a, b in zip(fast, slow):
            assert np.array_equal(a, b)


@pytest.mark.parametrize("k", [1, 5, 19, 25])
def test_counts_match_brute_force_on_ties(k):
    x = np.repeat(np.arange(10.0), 20).reshape(-1, 1)
    y = np.tile(np.arange(4.0), 50).reshape(-1, 1)
    z = np.repeat(np.arange(5.0), 40).reshape(-1, 1)

    for block in (None, z):
        fast = knn_counts(x, y, block, k)
        slow = knn_counts(x, y, block, k, BruteForceCounter)
        for a, b in zip(fast, slow):
            assert np.array_equal(a, b)
            assert np.all(a >= 0)


def test_mi_is_symmetric():
    x, y = gaussian_pair(500, 0.6)
    assert knn_mi(x, y) == pytest.approx(knn_mi(y, x), abs=1e-12)


def test_mi_of_independent_series_is_small():
    x, y = gaussian_pair(2000, 0.0)
    assert abs(knn_mi(x, y)) < 0.05


def test_mi_is_deterministic():
    x, y = gaussian_pair(300, 0.5)
    params = KnnParams(k=5, seed=3)
    assert knn_mi(x, y, params) == knn_mi(x, y, params)


def test_rank_transform_is_invariant_to_monotone_maps():
    x, y = gaussian_pair(1000, 0.5)
    params = KnnParams(transform="rank")
    assert knn_mi(x**3, y, params) == pytest.approx(knn_mi(x, y, params), abs=1e-12)


@pytest.mark.slow
def test_standardized_mi_is_robust_to_monotone_maps():
    x, y = gaussian_pair(5000, 0.5)
    assert knn_mi(x**3, y) == pytest.approx(knn_mi(x, y), abs=0.1)
    assert knn_mi(x**3, y) > 0.05


@pytest.mark.slow
@pytest.mark.parametrize("rho,tolerance", [(0.0, 0.02), (0.5, 0.02), (0.9, 0.05)])
def test_mi_matches_gaussian_value(rho, tolerance):
    estimates = [knn_mi(*gaussian_pair(5000, rho, seed)) for seed in range(5)]
    assert np.mean(estimates) == pytest.approx(gaussian_mi(rho), abs=tolerance)


def test_cmi_vanishes_on_chain():
    x, y, z = gaussian_chain(3000)
    assert abs(knn_cmi(x, y, z)) <= 0.03
    assert knn_mi(x, y) > 0.3


def test_estimator_input_errors():
    x = np.arange(5.0)
    with pytest.raises(InsufficientSamplesError):
        knn_mi(x, x, KnnParams(k=5))
    with pytest.raises(InvalidDataError):
        knn_mi(x, np.arange(6.0))
    with pytest.raises(InvalidDataError):
        knn_mi([1.0, np.nan, 2.0], [1.0, 2.0, 3.0], KnnParams(k=1))
    with pytest.raises(InvalidConfigError):
        KnnParams(k=0)
    with pytest.raises(InvalidConfigError):
        PermutationParams(n_permutations=0)


def test_local_permutation_stays_in_neighbourhood():
    rng = np.random.default_rng(0)
    z = np.concatenate((rng.normal(0, 1, 50), rng.normal(100, 1, 50))).reshape(-1, 1)

    index = local_permutation(z, 5, np.random.default_rng(1))

    assert len(index) == 100
    assert np.all((index < 50) == (np.arange(100) < 50))


def test_permutation_test_detects_dependence():
    x, y = gaussian_pair(300, 0.9)
    perm = PermutationParams(n_permutations=20)

    statistic, p_value = permutation_test(x, y, perm=perm)

    assert statistic > 0.5
    assert p_value == pytest.approx(1 / 21)


def test_permutation_test_p_value_range():
    x, y = gaussian_pair(200, 0.0, seed=4)
    _, p_value = permutation_test(x, y, perm=PermutationParams(n_permutations=19))
    assert 1 / 20 <= p_value <= 1


def test_permutation_test_does_not_depend_on_workers():
    x, y, z = gaussian_chain(200)
    perm = PermutationParams(n_permutations=10)
    assert permutation_test(x, y, z, perm=perm, n_jobs=1) == permutation_test(
        x, y, z, perm=perm, n_jobs=2
    )


def test_conditional_permutation_test_detects_dependence():
    x, y, z = gaussian_chain(300)
    _, p_value = permutation_test(
        x, z, y, perm=PermutationParams(n_permutations=20)
    )
    assert p_value <= 0.05


@pytest.mark.slow
def test_permutation_test_is_calibrated():
    rejected = 0
    runs = 200
    for seed in range(runs):
        x, y = gaussian_pair(200, 0.0, seed)
        _, p_value = permutation_test(
            x, y, knn=KnnParams(seed=seed), perm=PermutationParams(n_permutations=99)
        )
        rejected += p_value <= 0.05
    assert 0.02 <= rejected / runs <= 0.08


@pytest.mark.slow
def test_estimates_converge_with_sample_size():
    def error(n: int) -> float:
        return float(
            np.mean(
                [abs(knn_mi(*gaussian_pair(n, 0.5, seed)) - gaussian_mi(0.5)) for seed in range(20)]
            )
        )

    assert error(10000) <= error(500)


def test_null_replicates_follow_the_stream():
    x, y = gaussian_pair(150, 0.3)
    perm = PermutationParams(n_permutations=8)

    null = permutation_null(x, y, perm=perm)
    statistic, p_value = permutation_test(x, y, perm=perm)

    assert null.shape == (8,)
    assert p_value == null_p_value(statistic, null)
    assert np.array_equal(permutation_null(x, y, perm=perm, n_jobs=2), null)
    assert not np.array_equal(permutation_null(x, y, perm=perm, stream=(1, 1, 0)), null)
