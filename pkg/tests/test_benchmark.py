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
import pytest
from generate import gaussian_chain, gaussian_pair, placeholder_dataset

from pctmi.datagen import dsep_oracle, structure
from pctmi.discovery import discover
from pctmi.estimator import BruteForceCounter, knn_cmi, knn_counts, knn_mi


def test_knn_mi_speed(benchmark):
    x, y = gaussian_pair(2000, 0.5)
    value = benchmark(knn_mi, x, y)
    assert value > 0


def test_knn_cmi_speed(benchmark):
    x, y, z = gaussian_chain(2000)
    benchmark(knn_cmi, x, y, z)


@pytest.mark.parametrize("n", [100, 400])
def test_brute_force_counts_speed(benchmark, n):
    x, y = gaussian_pair(n, 0.5)
    benchmark(knn_counts, x.reshape(-1, 1), y.reshape(-1, 1), None, 5, BruteForceCounter)


def test_oracle_discovery_speed(benchmark):
    spec = structure("diamond")
    data = placeholder_dataset(*spec.nodes)
    oracle = dsep_oracle(spec.truth())

    graph, *_ = benchmark(discover, data, oracle=oracle, lag_table=spec.lag_table())
    assert graph == spec.truth()
