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
import logging
from fractions import Fraction

import numpy as np
import pytest

from pctmi.datagen import (
    STRUCTURES,
    GenerativeParams,
    StructureSpec,
    dsep_oracle,
    generate,
    generate_common_cause,
    generate_example1,
    structure,
    subsample,
)
from pctmi.errors import DegenerateSeriesError, GraphError, InvalidConfigError
from pctmi.estimator import knn_mi
from pctmi.graph import SummaryGraph


@pytest.mark.parametrize(
    "name,edges",
    [
        ("fork", {("1", "2"), ("1", "3")}),
        ("v_structure", {("1", "3"), ("2", "3")}),
        ("mediator", {("1", "2"), ("1", "3"), ("2", "3")}),
        ("diamond", {("1", "2"), ("1", "3"), ("2", "4"), ("3", "4")}),
    ],
)
def test_benchmark_structures(name, edges):
    data, truth = generate(structure(name), GenerativeParams(T=200))

    assert truth.directed_edges() == edges
    assert not truth.undirected_edges()
    assert truth.self_loops == set(truth.nodes)
    assert data.names == truth.nodes
    assert all(len(s) == 200 and s.rate == 1 for s in data)


def test_generation_is_deterministic():
    spec = structure("diamond")
    first, _ = generate(spec, GenerativeParams(T=100, seed=4))
    second, _ = generate(spec, GenerativeParams(T=100, seed=4))
    other, _ = generate(spec, GenerativeParams(T=100, seed=5))

    for a, b, c in zip(first, second, other):
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)


def test_truth_carries_lags():
    truth = structure("fork", gamma=3).truth()
    assert truth.edge("1", "2").gamma == 3


def test_invalid_structures():
    with pytest.raises(InvalidConfigError):
        structure("ring")
    with pytest.raises(InvalidConfigError):
        StructureSpec("cycle", ("a", "b"), (("a", "b"), ("b", "a")))
    with pytest.raises(InvalidConfigError):
        StructureSpec("loop", ("a",), (("a", "a"),))
    with pytest.raises(InvalidConfigError):
        GenerativeParams(nonlinearities=("exp",))
    with pytest.raises(InvalidConfigError):
        GenerativeParams(T=0)


def test_example1():
    data = generate_example1(T=500, seed=1)
    assert data.names == ["p", "q"]
    assert len(data["p"]) == 500
    assert np.all(np.isfinite(data["q"].values))

    with pytest.raises(InvalidConfigError):
        generate_example1(T=5)


def test_uncoupled_series_are_independent():
    spec = StructureSpec("isolated", ("a", "b"), ())
    data, truth = generate(spec, GenerativeParams(T=2000, coef_high=0.5))
    assert not truth.edges
    assert abs(knn_mi(data["a"].values, data["b"].values)) < 0.05


@pytest.mark.parametrize("kind,nodes", [("single", 3), ("double", 4)])
def test_common_cause(kind, nodes):
    data, truth = generate_common_cause(kind, T=300)
    assert data.d == nodes
    assert not truth.adjacent("p", "q")
    assert "p" in truth.children(truth.parents("q")[0])

    with pytest.raises(InvalidConfigError):
        generate_common_cause("triple")


def test_common_cause_couplings():
    data, _ = generate_common_cause("single", T=2000, seed=4, damping=0.0, noise_scale=0.0)
    p, q, r = data["p"].values, data["q"].values, data["r"].values

    assert np.allclose(p[1:], r[:-1])
    assert np.allclose(q[2:], r[:-2])

    with pytest.raises(InvalidConfigError):
        generate_common_cause("double", damping=1.0)
    with pytest.raises(InvalidConfigError):
        generate_common_cause("double", T=5)


def test_subsample_identity():
    data, _ = generate(structure("fork"), GenerativeParams(T=100))
    same = subsample(data, [1, 1, 1])
    assert [s.rate for s in same] == [1, 1, 1]
    assert same.time_unit == data.time_unit


def test_subsample_enlarges_time_unit(caplog):
    data, _ = generate(structure("fork"), GenerativeParams(T=101))

    with caplog.at_level(logging.WARNING, logger="pctmi"):
        decimated = subsample(data, {"2": 2})

    assert [s.rate for s in decimated] == [2, 1, 2]
    assert len(decimated["2"]) == 51
    assert decimated["2"].end_time == Fraction(50)
    assert decimated["1"].end_time == Fraction(50)
    assert "enlarged" in caplog.text


def test_subsample_errors():
    data, _ = generate(structure("fork"), GenerativeParams(T=15))
    with pytest.raises(DegenerateSeriesError):
        subsample(data, [1, 2, 1])
    with pytest.raises(InvalidConfigError):
        subsample(data, [1, 1])
    with pytest.raises(InvalidConfigError):
        subsample(data, [1, 0, 1])


def test_dsep_oracle():
    oracle = dsep_oracle(STRUCTURES["fork"].truth())
    assert not oracle("2", "3", ())
    assert oracle("2", "3", ("1",))

    collider = dsep_oracle(STRUCTURES["v_structure"].truth())
    assert collider("1", "2", ())
    assert not collider("1", "2", ("3",))

    graph = SummaryGraph(["a", "b"])
    graph.add_edge("a", "b")
    with pytest.raises(GraphError):
        dsep_oracle(graph)
