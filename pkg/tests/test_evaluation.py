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
import math

import pytest
from generate import build_graph, quick_config

from pctmi.datagen import structure
from pctmi.errors import InvalidDataError, NodeSetMismatchError
from pctmi.evaluation import (
    evaluate,
    f1_adjacency,
    f1_oriented,
    lagged_edges,
    project_full_graph,
    run_benchmark,
)


@pytest.fixture(scope="function")
def fork():
    return structure("fork").truth()


def test_identical_graphs_score_one(fork):
    assert f1_adjacency(fork, fork) == 1.0
    assert f1_oriented(fork, fork) == 1.0


def test_empty_prediction_scores_zero(fork):
    assert f1_adjacency(build_graph("123"), fork) == 0.0
    assert f1_oriented(build_graph("123"), fork) == 0.0


def test_partial_adjacency(fork):
    assert f1_adjacency(build_graph("123", "12"), fork) == pytest.approx(2 / 3)


def test_undirected_edges_claim_both_directions(fork):
    report = evaluate(build_graph("123", "12 13"), fork)

    assert report.precision_oriented == 0.5
    assert report.recall_oriented == 1.0
    assert report.f1_oriented == pytest.approx(2 / 3)
    assert report.f1_adjacency == 1.0
    assert {d["status"] for d in report.details} == {"unoriented"}


def test_reversed_edge_scores_zero():
    truth = build_graph("12", directed="12")
    pred = build_graph("12", directed="21")
    assert f1_oriented(pred, truth) == 0.0
    assert f1_adjacency(pred, truth) == 1.0
    assert evaluate(pred, truth).details[0]["status"] == "reversed"


def test_self_loops_are_ignored(fork):
    pred = build_graph("123", directed="12 13", self_loops=False)
    assert f1_adjacency(pred, fork) == 1.0
    assert f1_oriented(pred, fork) == 1.0


def test_f1_is_harmonic_mean(fork):
    report = evaluate(build_graph("123", "23", "12"), fork, ci_tests=7)

    for kind in ("adjacency", "oriented"):
        precision = getattr(report, f"precision_{kind}")
        recall = getattr(report, f"recall_{kind}")
        assert getattr(report, f"f1_{kind}") == pytest.approx(
            2 * precision * recall / (precision + recall)
        )

    assert report.ci_test_count == 7
    statuses = {d["pair"]: d["status"] for d in report.details}
    assert statuses == {"1-2": "correct", "1-3": "missing", "2-3": "extra"}
    assert len(report.to_frame()) == 3


def test_node_mismatch(fork):
    with pytest.raises(NodeSetMismatchError):
        f1_adjacency(build_graph("12"), fork)
    with pytest.raises(NodeSetMismatchError):
        evaluate(build_graph("1234"), fork)


def test_projection():
    graph = project_full_graph([("1", -1, "2", 0)])
    assert graph.directed_edges() == {("1", "2")}
    assert graph.self_loops == set()

    loop = project_full_graph([("1", -1, "1", 0)])
    assert loop.nodes == ["1"]
    assert loop.self_loops == {"1"}
    assert not loop.edges

    empty = project_full_graph([])
    assert not empty.nodes


def test_projection_of_records():
    graph = project_full_graph(
        [
            {"src": "a", "src_offset": -2, "dst": "b", "dst_offset": 0},
            {"src": "b", "dst": "a"},
            {"src": "c", "dst": "c"},
        ],
        nodes=["a", "b", "c"],
    )
    assert graph.undirected_edges() == {frozenset("ab")}
    assert graph.self_loops == {"c"}

    with pytest.raises(InvalidDataError):
        project_full_graph([("a", -0.5, "b", 0)])


@pytest.mark.parametrize(
    "record",
    [
        ("a", "one", "b", 0),
        ("a", -1, "b", None),
        ("a", -1, "b"),
        {"src": "a", "dst": "b", "dst_offset": "x"},
        {"dst": "b"},
    ],
)
def test_projection_rejects_malformed_records(record):
    with pytest.raises(InvalidDataError):
        project_full_graph([record])


def test_projection_is_idempotent(fork):
    projected = project_full_graph(lagged_edges(fork), fork.nodes)
    assert projected == fork
    assert project_full_graph(lagged_edges(projected), fork.nodes) == projected


def test_benchmark_rejects_empty_sweep():
    with pytest.raises(InvalidDataError):
        run_benchmark("fork", 0)


@pytest.mark.slow
def test_benchmark_report():
    report = run_benchmark("fork", 2, quick_config(), T=400)

    assert report.n_seeds == 2
    assert [r["seed"] for r in report.runs] == [0, 1]
    assert all(r["ci_tests"] <= r["bound"] for r in report.runs)
    assert 0.0 <= report.f1_mean <= 1.0
    assert not math.isnan(report.f1_sd)
    assert "fork" in report.to_table()
    assert set(report.summary()) == {
        "structure",
        "n_seeds",
        "f1_mean",
        "f1_sd",
        "f1_oriented_mean",
        "f1_oriented_sd",
        "ci_tests_mean",
    }
