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
import json

import pytest

from pctmi.cli import _discovery_config, build_parser, main, read_config_file
from pctmi.errors import InvalidConfigError
from pctmi.graph import SummaryGraph, load_result


def test_config_file_is_overridden_by_flags(tmpdir):
    with tmpdir.as_cwd():
        with open("run.cfg", "w") as file:
            file.write("# search space\nmax-window = 3\nalpha=0.01\nknn_k = 7\n\n")

        assert read_config_file("run.cfg") == {"max_window": 3, "alpha": 0.01, "knn_k": 7}

        args = build_parser().parse_args(
            ["discover", "data.csv", "--config", "run.cfg", "--alpha", "0.1"]
        )
        cfg = _discovery_config(args)

    assert cfg.lambda_max == 3
    assert cfg.alpha == 0.1
    assert cfg.perm.alpha == 0.1
    assert cfg.knn.k == 7


def test_unknown_config_key(tmpdir):
    with tmpdir.as_cwd():
        with open("run.cfg", "w") as file:
            file.write("window = 3\n")
        args = build_parser().parse_args(["discover", "data.csv", "--config", "run.cfg"])
        with pytest.raises(InvalidConfigError):
            _discovery_config(args)


def test_malformed_config_file(tmpdir):
    with tmpdir.as_cwd():
        with open("bad.cfg", "w") as file:
            file.write("alpha\n")
        with pytest.raises(InvalidConfigError):
            read_config_file("bad.cfg")


def test_generate_and_evaluate(tmpdir):
    with tmpdir.as_cwd():
        command = ["generate", "fork", "-o", "fork.csv", "--truth", "truth.json", "--length", "50"]
        assert main(command) == 0
        assert main(["evaluate", "truth.json", "truth.json", "-o", "report.json"]) == 0

        with open("report.json") as file:
            report = json.load(file)
        with open("fork.csv") as file:
            header = file.readline().strip()

    assert header == "time,1,2,3"
    assert report["f1_adjacency"] == 1.0
    assert report["f1_oriented"] == 1.0


def test_project(tmpdir):
    with tmpdir.as_cwd():
        with open("full.json", "w") as file:
            json.dump([["a", -1, "b", 0], ["b", -1, "b", 0]], file)
        assert main(["project", "full.json", "-o", "summary.json"]) == 0

        with open("summary.json") as file:
            graph = SummaryGraph.from_json(file.read())

    assert graph.directed_edges() == {("a", "b")}
    assert graph.self_loops == {"b"}


def test_project_reports_bad_offsets(tmpdir, capsys):
    with tmpdir.as_cwd():
        with open("full.json", "w") as file:
            json.dump([["a", "late", "b", 0]], file)
        assert main(["project", "full.json"]) == 1

        with open("scalar.json", "w") as file:
            json.dump(3, file)
        assert main(["project", "scalar.json"]) == 1

    assert "is not an integer" in capsys.readouterr().err


def test_errors_are_reported(tmpdir, capsys):
    with tmpdir.as_cwd():
        assert main(["evaluate", "missing.json", "missing.json"]) == 1
        assert main(["discover", "missing.csv", "--alpha", "2"]) == 1

    assert "pctmi: error:" in capsys.readouterr().err


def test_unknown_structure_is_rejected():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["generate", "ring", "-o", "x.csv"])


@pytest.mark.slow
def test_discover(tmpdir):
    flags = ["--max-window", "1", "--max-lag", "1", "--permutations", "10", "--knn-k", "5"]
    with tmpdir.as_cwd():
        assert main(["generate", "v_structure", "-o", "data.csv", "--length", "300"]) == 0
        assert main(["discover", "data.csv", "-o", "graph.json", *flags]) == 0
        assert main(["discover", "data.csv", "-o", "graph.dot", "--format", "dot", *flags]) == 0
        assert main(["discover", "data.csv", "-o", "graph.msg", "--format", "msgpack", *flags]) == 0

        with open("graph.json") as file:
            graph = SummaryGraph.from_json(file.read())
        with open("graph.dot") as file:
            assert file.read().startswith("digraph")
        archived, _, extra = load_result("graph.msg")

    assert archived == graph
    assert extra["counter"]["ci_tests_performed"] <= extra["counter"]["bound"]
