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

import os

from .config import DiscoveryConfig, KnnParams, PermutationParams, config, configure
from .ctmi import CondCtmiResult, CtmiResult, cond_ctmi, ctmi, evaluate_config
from .datagen import (
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
from .discovery import (
    DiscoveryReport,
    TestBudgetCounter,
    apply_er_rules,
    apply_pc_rules,
    build_skeleton,
    collider_test,
    discover,
)
from .errors import PctmiError
from .estimator import knn_cmi, knn_mi, permutation_test
from .evaluation import evaluate, f1_adjacency, f1_oriented, project_full_graph, run_benchmark
from .graph import SepsetTable, SummaryGraph, load_result, save_result
from .series import Dataset, TimeSeries, read_csv, write_csv


def discover_csv(
    path: str | os.PathLike, cfg: DiscoveryConfig | None = None, **kwargs
) -> SummaryGraph:
    """
    Read a CSV file and return its summary causal graph.

    :param path: the CSV file, in wide or long layout
    :param cfg: the discovery configuration, defaults are taken from `config`
    :param kwargs: passed to `read_csv`
    :return: the summary graph, self-loops included
    """
    return discover(read_csv(path, **kwargs), cfg)[0]


__all__ = [
    "CondCtmiResult",
    "CtmiResult",
    "Dataset",
    "DiscoveryConfig",
    "DiscoveryReport",
    "GenerativeParams",
    "KnnParams",
    "PctmiError",
    "PermutationParams",
    "STRUCTURES",
    "SepsetTable",
    "StructureSpec",
    "SummaryGraph",
    "TestBudgetCounter",
    "TimeSeries",
    "apply_er_rules",
    "apply_pc_rules",
    "build_skeleton",
    "collider_test",
    "cond_ctmi",
    "config",
    "configure",
    "ctmi",
    "discover",
    "discover_csv",
    "dsep_oracle",
    "evaluate",
    "evaluate_config",
    "f1_adjacency",
    "f1_oriented",
    "generate",
    "generate_common_cause",
    "generate_example1",
    "knn_cmi",
    "knn_mi",
    "load_result",
    "permutation_test",
    "project_full_graph",
    "read_csv",
    "run_benchmark",
    "save_result",
    "structure",
    "subsample",
    "write_csv",
]
