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
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .config import DiscoveryConfig
from .datagen import GenerativeParams, generate, structure, subsample
from .discovery import discover
from .errors import InvalidDataError, NodeSetMismatchError, PctmiError
from .graph import SummaryGraph

logger = logging.getLogger(__name__)


def _scores(predicted: set, truth: set) -> tuple[float, float, float]:
    hits = len(predicted & truth)
    precision = hits / len(predicted) if predicted else 0.0
    recall = hits / len(truth) if truth else 0.0
    if precision + recall == 0:
        return precision, recall, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def _check_nodes(pred: SummaryGraph, truth: SummaryGraph):
    if set(pred.nodes) != set(truth.nodes):
        raise NodeSetMismatchError(
            f"Predicted nodes {sorted(pred.nodes)} differ from true nodes {sorted(truth.nodes)}."
        )


def adjacencies(graph: SummaryGraph) -> set[frozenset[str]]:
    return {e.pair for e in graph.edges}


def orientations(graph: SummaryGraph) -> set[tuple[str, str]]:
    """
    Ordered pairs claimed by the graph, an undirected edge claiming both directions.
    """
    claimed: set[tuple[str, str]] = set()
    for e in graph.edges:
        claimed.add((e.src, e.dst))
        if not e.directed:
            claimed.add((e.dst, e.src))
    return claimed


def f1_adjacency(pred: SummaryGraph, truth: SummaryGraph) -> float:
    _check_nodes(pred, truth)
    return _scores(adjacencies(pred), adjacencies(truth))[2]


def f1_oriented(pred: SummaryGraph, truth: SummaryGraph) -> float:
    _check_nodes(pred, truth)
    return _scores(orientations(pred), orientations(truth))[2]


@dataclass
class EvalReport:
    f1_adjacency: float
    precision_adjacency: float
    recall_adjacency: float
    f1_oriented: float
    precision_oriented: float
    recall_oriented: float
    ci_test_count: int | None = None
    details: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.details, columns=["pair", "predicted", "truth", "status"])


def _mark(graph: SummaryGraph, a: str, b: str) -> str:
    if not graph.adjacent(a, b):
        return "none"
    if graph.is_directed(a, b):
        return f"{a}->{b}"
    if graph.is_directed(b, a):
        return f"{b}->{a}"
    return f"{a}-{b}"


def evaluate(
    pred: SummaryGraph, truth: SummaryGraph, ci_tests: int | None = None
) -> EvalReport:
    """
    Score a predicted summary graph against the ground truth, self-loops excluded.

    An undirected predicted edge counts as a prediction of both directions in the oriented scores.
    """
    _check_nodes(pred, truth)
    pa, ra, fa = _scores(adjacencies(pred), adjacencies(truth))
    po, ro, fo = _scores(orientations(pred), orientations(truth))

    details: list[dict] = []
    for pair in sorted(sorted(p) for p in adjacencies(pred) | adjacencies(truth)):
        a, b = pair
        predicted, expected = _mark(pred, a, b), _mark(truth, a, b)
        if predicted == expected:
            status = "correct"
        elif predicted == "none":
            status = "missing"
        elif expected == "none":
            status = "extra"
        elif predicted == f"{a}-{b}":
            status = "unoriented"
        else:
            status = "reversed"
        details.append(
            {"pair": f"{a}-{b}", "predicted": predicted, "truth": expected, "status": status}
        )

    return EvalReport(fa, pa, ra, fo, po, ro, ci_tests, details)


def _check_offset(offset):
    try:
        integral = not isinstance(offset, bool) and float(offset).is_integer()
    except (TypeError, ValueError):
        integral = False
    if not integral:
        raise InvalidDataError(f"Offset {offset} is not an integer.")


def project_full_graph(
    full: Iterable[Sequence], nodes: Sequence[str] | None = None
) -> SummaryGraph:
    """
    Collapse lagged edges `(p, offset_p, q, offset_q)` of a full temporal graph into a summary graph.

    A cross edge becomes `p -> q`, an edge within one series becomes a self-loop of that series.
    Edges found in both directions between two series are kept as one undirected edge.

    :param nodes: node names, defaults to the series appearing in `full`
    :raise InvalidDataError: if an offset is not an integer
    """
    lagged: list[tuple[str, str]] = []
    for record in full:
        try:
            if isinstance(record, dict):
                record = (
                    record["src"],
                    record.get("src_offset", -1),
                    record["dst"],
                    record.get("dst_offset", 0),
                )
            p, offset_p, q, offset_q = record
        except (KeyError, TypeError, ValueError):
            raise InvalidDataError(f"Malformed lagged edge {record}.") from None
        _check_offset(offset_p)
        _check_offset(offset_q)
        lagged.append((str(p), str(q)))

    if nodes is None:
        nodes = sorted({n for pair in lagged for n in pair})
    graph = SummaryGraph(nodes, self_loops=False)

    directed = {(p, q) for p, q in lagged if p != q}
    for p, q in sorted(directed):
        if graph.adjacent(p, q):
            continue
        if (q, p) in directed:
            logger.warning("Series %s and %s cause each other, kept undirected.", p, q)
            graph.add_edge(p, q)
        else:
            graph.add_directed(p, q)

    for p, q in lagged:
        if p == q:
            graph.set_self_loop(p)

    return graph


def lagged_edges(graph: SummaryGraph) -> list[tuple[str, int, str, int]]:
    """
    Encode a summary graph as lag-one edges, the inverse of `project_full_graph` up to lags.
    """
    edges: list[tuple[str, int, str, int]] = []
    for e in graph.edges:
        edges.append((e.src, -1, e.dst, 0))
        if not e.directed:
            edges.append((e.dst, -1, e.src, 0))
    edges.extend((n, -1, n, 0) for n in sorted(graph.self_loops))
    return edges


@dataclass
class BenchmarkReport:
    structure: str
    n_seeds: int
    f1_mean: float
    f1_sd: float
    f1_oriented_mean: float
    f1_oriented_sd: float
    ci_tests_mean: float
    runs: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def summary(self) -> dict:
        return {k: v for k, v in self.to_dict().items() if k != "runs"}

    def to_table(self) -> str:
        frame = pd.DataFrame(self.runs)
        header = (
            f"{self.structure}: F1 {self.f1_mean:.3f} +/- {self.f1_sd:.3f}, "
            f"oriented F1 {self.f1_oriented_mean:.3f} +/- {self.f1_oriented_sd:.3f}, "
            f"tests {self.ci_tests_mean:.1f}"
        )
        return header + "\n" + frame.to_string(index=False)


def _run_seed(
    name: str,
    seed: int,
    cfg: DiscoveryConfig,
    rates: Sequence[int] | None,
    T: int,
    gamma: int,
) -> dict:
    try:
        data, truth = generate(structure(name, gamma), GenerativeParams(T=T, seed=seed))
        if rates is not None:
            data = subsample(data, rates)
        graph, _, counter, _ = discover(data, replace(cfg, seed=seed))
        report = evaluate(graph, truth, counter.ci_tests_performed)
    except PctmiError as err:
        logger.warning("Seed %d of %s failed: %s", seed, name, err)
        return {"seed": seed, "error": str(err)}

    return {
        "seed": seed,
        "f1": report.f1_adjacency,
        "f1_oriented": report.f1_oriented,
        "ci_tests": counter.ci_tests_performed,
        "bound": counter.bound,
    }


def _mean_sd(values: list[float]) -> tuple[float, float]:
    if not values:
        return float("nan"), float("nan")
    sd = float(np.std(values, ddof=1)) if len(values) > 1 else 0.0
    return float(np.mean(values)), sd


def run_benchmark(
    name: str,
    n_seeds: int,
    cfg: DiscoveryConfig | None = None,
    rates: Sequence[int] | None = None,
    *,
    T: int = 1000,
    gamma: int = 1,
    first_seed: int = 0,
    n_jobs: int = 1,
) -> BenchmarkReport:
    """
    Generate `n_seeds` datasets of a named structure, run discovery on each and aggregate the scores.

    A failing seed is recorded with its error and left out of the aggregates.

    :param rates: decimation factors applied to the generated series
    """
    if n_seeds < 1:
        raise InvalidDataError("At least one seed is required.")
    if cfg is None:
        cfg = DiscoveryConfig()

    seeds = range(first_seed, first_seed + n_seeds)
    runs = Parallel(n_jobs=n_jobs)(
        delayed(_run_seed)(name, s, cfg, rates, T, gamma) for s in seeds
    )
    runs = sorted(runs, key=lambda r: r["seed"])
    done = [r for r in runs if "error" not in r]

    f1_mean, f1_sd = _mean_sd([r["f1"] for r in done])
    oriented_mean, oriented_sd = _mean_sd([r["f1_oriented"] for r in done])
    tests_mean, _ = _mean_sd([r["ci_tests"] for r in done])

    return BenchmarkReport(
        name, n_seeds, f1_mean, f1_sd, oriented_mean, oriented_sd, tests_mean, runs
    )
