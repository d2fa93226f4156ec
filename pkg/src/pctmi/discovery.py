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
from dataclasses import asdict, dataclass, field
from itertools import combinations
from math import factorial
from typing import Callable, Iterator

import networkx as nx
from joblib import Parallel, delayed

from .config import DiscoveryConfig, KnnParams, PermutationParams
from .ctmi import CtmiResult, cond_ctmi, cond_p_value, ctmi
from .errors import (
    AlignmentError,
    GraphError,
    InfeasibleConditioningError,
    InsufficientSamplesError,
    InvalidDataError,
    InvalidWindowError,
    NoCompatibleConfigError,
)
from .estimator import permutation_test
from .graph import SepsetTable, SummaryGraph
from .series import Dataset, TimeSeries, build_joint_samples
from .utility import checksum

logger = logging.getLogger(__name__)

Oracle = Callable[[str, str, tuple[str, ...]], bool]
"""
`oracle(p, q, conditioning)` returns `True` when `p` and `q` are independent given `conditioning`.
"""

LagTable = dict[tuple[str, str], int]

_UNTESTABLE = (
    NoCompatibleConfigError,
    InsufficientSamplesError,
    AlignmentError,
    InvalidWindowError,
)


@dataclass
class TestBudgetCounter:
    """
    Number of significance tests run while building the skeleton, and the worst-case bound
    `d^2 (d-1)^(kappa-1) / (kappa-1)!` where `kappa` is the largest degree left by the unconditional level.
    """

    __test__ = False

    d: int
    ci_tests_performed: int = 0
    kappa: int = 1

    @property
    def bound(self) -> float:
        return (
            self.d**2 * (self.d - 1) ** (self.kappa - 1) / factorial(self.kappa - 1)
        )

    def record(self, count: int = 1):
        self.ci_tests_performed += count

    def check(self):
        if self.ci_tests_performed > self.bound:
            raise AssertionError(
                f"{self.ci_tests_performed} tests exceed the bound {self.bound} (d={self.d}, kappa={self.kappa})."
            )

    def to_dict(self) -> dict:
        return {**asdict(self), "bound": self.bound}


@dataclass
class DiscoveryReport:
    """
    Everything that happened during a run that is not visible in the graph itself.
    """

    untested: list[tuple[str, str]] = field(default_factory=list)
    removals: list[dict] = field(default_factory=list)
    orientations: list[dict] = field(default_factory=list)
    conflicts: list[dict] = field(default_factory=list)
    skipped_colliders: list[tuple[str, str, str]] = field(default_factory=list)
    collider_tests: int = 0
    ci_tests: int = 0
    kappa: int = 1

    def to_dict(self) -> dict:
        data = asdict(self)
        data["untested"] = [list(p) for p in self.untested]
        data["skipped_colliders"] = [list(t) for t in self.skipped_colliders]
        return data


class CtmiCache:
    """
    Unconditional CTMI results of every tested pair, kept after edge removal.
    """

    def __init__(self):
        self._results: dict[frozenset[str], CtmiResult] = {}

    def put(self, result: CtmiResult):
        self._results[frozenset((result.source, result.target))] = result

    def get(self, p: str, q: str) -> CtmiResult | None:
        """
        The result expressed from `p` to `q`.
        """
        result = self._results.get(frozenset((p, q)))
        return None if result is None else result.oriented(p)

    def gamma(self, p: str, q: str) -> int | None:
        result = self.get(p, q)
        return None if result is None else result.gamma_pq

    def __contains__(self, pair) -> bool:
        return frozenset(pair) in self._results

    def __len__(self):
        return len(self._results)

    def __iter__(self) -> Iterator[CtmiResult]:
        return iter(self._results.values())


def _pair_knn(cfg: DiscoveryConfig, *names: str) -> KnnParams:
    return cfg.knn.reseed(checksum(cfg.seed, *names))


def _lagged(p: str, q: str, lag_table: LagTable | None, independent: bool):
    """
    Stand-in CTMI for oracle runs, the gap is the generation lag between the pair when known.
    """
    lag_table = lag_table or {}
    if (p, q) in lag_table:
        gamma = lag_table[(p, q)]
    elif (q, p) in lag_table:
        gamma = -lag_table[(q, p)]
    else:
        gamma = 0
    return CtmiResult(
        0.0 if independent else 1.0,
        1,
        1,
        gamma,
        1.0 if independent else 0.0,
        0,
        p,
        q,
    )


def _unconditional(p: TimeSeries, q: TimeSeries, cfg: DiscoveryConfig):
    try:
        return ctmi(
            p,
            q,
            cfg.bounds,
            _pair_knn(cfg, p.name, q.name),
            cfg.perm,
            min_samples=cfg.min_samples,
            n_jobs=1,
        )
    except _UNTESTABLE as err:
        return err


def _conditional(data: Dataset, p: str, q: str, cond, base, cfg: DiscoveryConfig):
    try:
        return cond_ctmi(
            data[p],
            data[q],
            base,
            [data[r] for r in cond],
            cfg.bounds,
            _pair_knn(cfg, p, q, *cond),
            min_samples=cfg.min_samples,
            n_jobs=1,
        )
    except (InfeasibleConditioningError,) + _UNTESTABLE as err:
        return err


def _admissible(cache: CtmiCache, p: str, q: str, r: str) -> bool:
    gamma_rp = cache.gamma(r, p)
    gamma_rq = cache.gamma(r, q)
    return (gamma_rp is not None and gamma_rp >= 0) or (
        gamma_rq is not None and gamma_rq >= 0
    )


def _candidates(graph: SummaryGraph, cache: CtmiCache, level: int):
    """
    Distinct `(p, q, R)` with `p < q` adjacent, `R` a subset of size `level` of `Adj(q) - {p}` or `Adj(p) - {q}`.
    """
    found: set[tuple[str, str, tuple[str, ...]]] = set()
    for edge in graph.edges:
        p, q = sorted((edge.src, edge.dst))
        for a, b in ((p, q), (q, p)):
            pool = [n for n in graph.neighbors(b) if n != a]
            if len(pool) < level:
                continue
            for cond in combinations(pool, level):
                if all(_admissible(cache, p, q, r) for r in cond):
                    found.add((p, q, cond))
    return sorted(found)


def _still_valid(graph: SummaryGraph, p: str, q: str, cond: tuple[str, ...]) -> bool:
    if not graph.adjacent(p, q):
        return False
    members = set(cond)
    return members <= set(graph.neighbors(p)) - {q} or members <= set(
        graph.neighbors(q)
    ) - {p}


def build_skeleton(
    data: Dataset,
    cfg: DiscoveryConfig | None = None,
    *,
    oracle: Oracle | None = None,
    lag_table: LagTable | None = None,
    counter: TestBudgetCounter | None = None,
    report: DiscoveryReport | None = None,
) -> tuple[SummaryGraph, SepsetTable, CtmiCache]:
    """
    Build the undirected skeleton level by level, starting from the complete graph.

    Level 0 tests every pair with the unconditional CTMI. Level `n` collects, on a frozen copy of the
    adjacencies, every adjacent pair with every admissible conditioning set of size `n`, estimates the
    conditional CTMI of all of them, then tests them from the smallest value up. An entry is tested only
    if its pair is still adjacent and its set still lies in the neighbourhood of one endpoint; a
    p-value above `alpha` removes the edge and records the set as the separating set.

    A conditioner `r` is admissible for the pair `(p, q)` when it does not start after both,
    that is when `gamma_rp >= 0` or `gamma_rq >= 0`.

    :param oracle: replaces the statistical test, see `Oracle`
    :param lag_table: generation lags `(src, dst) -> gamma` used as gaps under an oracle
    :return: the skeleton, the separating sets and the unconditional CTMI of every tested pair
    """
    if cfg is None:
        cfg = DiscoveryConfig()
    if data.d < 2:
        raise InvalidDataError("At least two series are required.")
    if counter is None:
        counter = TestBudgetCounter(data.d)
    if report is None:
        report = DiscoveryReport()

    names = sorted(data.names)
    graph = SummaryGraph.complete(names, cfg.self_loops)
    sepsets = SepsetTable()
    cache = CtmiCache()

    logger.info("Level 0: %d pairs.", len(graph))
    pairs = [(e.src, e.dst) for e in graph.edges]
    if oracle is None:
        outcomes = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_unconditional)(data[p], data[q], cfg) for p, q in pairs
        )
    else:
        outcomes = [_lagged(p, q, lag_table, oracle(p, q, ())) for p, q in pairs]

    for (p, q), outcome in zip(pairs, outcomes):
        if isinstance(outcome, Exception):
            logger.warning("Pair %s-%s is untested: %s", p, q, outcome)
            report.untested.append((p, q))
            graph.remove_edge(p, q)
            continue

        counter.record()
        cache.put(outcome)
        if outcome.p_value > cfg.alpha:
            graph.remove_edge(p, q)
            sepsets.add(p, q, ())
            report.removals.append(
                {
                    "pair": [p, q],
                    "sepset": [],
                    "level": 0,
                    "value": outcome.value,
                    "p_value": outcome.p_value,
                }
            )
            logger.info(
                "Removed %s-%s | {} (ctmi=%.4f, p=%.3f)",
                p,
                q,
                outcome.value,
                outcome.p_value,
            )
        else:
            graph.annotate(
                p,
                q,
                gamma=outcome.gamma_pq,
                lambda_src=outcome.lambda_pq,
                lambda_dst=outcome.lambda_qp,
                ctmi=outcome.value,
                p_value=outcome.p_value,
            )

    counter.kappa = report.kappa = max(1, graph.max_degree())

    level: int = 1
    while graph.max_degree() >= level + 1:
        candidates = _candidates(graph, cache, level)
        logger.info("Level %d: %d candidate sets.", level, len(candidates))

        if oracle is None:
            results = Parallel(n_jobs=cfg.n_jobs)(
                delayed(_conditional)(data, p, q, cond, cache.get(p, q), cfg)
                for p, q, cond in candidates
            )
            ranked = []
            for (p, q, cond), result in zip(candidates, results):
                if isinstance(result, Exception):
                    logger.debug("Skipped %s-%s | %s: %s", p, q, cond, result)
                    continue
                ranked.append((result.value, p, q, cond, result))
        else:
            ranked = [
                (0.0 if oracle(p, q, cond) else 1.0, p, q, cond, None)
                for p, q, cond in candidates
            ]

        ranked.sort(key=lambda item: item[:4])

        for value, p, q, cond, result in ranked:
            if not _still_valid(graph, p, q, cond):
                continue

            if oracle is None:
                try:
                    p_value = cond_p_value(
                        data[p],
                        data[q],
                        cache.get(p, q),
                        [data[r] for r in cond],
                        result,
                        _pair_knn(cfg, p, q, *cond),
                        cfg.perm,
                        min_samples=cfg.min_samples,
                        n_jobs=cfg.n_jobs,
                    )
                except _UNTESTABLE as err:
                    logger.debug("Skipped %s-%s | %s: %s", p, q, cond, err)
                    continue
            else:
                p_value = 1.0 if value == 0.0 else 0.0

            counter.record()
            if p_value > cfg.alpha:
                graph.remove_edge(p, q)
                sepsets.add(p, q, cond)
                report.removals.append(
                    {
                        "pair": [p, q],
                        "sepset": list(cond),
                        "level": level,
                        "value": value,
                        "p_value": p_value,
                    }
                )
                logger.info(
                    "Removed %s-%s | %s (ctmi=%.4f, p=%.3f)",
                    p,
                    q,
                    cond,
                    value,
                    p_value,
                )

        level += 1

    report.ci_tests = counter.ci_tests_performed
    counter.check()
    return graph, sepsets, cache


def _orient(
    graph: SummaryGraph, src: str, dst: str, rule: str, report: DiscoveryReport | None
) -> bool:
    try:
        changed = graph.orient(src, dst)
    except GraphError as err:
        logger.warning("Conflict applying %s to %s->%s: %s", rule, src, dst, err)
        if report is not None:
            report.conflicts.append({"src": src, "dst": dst, "rule": rule})
        return False

    if changed:
        logger.info("Oriented %s->%s by %s.", src, dst, rule)
        if report is not None:
            report.orientations.append({"src": src, "dst": dst, "rule": rule})
    return changed


def apply_er_rules(
    graph: SummaryGraph, cache: CtmiCache, report: DiscoveryReport | None = None
) -> SummaryGraph:
    """
    Orient edges from the selected CTMI configurations.

    The gap rule orients `p -> q` whenever `gamma_pq > 0`. The window rule then orients `p -> q` for
    `gamma_pq = 0` and `lambda_pq < lambda_qp`, provided every common parent `r` already oriented into
    both endpoints satisfies `gamma_rp < lambda_pq` and `gamma_rq < lambda_pq`; it is repeated until no
    edge changes.
    """
    graph = graph.copy()

    for pair in sorted(sorted(p) for p in graph.undirected_edges()):
        p, q = pair
        result = cache.get(p, q)
        if result is None or result.gamma_pq == 0:
            continue
        if result.gamma_pq > 0:
            _orient(graph, p, q, "ER-gamma", report)
        else:
            _orient(graph, q, p, "ER-gamma", report)

    def _common_parents_fit(p: str, q: str, window: int) -> bool:
        for r in set(graph.parents(p)) & set(graph.parents(q)):
            gamma_rp = cache.gamma(r, p)
            gamma_rq = cache.gamma(r, q)
            if gamma_rp is None or gamma_rq is None:
                return False
            if not (gamma_rp < window and gamma_rq < window):
                return False
        return True

    changed = True
    while changed:
        changed = False
        for pair in sorted(sorted(p) for p in graph.undirected_edges()):
            for p, q in (pair, pair[::-1]):
                result = cache.get(p, q)
                if result is None or result.gamma_pq != 0:
                    continue
                if result.lambda_pq < result.lambda_qp and _common_parents_fit(
                    p, q, result.lambda_pq
                ):
                    changed |= _orient(graph, p, q, "ER-lambda", report)
                    break

    return graph


def _collider_p_value(
    p: TimeSeries,
    q: TimeSeries,
    r: TimeSeries,
    sepset: tuple[str, ...],
    data: Dataset,
    knn: KnnParams,
    perm: PermutationParams,
    min_samples: int | None,
) -> float | None:
    conditioners = [(r, 1, 0)] + [(data[s], 1, 0) for s in sepset]
    try:
        samples = build_joint_samples(
            p, q, 1, 1, 0, conditioners, include_past=False, min_samples=min_samples
        )
    except _UNTESTABLE as err:
        logger.warning(
            "Collider test on %s-%s-%s skipped: %s", p.name, r.name, q.name, err
        )
        return None

    _, p_value = permutation_test(
        samples.x_rows, samples.y_rows, samples.z_rows, knn, perm
    )
    return p_value


def collider_test(
    p: TimeSeries,
    q: TimeSeries,
    r: TimeSeries,
    sepsets: SepsetTable,
    data: Dataset,
    knn: KnnParams | None = None,
    perm: PermutationParams | None = None,
    *,
    min_samples: int | None = None,
) -> bool:
    """
    Decide whether `r` is a collider of the unshielded triple `p - r - q`.

    Uses the lag-free mutual information of `p` and `q` with unit windows, conditioned on `r` and on
    the separating set of `p` and `q`. Conditioning on a collider creates dependence, so `r` is a
    collider when independence is rejected.

    :return: `False` when `r` separates `p` and `q`, when the pair has no separating set, or when
        the test cannot be run
    """
    sepset = sepsets.get(p.name, q.name)
    if sepset is None or r.name in sepset:
        return False
    if knn is None:
        knn = KnnParams()
    if perm is None:
        perm = PermutationParams()

    p_value = _collider_p_value(p, q, r, sepset, data, knn, perm, min_samples)
    return p_value is not None and p_value <= perm.alpha


def _unshielded(graph: SummaryGraph) -> Iterator[tuple[str, str, str]]:
    for r in sorted(graph.nodes):
        for p, q in combinations(graph.neighbors(r), 2):
            if not graph.adjacent(p, q):
                yield p, r, q


def apply_pc_rules(
    graph: SummaryGraph,
    sepsets: SepsetTable,
    data: Dataset,
    cfg: DiscoveryConfig | None = None,
    *,
    oracle: Oracle | None = None,
    report: DiscoveryReport | None = None,
) -> SummaryGraph:
    """
    Orient colliders, then propagate orientations until nothing changes.

    1. colliders `p -> r <- q` for unshielded triples found by `collider_test`;
    2. `p -> r - q` with `p`, `q` nonadjacent and `r` not a collider gives `r -> q`;
    3. `p - q` with a directed path from `p` to `q` gives `p -> q`;
    4. `p -> r <- q` with `p - s - q`, `p`, `q` nonadjacent and `s - r` gives `s -> r`.

    Edges already oriented are never flipped, conflicting orientations are logged and skipped.
    """
    if cfg is None:
        cfg = DiscoveryConfig()
    graph = graph.copy()

    non_colliders: set[tuple[str, str, str]] = set()
    colliders: list[tuple[str, str, str]] = []
    for p, r, q in _unshielded(graph):
        sepset = sepsets.get(p, q)
        if sepset is None:
            continue
        if r in sepset:
            non_colliders.add((p, r, q))
            continue
        if graph.is_directed(p, r) and graph.is_directed(q, r):
            colliders.append((p, r, q))
            continue

        if oracle is not None:
            found = not oracle(p, q, tuple(sorted((*sepset, r))))
        else:
            if report is not None:
                report.collider_tests += 1
            p_value = _collider_p_value(
                data[p],
                data[q],
                data[r],
                sepset,
                data,
                _pair_knn(cfg, p, r, q),
                cfg.perm,
                cfg.min_samples,
            )
            if p_value is None:
                if report is not None:
                    report.skipped_colliders.append((p, r, q))
                continue
            found = p_value <= cfg.alpha

        if found:
            colliders.append((p, r, q))
        else:
            non_colliders.add((p, r, q))

    for p, r, q in colliders:
        _orient(graph, p, r, "collider", report)
        _orient(graph, q, r, "collider", report)

    def _non_collider(p: str, r: str, q: str) -> bool:
        return (p, r, q) in non_colliders or (q, r, p) in non_colliders

    changed = True
    while changed:
        changed = False

        for p, r, q in _unshielded(graph):
            for a, b in ((p, q), (q, p)):
                if (
                    graph.is_directed(a, r)
                    and graph.is_undirected(r, b)
                    and _non_collider(a, r, b)
                ):
                    changed |= _orient(graph, r, b, "propagation", report)

        directed = nx.DiGraph()
        directed.add_nodes_from(graph.nodes)
        directed.add_edges_from(graph.directed_edges())
        for pair in sorted(sorted(e) for e in graph.undirected_edges()):
            for a, b in (pair, pair[::-1]):
                if nx.has_path(directed, a, b):
                    if _orient(graph, a, b, "directed-path", report):
                        changed = True
                        directed.add_edge(a, b)
                    break

        for p, r, q in _unshielded(graph):
            if not (graph.is_directed(p, r) and graph.is_directed(q, r)):
                continue
            for s in graph.undirected_neighbors(r):
                if (
                    s not in (p, q)
                    and graph.is_undirected(p, s)
                    and graph.is_undirected(q, s)
                ):
                    changed |= _orient(graph, s, r, "double-triangle", report)

    return graph


def discover(
    data: Dataset,
    cfg: DiscoveryConfig | None = None,
    *,
    oracle: Oracle | None = None,
    lag_table: LagTable | None = None,
) -> tuple[SummaryGraph, SepsetTable, TestBudgetCounter, DiscoveryReport]:
    """
    Infer the summary causal graph of a dataset.

    Runs `build_skeleton`, `apply_er_rules` and `apply_pc_rules` in turn and marks every series
    with a self-loop unless disabled in the configuration.
    The result depends neither on the order of the series nor on the number of workers.

    :raise InvalidDataError: if the dataset has fewer than two series
    """
    if cfg is None:
        cfg = DiscoveryConfig()
    if data.d < 2:
        raise InvalidDataError("At least two series are required.")

    counter = TestBudgetCounter(data.d)
    report = DiscoveryReport()

    logger.info("Discovering over %d series: %s", data.d, sorted(data.names))
    graph, sepsets, cache = build_skeleton(
        data, cfg, oracle=oracle, lag_table=lag_table, counter=counter, report=report
    )
    graph = apply_er_rules(graph, cache, report)
    graph = apply_pc_rules(graph, sepsets, data, cfg, oracle=oracle, report=report)

    for name in graph.nodes:
        graph.set_self_loop(name, cfg.self_loops)

    return graph, sepsets, counter, report
