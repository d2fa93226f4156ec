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
from dataclasses import dataclass, replace
from fractions import Fraction
from math import gcd, lcm
from typing import Callable, Literal, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import DegenerateSeriesError, GraphError, InvalidConfigError
from .graph import SummaryGraph
from .series import Dataset, TimeSeries
from .utility import derive_rng

logger = logging.getLogger(__name__)

NONLINEARITIES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "abs": np.abs,
    "tanh": np.tanh,
    "sin": np.sin,
    "cos": np.cos,
}


@dataclass(frozen=True)
class StructureSpec:
    """
    A causal structure over named series.

    Every edge acts with lag `gamma` unless listed in `lags` as `(src, dst, lag)`.
    """

    name: str
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]
    gamma: int = 1
    lags: tuple[tuple[str, str, int], ...] = ()

    def __post_init__(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise InvalidConfigError("Node names must be distinct.")
        if self.gamma < 0 or any(lag < 0 for *_, lag in self.lags):
            raise InvalidConfigError("Causal lags must be non-negative.")
        for src, dst in self.edges:
            if src not in self.nodes or dst not in self.nodes or src == dst:
                raise InvalidConfigError(f"Invalid edge {src}->{dst}.")
        if not nx.is_directed_acyclic_graph(self.dag()):
            raise InvalidConfigError(f"Structure {self.name} is not acyclic.")

    def dag(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from(self.edges)
        return graph

    def lag(self, src: str, dst: str) -> int:
        for a, b, lag in self.lags:
            if (a, b) == (src, dst):
                return lag
        return self.gamma

    def lag_table(self) -> dict[tuple[str, str], int]:
        return {(src, dst): self.lag(src, dst) for src, dst in self.edges}

    def with_gamma(self, gamma: int) -> StructureSpec:
        return replace(self, gamma=gamma)

    def truth(self) -> SummaryGraph:
        graph = SummaryGraph(self.nodes, self_loops=True)
        for src, dst in self.edges:
            graph.add_directed(src, dst, gamma=self.lag(src, dst))
        return graph


def _spec(name: str, d: int, *edges: tuple[int, int]) -> StructureSpec:
    return StructureSpec(
        name,
        tuple(str(i) for i in range(1, d + 1)),
        tuple((str(a), str(b)) for a, b in edges),
    )


STRUCTURES: dict[str, StructureSpec] = {
    "fork": _spec("fork", 3, (1, 2), (1, 3)),
    "v_structure": _spec("v_structure", 3, (1, 3), (2, 3)),
    "mediator": _spec("mediator", 3, (1, 2), (1, 3), (2, 3)),
    "diamond": _spec("diamond", 4, (1, 2), (1, 3), (2, 4), (3, 4)),
    "example1": StructureSpec("example1", ("p", "q"), (("p", "q"),)),
}


def structure(name: str, gamma: int = 1) -> StructureSpec:
    try:
        return STRUCTURES[name].with_gamma(gamma)
    except KeyError:
        raise InvalidConfigError(
            f"Unknown structure {name}, expected one of {sorted(STRUCTURES)}."
        ) from None


@dataclass(frozen=True)
class GenerativeParams:
    """
    Parameters of the benchmark generating process.

    Coefficients are drawn uniformly from `[-coef_high, -coef_low] U [coef_low, coef_high]` and the
    nonlinearity of each edge from `nonlinearities`, both once per dataset.
    Innovations are `noise_scale * xi` with `xi ~ N(0, noise_sigma)`, `noise_sigma` being a standard deviation.
    """

    T: int = 1000
    seed: int = 0
    coef_low: float = 0.1
    coef_high: float = 1.0
    noise_scale: float = 0.1
    noise_sigma: float = float(np.sqrt(15))
    nonlinearities: tuple[str, ...] = ("abs", "tanh", "sin", "cos")
    burn_in: int = 100

    def __post_init__(self):
        if self.T < 1:
            raise InvalidConfigError("T must be at least 1.")
        if self.burn_in < 0:
            raise InvalidConfigError("burn_in must be non-negative.")
        if not 0 <= self.coef_low <= self.coef_high:
            raise InvalidConfigError("Coefficient range is invalid.")
        if not self.nonlinearities or any(
            f not in NONLINEARITIES for f in self.nonlinearities
        ):
            raise InvalidConfigError(
                f"Nonlinearities must be drawn from {sorted(NONLINEARITIES)}."
            )


def _coefficient(rng: np.random.Generator, params: GenerativeParams) -> float:
    magnitude = rng.uniform(params.coef_low, params.coef_high)
    return float(magnitude if rng.random() < 0.5 else -magnitude)


def generate(
    spec: StructureSpec, params: GenerativeParams | None = None
) -> tuple[Dataset, SummaryGraph]:
    """
    Simulate `X_t^q = a^qq X_{t-1}^q + sum_p a^pq f_pq(X_{t-gamma}^p) + noise_scale * xi_t^q`
    from a zero state, and drop the first `burn_in` steps.

    Edges with zero lag are evaluated in topological order within the same step.

    :return: the dataset (unit rates, zero start times) and the ground truth with self-loops
    """
    if params is None:
        params = GenerativeParams()

    rng = derive_rng(params.seed, "generate", spec.name)
    order = list(nx.lexicographical_topological_sort(spec.dag()))
    column = {n: i for i, n in enumerate(spec.nodes)}

    own = {n: _coefficient(rng, params) for n in spec.nodes}
    inputs: dict[str, list[tuple[int, int, float, Callable]]] = {
        n: [] for n in spec.nodes
    }
    for src, dst in spec.edges:
        f = NONLINEARITIES[params.nonlinearities[rng.integers(len(params.nonlinearities))]]
        inputs[dst].append((column[src], spec.lag(src, dst), _coefficient(rng, params), f))

    n = params.T + params.burn_in
    noise = params.noise_scale * rng.normal(0.0, params.noise_sigma, (n, len(spec.nodes)))
    values = np.zeros((n, len(spec.nodes)))
    for t in range(1, n):
        for node in order:
            q = column[node]
            total = own[node] * values[t - 1, q] + noise[t, q]
            for p, lag, a, f in inputs[node]:
                if t - lag >= 0:
                    total += a * f(values[t - lag, p])
            values[t, q] = total

    values = values[params.burn_in :]
    data = Dataset([TimeSeries(s, values[:, column[s]]) for s in spec.nodes])
    return data, spec.truth()


def generate_example1(
    T: int = 10000,
    seed: int = 0,
    *,
    damping: float = 0.9,
    literal: bool = False,
    noise_scale: float = 1.0,
    burn_in: int = 100,
) -> Dataset:
    """
    Two series where `p` drives `q` at lags 1 and 2:
    `p_t = a p_{t-1} + eta_t` and `q_t = a q_{t-1} + p_{t-2} + p_{t-1} + eta'_t`.

    The autoregressive weight `a` is `damping`, or 1 when `literal` is set, which gives a
    non-stationary system.

    :raise InvalidConfigError: if `T < 10`
    """
    if T < 10:
        raise InvalidConfigError("Example series need at least 10 observations.")

    a = 1.0 if literal else damping
    rng = derive_rng(seed, "example1")
    n = T + burn_in
    eta = noise_scale * rng.standard_normal((n, 2))

    p = np.zeros(n)
    q = np.zeros(n)
    for t in range(1, n):
        p[t] = a * p[t - 1] + eta[t, 0]
        q[t] = a * q[t - 1] + p[t - 1] + (p[t - 2] if t >= 2 else 0.0) + eta[t, 1]

    return Dataset([TimeSeries("p", p[burn_in:]), TimeSeries("q", q[burn_in:])])


def generate_common_cause(
    kind: Literal["single", "double"] = "single",
    T: int = 1000,
    seed: int = 0,
    *,
    strength: float = 1.0,
    damping: float = 0.3,
    noise_scale: float = 0.3,
    burn_in: int = 100,
) -> tuple[Dataset, SummaryGraph]:
    """
    Two series `p` and `q` made dependent only through common causes.

    - `single`: `r` causes `p` at lag 1 and `q` at lag 2.
    - `double`: `r1` causes both at lag 1, `r2` causes `p` at lag 1 and `q` at lag 2.

    Every cause enters linearly with weight `strength`, every series has the autoregressive weight
    `damping`. Causes have unit innovations, `p` and `q` innovations of size `noise_scale`.
    """
    if kind == "single":
        spec = StructureSpec(
            "single_common_cause",
            ("p", "q", "r"),
            (("r", "p"), ("r", "q")),
            1,
            (("r", "q", 2),),
        )
    elif kind == "double":
        spec = StructureSpec(
            "double_common_cause",
            ("p", "q", "r1", "r2"),
            (("r1", "p"), ("r1", "q"), ("r2", "p"), ("r2", "q")),
            1,
            (("r2", "q", 2),),
        )
    else:
        raise InvalidConfigError(f"Unknown common cause scenario {kind}.")

    if T < 10:
        raise InvalidConfigError("Example series need at least 10 observations.")
    if not 0 <= damping < 1:
        raise InvalidConfigError("damping must lie in [0, 1).")

    rng = derive_rng(seed, "common_cause", kind)
    column = {n: i for i, n in enumerate(spec.nodes)}
    roots = {n for n in spec.nodes if not any(dst == n for _, dst in spec.edges)}
    scale = np.array([1.0 if n in roots else noise_scale for n in spec.nodes])

    n = T + burn_in
    values = np.zeros((n, len(spec.nodes)))
    innovations = rng.standard_normal(values.shape) * scale
    for t in range(1, n):
        values[t] = damping * values[t - 1] + innovations[t]
        for src, dst in spec.edges:
            lag = spec.lag(src, dst)
            if t - lag >= 0:
                values[t, column[dst]] += strength * values[t - lag, column[src]]

    values = values[burn_in:]
    data = Dataset([TimeSeries(s, values[:, column[s]]) for s in spec.nodes])
    return data, spec.truth()


def subsample(data: Dataset, keep_every: Sequence[int] | Mapping[str, int]) -> Dataset:
    """
    Keep observations `0, k, 2k, ...` of every series.

    Rates must stay integers, so when some `rate / k` is fractional the time unit is enlarged by the
    smallest factor `m` making all of them integral: rates are multiplied and start times divided by `m`.

    :param keep_every: one factor per series, in dataset order or keyed by name
    :raise DegenerateSeriesError: if a series keeps fewer than 10 observations
    """
    if isinstance(keep_every, Mapping):
        factors = [int(keep_every.get(n, 1)) for n in data.names]
    else:
        factors = [int(k) for k in keep_every]
    if len(factors) != data.d:
        raise InvalidConfigError(
            f"Expected {data.d} decimation factors, got {len(factors)}."
        )
    if any(k < 1 for k in factors):
        raise InvalidConfigError("Decimation factors must be positive.")

    scale: int = 1
    for s, k in zip(data, factors):
        scale = lcm(scale, k // gcd(s.rate, k))
    if scale > 1:
        logger.warning(
            "Time unit enlarged %d times to keep integer sampling rates.", scale
        )

    series: list[TimeSeries] = []
    for s, k in zip(data, factors):
        values = s.values[::k]
        if len(values) < 10:
            raise DegenerateSeriesError(
                f"Series {s.name} keeps only {len(values)} observations."
            )
        series.append(
            TimeSeries(
                s.name,
                values,
                s.rate * scale // k,
                Fraction(s.start_time) / scale,
            )
        )

    unit = data.time_unit if scale == 1 else f"{scale} {data.time_unit}"
    return Dataset(series, unit)


def dsep_oracle(truth: SummaryGraph):
    """
    An independence oracle answering by d-separation in the ground-truth graph, self-loops ignored.
    """
    if truth.undirected_edges():
        raise GraphError("The ground truth must be fully oriented.")

    dag = nx.DiGraph()
    dag.add_nodes_from(truth.nodes)
    dag.add_edges_from(truth.directed_edges())

    separated = getattr(nx, "is_d_separator", None) or nx.d_separated

    def oracle(p: str, q: str, conditioning: tuple[str, ...]) -> bool:
        return bool(separated(dag, {p}, {q}, set(conditioning)))

    return oracle
