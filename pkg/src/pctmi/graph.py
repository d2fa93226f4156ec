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

import json
import os
from dataclasses import asdict, dataclass, replace
from enum import Enum
from typing import Iterable, Iterator, Sequence

import networkx as nx
from bitarray import bitarray
from msgpack import packb, unpackb  # type: ignore

from .errors import GraphError, InvalidDataError

_ANNOTATIONS = ("gamma", "lambda_src", "lambda_dst", "ctmi", "p_value")


class Mark(str, Enum):
    UNDIRECTED = "undirected"
    DIRECTED = "directed"


@dataclass(frozen=True)
class Edge:
    """
    An edge of the summary graph.
    Annotations are expressed from `src` to `dst`: `gamma > 0` means `dst` lags behind `src`.
    An undirected edge keeps its endpoints in the order they were added.
    """

    src: str
    dst: str
    mark: Mark = Mark.UNDIRECTED
    gamma: int | None = None
    lambda_src: int | None = None
    lambda_dst: int | None = None
    ctmi: float | None = None
    p_value: float | None = None

    @property
    def directed(self) -> bool:
        return self.mark is Mark.DIRECTED

    @property
    def pair(self) -> frozenset[str]:
        return frozenset((self.src, self.dst))

    def flipped(self) -> Edge:
        return Edge(
            self.dst,
            self.src,
            self.mark,
            None if self.gamma is None else -self.gamma,
            self.lambda_dst,
            self.lambda_src,
            self.ctmi,
            self.p_value,
        )

    def to_dict(self) -> dict:
        data = asdict(self)
        data["mark"] = self.mark.value
        return data

    @classmethod
    def from_dict(cls, data: dict) -> Edge:
        try:
            return cls(
                str(data["src"]),
                str(data["dst"]),
                Mark(data.get("mark", Mark.UNDIRECTED.value)),
                **{k: data.get(k) for k in _ANNOTATIONS},
            )
        except (KeyError, ValueError) as err:
            raise InvalidDataError(f"Malformed edge record {data}.") from err


class SummaryGraph:
    """
    A summary causal graph: one node per series, at most one edge per unordered pair,
    undirected or directed, and a self-loop flag per node.

    Adjacency is tracked with one bit mask per node.
    Directed 2-cycles cannot be represented, and an orientation is never overwritten.
    """

    def __init__(self, nodes: Sequence[str], self_loops: bool = True):
        self._nodes: list[str] = [str(n) for n in nodes]
        if len(set(self._nodes)) != len(self._nodes):
            raise GraphError("Node names must be distinct.")

        self._index: dict[str, int] = {n: i for i, n in enumerate(self._nodes)}
        self._mask: list[bitarray] = [self._empty() for _ in self._nodes]
        self._loops: bitarray = self._empty()
        self._loops.setall(self_loops)
        self._edges: dict[frozenset[str], Edge] = {}

    def _empty(self) -> bitarray:
        mask = bitarray(len(self._nodes))
        mask.setall(0)
        return mask

    def _id(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise GraphError(f"Unknown node {name}.") from None

    @classmethod
    def complete(cls, nodes: Sequence[str], self_loops: bool = True) -> SummaryGraph:
        graph = cls(nodes, self_loops)
        for i, a in enumerate(graph.nodes):
            for b in graph.nodes[i + 1 :]:
                graph.add_edge(a, b)
        return graph

    @property
    def nodes(self) -> list[str]:
        return list(self._nodes)

    @property
    def edges(self) -> list[Edge]:
        """
        All edges, sorted by endpoint names.
        """
        return sorted(self._edges.values(), key=lambda e: tuple(sorted((e.src, e.dst))))

    def __len__(self):
        return len(self._edges)

    def __iter__(self) -> Iterator[Edge]:
        return iter(self.edges)

    def __contains__(self, pair) -> bool:
        a, b = pair
        return self.adjacent(a, b)

    def __eq__(self, other):
        if not isinstance(other, SummaryGraph):
            return NotImplemented
        return (
            set(self._nodes) == set(other._nodes)
            and self.structure() == other.structure()
            and self.self_loops == other.self_loops
        )

    def __repr__(self):
        return f"SummaryGraph(nodes={self._nodes}, edges={self.structure()})"

    def structure(self) -> frozenset[tuple[str, str, str]]:
        """
        Edges without annotations; undirected edges are listed with sorted endpoints.
        """
        return frozenset(
            (e.src, e.dst, e.mark.value)
            if e.directed
            else (*sorted((e.src, e.dst)), e.mark.value)
            for e in self._edges.values()
        )

    def copy(self) -> SummaryGraph:
        graph = SummaryGraph(self._nodes)
        graph._loops = self._loops.copy()
        graph._mask = [m.copy() for m in self._mask]
        graph._edges = dict(self._edges)
        return graph

    def add_edge(
        self, a: str, b: str, mark: Mark | str = Mark.UNDIRECTED, **annotations
    ) -> Edge:
        """
        Add an edge between `a` and `b`, directed `a -> b` if `mark` is directed.

        :raise GraphError: if a node is unknown, `a == b`, or the pair is already adjacent
        """
        i, j = self._id(a), self._id(b)
        if i == j:
            raise GraphError("Self-loops are flags, not edges.")
        if self._mask[i][j]:
            raise GraphError(f"Nodes {a} and {b} are already adjacent.")

        unknown = set(annotations) - set(_ANNOTATIONS)
        if unknown:
            raise GraphError(f"Unknown edge annotations {sorted(unknown)}.")

        edge = Edge(a, b, Mark(mark), **annotations)
        self._mask[i][j] = self._mask[j][i] = 1
        self._edges[edge.pair] = edge
        return edge

    def add_directed(self, src: str, dst: str, **annotations) -> Edge:
        return self.add_edge(src, dst, Mark.DIRECTED, **annotations)

    def remove_edge(self, a: str, b: str) -> Edge:
        i, j = self._id(a), self._id(b)
        if not self._mask[i][j]:
            raise GraphError(f"Nodes {a} and {b} are not adjacent.")
        self._mask[i][j] = self._mask[j][i] = 0
        return self._edges.pop(frozenset((a, b)))

    def adjacent(self, a: str, b: str) -> bool:
        return bool(self._mask[self._id(a)][self._id(b)])

    def edge(self, a: str, b: str) -> Edge:
        """
        The edge between `a` and `b`, expressed from `a` to `b` when undirected.
        Directed edges are returned as stored.
        """
        try:
            edge = self._edges[frozenset((a, b))]
        except KeyError:
            raise GraphError(f"Nodes {a} and {b} are not adjacent.") from None
        if not edge.directed and edge.src != a:
            return edge.flipped()
        return edge

    def annotate(self, src: str, dst: str, **annotations):
        """
        Attach annotations expressed from `src` to `dst`, flipping them if the edge is stored the other way.
        """
        stored = self._edges[frozenset((src, dst))] if self.adjacent(src, dst) else None
        if stored is None:
            raise GraphError(f"Nodes {src} and {dst} are not adjacent.")
        local = replace(stored if stored.src == src else stored.flipped(), **annotations)
        self._edges[stored.pair] = local if stored.src == src else local.flipped()

    def orient(self, src: str, dst: str) -> bool:
        """
        Turn the undirected edge `src - dst` into `src -> dst`.

        :return: `True` if the graph changed, `False` if the edge was already `src -> dst`
        :raise GraphError: if the pair is not adjacent or already oriented `dst -> src`
        """
        edge = self.edge(src, dst)
        if edge.directed:
            if edge.src == src:
                return False
            raise GraphError(f"Edge {dst} -> {src} is already oriented.")
        self._edges[edge.pair] = replace(edge, mark=Mark.DIRECTED)
        return True

    def is_directed(self, src: str, dst: str) -> bool:
        edge = self._edges.get(frozenset((src, dst)))
        return edge is not None and edge.directed and edge.src == src

    def is_undirected(self, a: str, b: str) -> bool:
        edge = self._edges.get(frozenset((a, b)))
        return edge is not None and not edge.directed

    def neighbors(self, name: str) -> list[str]:
        mask = self._mask[self._id(name)]
        return sorted(self._nodes[i] for i, bit in enumerate(mask) if bit)

    def degree(self, name: str) -> int:
        return self._mask[self._id(name)].count()

    def max_degree(self) -> int:
        return max((m.count() for m in self._mask), default=0)

    def parents(self, name: str) -> list[str]:
        return [n for n in self.neighbors(name) if self.is_directed(n, name)]

    def children(self, name: str) -> list[str]:
        return [n for n in self.neighbors(name) if self.is_directed(name, n)]

    def undirected_neighbors(self, name: str) -> list[str]:
        return [n for n in self.neighbors(name) if self.is_undirected(n, name)]

    def directed_edges(self) -> set[tuple[str, str]]:
        return {(e.src, e.dst) for e in self._edges.values() if e.directed}

    def undirected_edges(self) -> set[frozenset[str]]:
        return {e.pair for e in self._edges.values() if not e.directed}

    def has_self_loop(self, name: str) -> bool:
        return bool(self._loops[self._id(name)])

    def set_self_loop(self, name: str, flag: bool = True):
        self._loops[self._id(name)] = flag

    @property
    def self_loops(self) -> set[str]:
        return {n for n, bit in zip(self._nodes, self._loops) if bit}

    def to_networkx(self) -> nx.DiGraph:
        """
        Directed view of the graph, undirected edges appear in both directions with `mark="undirected"`.
        Self-loops are included as edges.
        """
        graph = nx.DiGraph()
        graph.add_nodes_from(self._nodes)
        for e in self._edges.values():
            graph.add_edge(e.src, e.dst, mark=e.mark.value)
            if not e.directed:
                graph.add_edge(e.dst, e.src, mark=e.mark.value)
        graph.add_edges_from((n, n) for n in self.self_loops)
        return graph

    def to_dict(self) -> dict:
        loops = self.self_loops
        return {
            "nodes": self.nodes,
            "edges": [e.to_dict() for e in self.edges],
            "self_loops": (
                len(loops) == len(self._nodes)
                if len(loops) in (0, len(self._nodes))
                else sorted(loops)
            ),
        }

    @classmethod
    def from_dict(cls, data: dict) -> SummaryGraph:
        if not isinstance(data, dict) or "nodes" not in data:
            raise InvalidDataError("A graph record needs a node list.")

        loops = data.get("self_loops", True)
        graph = cls(data["nodes"], self_loops=loops is True)
        if isinstance(loops, list):
            for n in loops:
                graph.set_self_loop(str(n))

        for record in data.get("edges", []):
            edge = Edge.from_dict(record)
            graph.add_edge(
                edge.src,
                edge.dst,
                edge.mark,
                **{k: getattr(edge, k) for k in _ANNOTATIONS},
            )
        return graph

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> SummaryGraph:
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as err:
            raise InvalidDataError(f"Invalid graph JSON: {err}") from err

    def to_msgpack(self) -> bytes:
        return packb(self.to_dict())

    @classmethod
    def from_msgpack(cls, data: bytes) -> SummaryGraph:
        return cls.from_dict(unpackb(data))

    def to_dot(self, name: str = "summary") -> str:
        lines = [f"digraph {name} {{"]
        lines.extend(f'  "{n}";' for n in self._nodes)
        for e in self.edges:
            attributes = [] if e.directed else ["dir=none"]
            if e.gamma is not None:
                attributes.append(f'label="{e.gamma}"')
            suffix = f" [{', '.join(attributes)}]" if attributes else ""
            lines.append(f'  "{e.src}" -> "{e.dst}"{suffix};')
        lines.extend(f'  "{n}" -> "{n}";' for n in self._nodes if self.has_self_loop(n))
        lines.append("}")
        return "\n".join(lines) + "\n"


class SepsetTable:
    """
    Separating sets of removed edges, keyed by unordered pair.
    """

    def __init__(self):
        self._table: dict[frozenset[str], tuple[str, ...]] = {}

    def add(self, p: str, q: str, sepset: Iterable[str]):
        self._table[frozenset((p, q))] = tuple(sorted(sepset))

    def get(self, p: str, q: str) -> tuple[str, ...] | None:
        return self._table.get(frozenset((p, q)))

    def __contains__(self, pair) -> bool:
        return frozenset(pair) in self._table

    def __len__(self):
        return len(self._table)

    def __eq__(self, other):
        if not isinstance(other, SepsetTable):
            return NotImplemented
        return self._table == other._table

    def pairs(self) -> list[tuple[str, str]]:
        return sorted(tuple(sorted(k)) for k in self._table)

    def to_dict(self) -> list[dict]:
        return [{"pair": list(p), "sepset": list(self.get(*p))} for p in self.pairs()]

    @classmethod
    def from_dict(cls, records: list[dict]) -> SepsetTable:
        table = cls()
        for record in records:
            table.add(*record["pair"], record["sepset"])
        return table


def save_result(
    path: str | os.PathLike,
    graph: SummaryGraph,
    sepsets: SepsetTable | None = None,
    extra: dict | None = None,
):
    """
    Write a discovery result to a single msgpack archive.

    :param extra: any msgpack-serialisable mapping stored alongside, such as the counter and the report
    """
    payload = {
        "graph": graph.to_dict(),
        "sepsets": [] if sepsets is None else sepsets.to_dict(),
        "extra": extra or {},
    }
    with open(path, "wb") as file:
        file.write(packb(payload))


def load_result(path: str | os.PathLike) -> tuple[SummaryGraph, SepsetTable, dict]:
    with open(path, "rb") as file:
        payload = unpackb(file.read())
    return (
        SummaryGraph.from_dict(payload["graph"]),
        SepsetTable.from_dict(payload.get("sepsets", [])),
        payload.get("extra", {}),
    )


def read_graph(path: str | os.PathLike) -> SummaryGraph:
    """
    Read a graph from JSON, or from msgpack when the file is a result archive or a packed graph.
    """
    with open(path, "rb") as file:
        raw = file.read()
    try:
        return SummaryGraph.from_json(raw.decode())
    except (UnicodeDecodeError, InvalidDataError):
        pass
    try:
        data = unpackb(raw)
    except ValueError as err:
        raise InvalidDataError(f"{path} is neither a JSON graph nor a msgpack archive.") from err
    if isinstance(data, dict) and "graph" in data:
        data = data["graph"]
    return SummaryGraph.from_dict(data)
