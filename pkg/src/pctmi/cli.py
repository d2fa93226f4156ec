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

import argparse
import json
import logging
import sys
from typing import Sequence

from .config import DiscoveryConfig
from .datagen import STRUCTURES, GenerativeParams, generate, structure, subsample
from .discovery import discover
from .errors import InvalidConfigError, InvalidDataError, PctmiError
from .evaluation import evaluate, project_full_graph, run_benchmark
from .graph import read_graph, save_result
from .series import read_csv, write_csv
from .utility import setup_logging

logger = logging.getLogger(__name__)

_FLAGS = {
    "max_window": "lambda_max",
    "max_lag": "gamma_max",
    "alpha": "alpha",
    "knn_k": "knn_k",
    "permutations": "n_permutations",
    "perm_neighbors": "perm_neighbors",
    "seed": "seed",
    "min_samples": "min_samples",
    "jobs": "n_jobs",
    "transform": "transform",
}


def _literal(text: str):
    text = text.strip()
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def read_config_file(path: str) -> dict:
    """
    Read `key=value` lines, `#` starts a comment and blank lines are skipped.
    Dashes in keys are read as underscores, keys are either configuration fields or flag names.
    """
    values: dict = {}
    with open(path) as file:
        for number, line in enumerate(file, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfigError(f"{path}:{number}: expected key=value.")
            key, value = line.split("=", 1)
            values[key.strip().replace("-", "_")] = _literal(value)
    return values


def _discovery_config(args: argparse.Namespace) -> DiscoveryConfig:
    values: dict = {}
    if args.config:
        values = {_FLAGS.get(k, k): v for k, v in read_config_file(args.config).items()}
    for flag, key in _FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = value
    return DiscoveryConfig.from_mapping(values)


def _rates(text: str | None) -> list[int] | None:
    if text is None:
        return None
    try:
        return [int(v) for v in text.split(",")]
    except ValueError:
        raise InvalidConfigError(
            f"Rates must be a comma separated list of integers, got {text}."
        ) from None


def _emit(text: str, output: str | None):
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w") as file:
            file.write(text)


def _discover(args: argparse.Namespace) -> int:
    cfg = _discovery_config(args)
    data = read_csv(args.input, args.layout)
    rates = _rates(args.rates)
    if rates is not None:
        data = subsample(data, rates)

    graph, sepsets, counter, report = discover(data, cfg)
    logger.info(
        "%d significance tests (bound %.0f).", counter.ci_tests_performed, counter.bound
    )

    if args.format == "msgpack":
        if args.output is None:
            raise InvalidConfigError("The msgpack format needs an output file.")
        save_result(
            args.output,
            graph,
            sepsets,
            {"counter": counter.to_dict(), "report": report.to_dict()},
        )
    elif args.format == "dot":
        _emit(graph.to_dot(), args.output)
    else:
        _emit(graph.to_json() + "\n", args.output)
    return 0


def _generate(args: argparse.Namespace) -> int:
    data, truth = generate(
        structure(args.structure, args.gamma),
        GenerativeParams(T=args.length, seed=args.seed or 0),
    )
    rates = _rates(args.rates)
    if rates is not None:
        data = subsample(data, rates)
    write_csv(data, args.output)
    if args.truth:
        _emit(truth.to_json() + "\n", args.truth)
    return 0


def _evaluate(args: argparse.Namespace) -> int:
    report = evaluate(read_graph(args.prediction), read_graph(args.truth))
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.output)
    return 0


def _bench(args: argparse.Namespace) -> int:
    report = run_benchmark(
        args.structure,
        args.seeds,
        _discovery_config(args),
        _rates(args.rates),
        T=args.length,
        gamma=args.gamma,
        first_seed=args.seed or 0,
        n_jobs=args.bench_jobs,
    )
    print(report.to_table())
    if args.output:
        _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.output)
    return 0


def _project(args: argparse.Namespace) -> int:
    with open(args.input) as file:
        content = json.load(file)
    if isinstance(content, dict):
        graph = project_full_graph(content.get("edges", []), content.get("nodes"))
    elif isinstance(content, list):
        graph = project_full_graph(content)
    else:
        raise InvalidDataError(f"{args.input} does not hold a list of lagged edges.")
    _emit(graph.to_json() + "\n", args.output)
    return 0


def _add_discovery_flags(parser: argparse.ArgumentParser):
    group = parser.add_argument_group("discovery")
    group.add_argument("--max-window", type=int, help="largest window size (5)")
    group.add_argument("--max-lag", type=int, help="largest temporal gap (5)")
    group.add_argument("--alpha", type=float, help="significance level (0.05)")
    group.add_argument("--knn-k", type=int, help="number of neighbours (10)")
    group.add_argument("--permutations", type=int, help="permutation replicates (100)")
    group.add_argument("--perm-neighbors", type=int, help="local permutation neighbourhood (5)")
    group.add_argument("--min-samples", type=int, help="minimum joint rows (50)")
    group.add_argument("--transform", choices=("standardize", "rank"))
    group.add_argument("--jobs", type=int, help="parallel workers per run")
    group.add_argument("--config", help="key=value file, overridden by flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pctmi",
        description="Summary causal graph discovery for multivariate time series.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    commands = parser.add_subparsers(dest="command", required=True)

    command = commands.add_parser("discover", help="infer a summary graph from a CSV file")
    command.add_argument("input")
    command.add_argument("-o", "--output")
    command.add_argument("--layout", choices=("auto", "wide", "long"), default="auto")
    command.add_argument("--format", choices=("json", "dot", "msgpack"), default="json")
    command.add_argument("--rates", help="decimation factor per series, e.g. 1,2,1")
    command.add_argument("--seed", type=int)
    _add_discovery_flags(command)
    command.set_defaults(handler=_discover)

    command = commands.add_parser("generate", help="simulate a benchmark structure")
    command.add_argument("structure", choices=sorted(STRUCTURES))
    command.add_argument("-o", "--output", required=True)
    command.add_argument("--truth", help="write the ground truth graph here")
    command.add_argument("--length", type=int, default=1000)
    command.add_argument("--gamma", type=int, default=1)
    command.add_argument("--rates")
    command.add_argument("--seed", type=int)
    command.set_defaults(handler=_generate)

    command = commands.add_parser("evaluate", help="score a graph against the truth")
    command.add_argument("prediction")
    command.add_argument("truth")
    command.add_argument("-o", "--output")
    command.set_defaults(handler=_evaluate)

    command = commands.add_parser("bench", help="run a benchmark sweep over seeds")
    command.add_argument("structure", choices=sorted(STRUCTURES))
    command.add_argument("--seeds", type=int, default=10)
    command.add_argument("--length", type=int, default=1000)
    command.add_argument("--gamma", type=int, default=1)
    command.add_argument("--rates")
    command.add_argument("--seed", type=int)
    command.add_argument("--bench-jobs", type=int, default=1, help="seeds run in parallel")
    command.add_argument("-o", "--output")
    _add_discovery_flags(command)
    command.set_defaults(handler=_bench)

    command = commands.add_parser("project", help="collapse a full temporal graph")
    command.add_argument("input")
    command.add_argument("-o", "--output")
    command.set_defaults(handler=_project)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    try:
        return args.handler(args)
    except (PctmiError, OSError, json.JSONDecodeError) as err:
        print(f"pctmi: error: {err}", file=sys.stderr)
        return 1
