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
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from .config import KnnParams, PermutationParams, config
from .errors import (
    AlignmentError,
    InfeasibleConditioningError,
    InsufficientSamplesError,
    InvalidConfigError,
    InvalidWindowError,
    NoCompatibleConfigError,
)
from .estimator import knn_cmi, null_p_value, permutation_null, permutation_test
from .series import (
    TimeSeries,
    build_joint_samples,
    compatible_configs,
    count_joint_rows,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CtmiResult:
    """
    The causal temporal mutual information of an ordered pair and the configuration attaining it.
    `gamma_pq > 0` means the window of `target` starts after the window of `source`.
    """

    value: float
    lambda_pq: int
    lambda_qp: int
    gamma_pq: int
    p_value: float | None = None
    n_eff: int = 0
    source: str = ""
    target: str = ""

    @property
    def configuration(self) -> tuple[int, int, int]:
        return self.lambda_pq, self.lambda_qp, self.gamma_pq

    def reversed(self) -> CtmiResult:
        return CtmiResult(
            self.value,
            self.lambda_qp,
            self.lambda_pq,
            -self.gamma_pq,
            self.p_value,
            self.n_eff,
            self.target,
            self.source,
        )

    def oriented(self, source: str) -> CtmiResult:
        return self if source == self.source else self.reversed()


@dataclass(frozen=True)
class CondCtmiResult:
    value: float
    cond_gaps: tuple[int, ...]
    cond_windows: tuple[int, ...]
    p_value: float | None = None
    n_eff: int = 0
    conditioners: tuple[str, ...] = ()
    evaluations: int = 0


def _tie_key(item: tuple[float, tuple[int, int, int]]):
    lambda_pq, lambda_qp, gamma = item[1]
    return lambda_pq + lambda_qp, abs(gamma), 0 if gamma >= 0 else 1, lambda_pq


def _evaluate(p, q, lambda_pq, lambda_qp, gamma, knn, min_samples, conditioners=()):
    samples = build_joint_samples(
        p,
        q,
        lambda_pq,
        lambda_qp,
        gamma,
        conditioners,
        include_past=True,
        min_samples=min_samples,
    )
    return knn_cmi(samples.x_rows, samples.y_rows, samples.z_rows, knn), samples


def evaluate_config(
    p: TimeSeries,
    q: TimeSeries,
    lambda_pq: int,
    lambda_qp: int,
    gamma: int,
    knn: KnnParams | None = None,
    perm: PermutationParams | None = None,
    *,
    min_samples: int | None = None,
    n_jobs: int | None = None,
) -> CtmiResult:
    """
    The conditional mutual information of one fixed configuration, conditioned on the past of both series.
    With `lambda_pq = lambda_qp = 1` and `gamma = 0` this is the lag-free mutual information given the past.
    """
    if knn is None:
        knn = KnnParams()

    value, samples = _evaluate(p, q, lambda_pq, lambda_qp, gamma, knn, min_samples)
    p_value = None
    if perm is not None:
        _, p_value = permutation_test(
            samples.x_rows,
            samples.y_rows,
            samples.z_rows,
            knn,
            perm,
            statistic=value,
            n_jobs=n_jobs,
        )

    return CtmiResult(
        value, lambda_pq, lambda_qp, gamma, p_value, samples.n_eff, p.name, q.name
    )


def _safe_value(p, q, configuration, knn, min_samples) -> float | None:
    try:
        return _evaluate(p, q, *configuration, knn, min_samples)[0]
    except (InsufficientSamplesError, AlignmentError, InvalidWindowError):
        return None


def ctmi(
    p: TimeSeries,
    q: TimeSeries,
    bounds: tuple[int, int] | None = None,
    knn: KnnParams | None = None,
    perm: PermutationParams | None = None,
    *,
    min_samples: int | None = None,
    n_jobs: int | None = None,
) -> CtmiResult:
    """
    Maximise the estimated conditional mutual information over all compatible window sizes and gaps.

    The search always runs on the pair ordered by name and the result is reversed when needed,
    so that swapping `p` and `q` negates the gap, swaps the windows and keeps the value.
    Estimates within `config.tie_tolerance` are resolved by the smallest total window,
    then the smallest absolute gap, then positive gaps first.

    :param bounds: `(lambda_max, gamma_max)`, defaults to the library configuration
    :param perm: when given, the maximum is tested against the maxima of permuted replicates
        evaluated over the same configurations, see `max_null`
    :raise NoCompatibleConfigError: if no configuration is feasible for the pair
    """
    if p.name > q.name:
        return ctmi(
            q, p, bounds, knn, perm, min_samples=min_samples, n_jobs=n_jobs
        ).reversed()
    if p.name == q.name:
        raise InvalidConfigError("CTMI needs two distinct series.")

    if knn is None:
        knn = KnnParams()
    lambda_max, gamma_max = bounds if bounds is not None else (config.lambda_max, config.gamma_max)

    configurations = compatible_configs(
        p, q, lambda_max, gamma_max, min_samples=min_samples
    )

    values = Parallel(n_jobs=config.n_jobs if n_jobs is None else n_jobs)(
        delayed(_safe_value)(p, q, c, knn, min_samples) for c in configurations
    )

    scored = [(v, c) for v, c in zip(values, configurations) if v is not None]
    if not scored:
        raise NoCompatibleConfigError(
            f"Series {p.name} and {q.name} cannot be compared under any configuration."
        )

    for v, c in scored:
        logger.debug("CTMI %s-%s at %s: %.5f", p.name, q.name, c, v)

    best_value = max(v for v, _ in scored)
    _, best = min(
        ((v, c) for v, c in scored if best_value - v <= config.tie_tolerance),
        key=_tie_key,
    )

    result = evaluate_config(p, q, *best, knn, min_samples=min_samples, n_jobs=n_jobs)
    if perm is None:
        return result

    null = max_null(
        p, q, [c for _, c in scored], knn, perm, min_samples=min_samples, n_jobs=n_jobs
    )
    p_value = null_p_value(best_value, null)
    logger.debug(
        "CTMI %s-%s = %.5f p=%.4f over %d configurations",
        p.name,
        q.name,
        best_value,
        p_value,
        len(scored),
    )
    return replace(result, p_value=p_value)


def max_null(
    p: TimeSeries,
    q: TimeSeries,
    configurations: Sequence[tuple[int, int, int]],
    knn: KnnParams | None = None,
    perm: PermutationParams | None = None,
    *,
    min_samples: int | None = None,
    n_jobs: int | None = None,
) -> np.ndarray:
    """
    Permutation null of the CTMI maximum.

    Replicate `b` is the largest `b`-th permuted estimate over all configurations.
    Every configuration draws its own permutations.
    """
    if knn is None:
        knn = KnnParams()
    if perm is None:
        perm = PermutationParams()

    null = np.full(perm.n_permutations, -np.inf)
    for c in configurations:
        samples = build_joint_samples(
            p, q, *c, include_past=True, min_samples=min_samples
        )
        null = np.maximum(
            null,
            permutation_null(
                samples.x_rows,
                samples.y_rows,
                samples.z_rows,
                knn,
                perm,
                stream=c,
                n_jobs=n_jobs,
            ),
        )
    return null


def _name_ordered(p: TimeSeries, q: TimeSeries, base: CtmiResult):
    """
    The pair in name order with `base` oriented from the first series.
    A `base` without series names is read in the order `p`, `q` of the caller.
    """
    if base.source and {base.source, base.target} != {p.name, q.name}:
        raise InvalidConfigError(
            f"Base result of {base.source}-{base.target} does not match {p.name}-{q.name}."
        )
    if p.name > q.name:
        p, q = q, p
        if not base.source:
            base = base.reversed()
    return p, q, base.oriented(p.name) if base.source else base


def _gap_floor(gamma: int) -> int:
    return max(1, int(np.sign(gamma)) * abs(gamma + 1))


def cond_ctmi(
    p: TimeSeries,
    q: TimeSeries,
    base: CtmiResult,
    conditioners: Sequence[TimeSeries],
    bounds: tuple[int, int] | None = None,
    knn: KnnParams | None = None,
    perm: PermutationParams | None = None,
    *,
    min_samples: int | None = None,
    n_jobs: int | None = None,
    sweeps: int | None = None,
) -> CondCtmiResult:
    """
    Minimise the estimated conditional mutual information over the windows and gaps of the conditioners.

    The pair keeps the configuration of `base`. Conditioner `r_k` contributes its window of size `lambda_k`
    starting `Gamma_k` time units before the window of `p`, with
    `Gamma_k >= max(1, sgn(gamma) * |gamma + 1|)` and `Gamma_k <= gamma_max`.
    Conditioners are optimised one at a time over their `(lambda_k, Gamma_k)` grid, in `sweeps`
    passes, instead of over the full Cartesian grid.

    Like `ctmi`, the computation runs on the pair ordered by name; gaps of the result refer to the
    window of the first series in that order.

    :raise InfeasibleConditioningError: if some conditioner has no feasible gap or window
    """
    if not conditioners:
        raise InvalidConfigError("At least one conditioner is required.")
    p, q, base = _name_ordered(p, q, base)

    if knn is None:
        knn = KnnParams()
    if sweeps is None:
        sweeps = config.cond_sweeps
    lambda_max, gamma_max = bounds if bounds is not None else (config.lambda_max, config.gamma_max)

    names = tuple(r.name for r in conditioners)
    ordered = sorted(conditioners, key=lambda r: r.name)

    floor = _gap_floor(base.gamma_pq)
    if floor > gamma_max:
        raise InfeasibleConditioningError(
            f"No conditioning gap in [{floor}, {gamma_max}] for {p.name}-{q.name}."
        )

    grid = [
        (lambda_k, gap)
        for lambda_k in range(1, lambda_max + 1)
        for gap in range(floor, gamma_max + 1)
    ]

    cache: dict[tuple, float | None] = {}
    workers: int = config.n_jobs if n_jobs is None else n_jobs

    current: list[tuple[int, int]] = [(1, floor)] * len(ordered)
    current_value: float | None = None
    for _ in range(sweeps):
        for k in range(len(ordered)):
            trials = [tuple(current[:k] + [g] + current[k + 1 :]) for g in grid]
            pending = [t for t in trials if t not in cache]
            computed = Parallel(n_jobs=workers)(
                delayed(_safe_cond_value)(p, q, base, ordered, t, knn, min_samples)
                for t in pending
            )
            cache.update(zip(pending, computed))
            scored = [(cache[t], t) for t in trials if cache[t] is not None]
            if not scored:
                raise InfeasibleConditioningError(
                    f"Conditioner {ordered[k].name} has no feasible window and gap for {p.name}-{q.name}."
                )
            lowest = min(v for v, _ in scored)
            current_value, chosen = next(
                (v, t) for v, t in scored if v - lowest <= config.tie_tolerance
            )
            current = list(chosen)

    assignment = tuple(current)
    n_eff = count_joint_rows(
        p,
        q,
        base.lambda_pq,
        base.lambda_qp,
        base.gamma_pq,
        [(r, lam, gap) for r, (lam, gap) in zip(ordered, assignment)],
    )

    by_name = {r.name: a for r, a in zip(ordered, assignment)}
    logger.debug(
        "CTMI %s-%s | %s = %.5f at %s", p.name, q.name, names, current_value, by_name
    )
    result = CondCtmiResult(
        float(current_value),
        tuple(by_name[n][1] for n in names),
        tuple(by_name[n][0] for n in names),
        None,
        n_eff,
        names,
        len(cache),
    )

    if perm is not None:
        result = replace(
            result,
            p_value=cond_p_value(
                p,
                q,
                base,
                conditioners,
                result,
                knn,
                perm,
                min_samples=min_samples,
                n_jobs=n_jobs,
            ),
        )
    return result


def cond_p_value(
    p: TimeSeries,
    q: TimeSeries,
    base: CtmiResult,
    conditioners: Sequence[TimeSeries],
    result: CondCtmiResult,
    knn: KnnParams | None = None,
    perm: PermutationParams | None = None,
    *,
    min_samples: int | None = None,
    n_jobs: int | None = None,
) -> float:
    """
    Permutation p-value of a conditional CTMI at the windows and gaps selected by `cond_ctmi`.
    """
    p, q, base = _name_ordered(p, q, base)
    if knn is None:
        knn = KnnParams()

    by_name = {r.name: r for r in conditioners}
    samples = build_joint_samples(
        p,
        q,
        base.lambda_pq,
        base.lambda_qp,
        base.gamma_pq,
        [
            (by_name[n], lam, gap)
            for n, lam, gap in zip(
                result.conditioners, result.cond_windows, result.cond_gaps
            )
        ],
        include_past=True,
        min_samples=min_samples,
    )
    _, p_value = permutation_test(
        samples.x_rows,
        samples.y_rows,
        samples.z_rows,
        knn,
        perm,
        statistic=result.value,
        n_jobs=n_jobs,
    )
    return p_value


def _safe_cond_value(p, q, base, ordered, assignment, knn, min_samples):
    try:
        return _evaluate(
            p,
            q,
            base.lambda_pq,
            base.lambda_qp,
            base.gamma_pq,
            knn,
            min_samples,
            [(r, lam, gap) for r, (lam, gap) in zip(ordered, assignment)],
        )[0]
    except (InsufficientSamplesError, AlignmentError, InvalidWindowError):
        return None
