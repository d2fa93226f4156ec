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
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Iterator, Literal, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from .config import config
from .errors import (
    AlignmentError,
    InsufficientSamplesError,
    InvalidDataError,
    InvalidWindowError,
    NoCompatibleConfigError,
)
from .utility import common_denominator

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class TimeSeries:
    """
    A regularly sampled univariate series.
    Observation `i` occurs at `start_time + i / rate`, time is measured in time units.
    """

    name: str
    values: np.ndarray
    rate: int = 1
    start_time: Fraction = Fraction(0)

    def __post_init__(self):
        self.name = str(self.name)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        self.values.setflags(write=False)
        self.start_time = Fraction(self.start_time)

        if len(self.values) < 1:
            raise InvalidDataError(f"Series {self.name} is empty.")
        if not isinstance(self.rate, (int, np.integer)) or self.rate < 1:
            raise InvalidDataError(
                f"Series {self.name} needs a positive integer rate, got {self.rate}."
            )
        self.rate = int(self.rate)

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"TimeSeries({self.name}, L={len(self)}, rate={self.rate}, start={self.start_time})"

    def time(self, index: int) -> Fraction:
        return self.start_time + Fraction(index, self.rate)

    @property
    def end_time(self) -> Fraction:
        return self.time(len(self) - 1)


@dataclass(eq=False)
class Dataset:
    series: list[TimeSeries]
    time_unit: str = "unit"

    def __post_init__(self):
        self.series = list(self.series)
        names = [s.name for s in self.series]
        if len(set(names)) != len(names):
            raise InvalidDataError("Series names must be distinct.")

    def __len__(self):
        return len(self.series)

    def __iter__(self) -> Iterator[TimeSeries]:
        return iter(self.series)

    def __getitem__(self, key: str | int) -> TimeSeries:
        if isinstance(key, int):
            return self.series[key]
        for s in self.series:
            if s.name == key:
                return s
        raise KeyError(key)

    def __contains__(self, name: str):
        return any(s.name == name for s in self.series)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.series]

    @property
    def d(self) -> int:
        return len(self.series)

    def reorder(self, names: Sequence[str]) -> Dataset:
        if sorted(names) != sorted(self.names):
            raise InvalidDataError("Reordering must use exactly the series names.")
        return Dataset([self[n] for n in names], self.time_unit)


@dataclass(eq=False)
class WindowEmbedding:
    source: str
    window_size: int
    rows: np.ndarray
    start_times: tuple[Fraction, ...]

    def __len__(self):
        return len(self.rows)


@dataclass(eq=False)
class JointSampleSet:
    """
    Paired windows of two series, plus the conditioning block.

    Start times are kept as integer ticks of `tick` time units so that the gap between
    paired windows is exact. `gap` is expressed in time units.
    """

    x_rows: np.ndarray
    y_rows: np.ndarray
    z_rows: np.ndarray | None
    gap: Fraction
    n_eff: int
    x_start: np.ndarray = field(repr=False)
    y_start: np.ndarray = field(repr=False)
    tick: Fraction = Fraction(1)
    stride: Fraction = Fraction(1)

    @property
    def start_gaps(self) -> set[Fraction]:
        return {Fraction(int(v)) * self.tick for v in np.unique(self.y_start - self.x_start)}


def window_embed(series: TimeSeries, lambda_: int) -> WindowEmbedding:
    """
    Overlapping windows of size `lambda_`: row `t` holds `(v_t, ..., v_{t+lambda_-1})`.

    :param series: the series to embed
    :param lambda_: window size, 0 < lambda_ < len(series)
    :raise InvalidWindowError: if the window size is out of range
    :return: the embedding with `len(series) - lambda_ + 1` rows
    """
    if not 0 < lambda_ < len(series):
        raise InvalidWindowError(
            f"Window size {lambda_} invalid for series {series.name} of length {len(series)}."
        )

    rows = np.array(sliding_window_view(series.values, lambda_))
    return WindowEmbedding(
        series.name,
        lambda_,
        rows,
        tuple(series.time(i) for i in range(len(rows))),
    )


def joint_stride(rate_p: int, rate_q: int) -> int:
    """
    The spacing between successive joint-window start times, LCM(rate_p, rate_q).

    The value counts ticks of the pair clock, a tick being `1 / (rate_p * rate_q)` time units,
    hence the spacing in time units is `1 / gcd(rate_p, rate_q)`, the finest grid shared by both series.
    """
    if rate_p < 1 or rate_q < 1:
        raise InvalidDataError("Rates must be positive integers.")
    return lcm(rate_p, rate_q)


def joint_spacing(rate_p: int, rate_q: int) -> Fraction:
    return Fraction(joint_stride(rate_p, rate_q), rate_p * rate_q)


Conditioner = tuple[TimeSeries, int, int]


class _Clock:
    """
    Integer ticks shared by a group of series, every observation time is a whole number of ticks.
    """

    def __init__(self, *series: TimeSeries):
        self.per_unit: int = 1
        for s in series:
            self.per_unit = lcm(self.per_unit, s.rate)
        self.per_unit = lcm(
            self.per_unit, common_denominator(*(s.start_time for s in series))
        )

    def start(self, s: TimeSeries) -> int:
        return int(s.start_time * self.per_unit)

    def step(self, s: TimeSeries) -> int:
        return self.per_unit // s.rate

    def ticks(self, units: int | Fraction) -> int:
        value = Fraction(units) * self.per_unit
        if value.denominator != 1:
            raise AlignmentError(f"Offset {units} does not fall on the tick grid.")
        return int(value)


def _locate(s: TimeSeries, clock: _Clock, times: np.ndarray, lo: int, hi: int):
    """
    Map tick times to observation indices of `s`, with validity mask for indices in [lo, hi].
    """
    offset = times - clock.start(s)
    step = clock.step(s)
    on_grid = offset % step == 0
    index = offset // step
    return index, on_grid & (index >= lo) & (index <= hi)


def _spans_overlap(p: TimeSeries, q: TimeSeries) -> bool:
    return p.start_time <= q.end_time and q.start_time <= p.end_time


def _align(
    p: TimeSeries,
    q: TimeSeries,
    lambda_pq: int,
    lambda_qp: int,
    gamma: int,
    conditioners: Sequence[Conditioner],
    include_past: bool,
):
    for s, lam in ((p, lambda_pq), (q, lambda_qp), *((r, lr) for r, lr, _ in conditioners)):
        if not 0 < lam < len(s):
            raise InvalidWindowError(
                f"Window size {lam} invalid for series {s.name} of length {len(s)}."
            )

    if not _spans_overlap(p, q):
        raise AlignmentError(f"Series {p.name} and {q.name} do not overlap in time.")

    clock = _Clock(p, q, *(r for r, _, _ in conditioners))
    first: int = 1 if include_past else 0

    ip = np.arange(first, len(p) - lambda_pq + 1, dtype=np.int64)
    x_start = clock.start(p) + ip * clock.step(p)
    y_start = x_start + clock.ticks(gamma)

    iq, valid = _locate(q, clock, y_start, first, len(q) - lambda_qp)

    ir: list[np.ndarray] = []
    for r, lambda_r, big_gamma in conditioners:
        index, ok = _locate(
            r, clock, x_start - clock.ticks(big_gamma), 0, len(r) - lambda_r
        )
        valid &= ok
        ir.append(index)

    return clock, ip[valid], iq[valid], [i[valid] for i in ir], x_start[valid], y_start[valid]


def _windows(s: TimeSeries, lambda_: int, index: np.ndarray) -> np.ndarray:
    return np.array(sliding_window_view(s.values, lambda_)[index])


def build_joint_samples(
    p: TimeSeries,
    q: TimeSeries,
    lambda_pq: int,
    lambda_qp: int,
    gamma: int,
    conditioners: Sequence[Conditioner] = (),
    include_past: bool = True,
    *,
    min_samples: int | None = None,
) -> JointSampleSet:
    """
    Pair windows of `p` starting at `t` with windows of `q` starting at `t + gamma`.

    When `include_past` is set, the conditioning block starts with the observations preceding
    both windows; rows without such observations are dropped.
    Each conditioner `(r, lambda_r, Gamma_r)` appends the window of `r` starting at `t - Gamma_r`.
    Gaps are expressed in time units.

    :raise AlignmentError: if the series do not overlap in time
    :raise InsufficientSamplesError: if fewer than `min_samples` rows are available
    """
    if min_samples is None:
        min_samples = config.min_samples

    clock, ip, iq, ir, x_start, y_start = _align(
        p, q, lambda_pq, lambda_qp, gamma, conditioners, include_past
    )

    n_eff: int = len(ip)
    if n_eff < max(min_samples, 1):
        raise InsufficientSamplesError(n_eff, min_samples)

    z_blocks: list[np.ndarray] = []
    if include_past:
        z_blocks.append(p.values[ip - 1].reshape(-1, 1))
        z_blocks.append(q.values[iq - 1].reshape(-1, 1))
    for (r, lambda_r, _), index in zip(conditioners, ir):
        z_blocks.append(_windows(r, lambda_r, index))

    return JointSampleSet(
        x_rows=_windows(p, lambda_pq, ip),
        y_rows=_windows(q, lambda_qp, iq),
        z_rows=np.hstack(z_blocks) if z_blocks else None,
        gap=Fraction(gamma),
        n_eff=n_eff,
        x_start=x_start,
        y_start=y_start,
        tick=Fraction(1, clock.per_unit),
        stride=joint_spacing(p.rate, q.rate),
    )


def count_joint_rows(
    p: TimeSeries,
    q: TimeSeries,
    lambda_pq: int,
    lambda_qp: int,
    gamma: int,
    conditioners: Sequence[Conditioner] = (),
    include_past: bool = True,
) -> int:
    """
    Number of rows `build_joint_samples` would produce, without materialising them.
    Invalid window sizes and non-overlapping series count as zero rows.
    """
    try:
        _, ip, *_ = _align(p, q, lambda_pq, lambda_qp, gamma, conditioners, include_past)
    except (InvalidWindowError, AlignmentError):
        return 0
    return len(ip)


def compatible_configs(
    p: TimeSeries,
    q: TimeSeries,
    lambda_max: int,
    gamma_max: int,
    *,
    include_past: bool = True,
    min_samples: int | None = None,
) -> list[tuple[int, int, int]]:
    """
    Enumerate the window sizes and gaps for which a joint sample set can be built.
    The order is `lambda_pq` ascending, then `lambda_qp` ascending, then `gamma` ascending.

    :raise NoCompatibleConfigError: if no configuration is feasible
    """
    if lambda_max < 1:
        raise InvalidWindowError("lambda_max must be at least 1.")
    if min_samples is None:
        min_samples = config.min_samples

    if not _spans_overlap(p, q):
        raise NoCompatibleConfigError(
            f"Series {p.name} and {q.name} cannot be compared: no overlap in time."
        )

    found: list[tuple[int, int, int]] = []
    for lambda_pq in range(1, lambda_max + 1):
        for lambda_qp in range(1, lambda_max + 1):
            for gamma in range(-gamma_max, gamma_max + 1):
                n = count_joint_rows(p, q, lambda_pq, lambda_qp, gamma, (), include_past)
                if n >= max(min_samples, 1):
                    found.append((lambda_pq, lambda_qp, gamma))

    if not found:
        raise NoCompatibleConfigError(
            f"Series {p.name} and {q.name} cannot be compared under any configuration."
        )

    return found


def _infer_rate(name: str, times: np.ndarray) -> tuple[int, Fraction]:
    if len(times) < 2:
        return 1, Fraction(times[0]).limit_denominator(10**6) if len(times) else Fraction(0)

    spacing = np.diff(times)
    median = float(np.median(spacing))
    if median <= 0:
        raise InvalidDataError(f"Times of series {name} must strictly increase.")
    if not np.allclose(spacing, median, rtol=1e-6, atol=1e-9):
        raise InvalidDataError(f"Series {name} is not regularly sampled.")

    rate = round(1 / median)
    if rate < 1 or not np.isclose(rate * median, 1, rtol=1e-6):
        raise InvalidDataError(
            f"Series {name} has spacing {median}, not an integer number of observations per time unit."
        )

    start = Fraction(float(times[0])).limit_denominator(10**6)
    if (start * rate).denominator != 1:
        start = Fraction(round(float(times[0]) * rate), rate)
    return rate, start


def read_csv(
    path,
    layout: Literal["auto", "wide", "long"] = "auto",
    *,
    time_unit: str = "unit",
) -> Dataset:
    """
    Read a dataset from a CSV file.

    Wide layout: a header of series names, one column per series, optionally a leading `time` column;
    all series share the same rate.
    Long layout: columns `series`, `time`, `value`; the rate of each series is inferred from the
    median spacing of its time stamps and must be constant.

    :param path: file path or buffer accepted by `pandas.read_csv`
    :param layout: the layout, `auto` detects the long layout by its column names
    :param time_unit: documentation-only label of the time unit
    """
    frame = pd.read_csv(path)
    columns = [str(c).strip() for c in frame.columns]
    frame.columns = columns

    if layout == "auto":
        layout = "long" if {"series", "time", "value"} <= set(columns) else "wide"

    series: list[TimeSeries] = []
    if layout == "long":
        if not {"series", "time", "value"} <= set(columns):
            raise InvalidDataError("Long layout needs columns series, time and value.")
        for name, group in frame.groupby("series", sort=False):
            group = group.sort_values("time")
            values = group["value"].to_numpy(dtype=float)
            if not np.all(np.isfinite(values)):
                raise InvalidDataError(f"Series {name} has missing or non-finite values.")
            rate, start = _infer_rate(str(name), group["time"].to_numpy(dtype=float))
            series.append(TimeSeries(str(name), values, rate, start))
    else:
        rate, start = 1, Fraction(0)
        if columns and columns[0].lower() == "time":
            rate, start = _infer_rate("time", frame.iloc[:, 0].to_numpy(dtype=float))
            frame = frame.iloc[:, 1:]
        for name in frame.columns:
            values = frame[name].to_numpy(dtype=float)
            if not np.all(np.isfinite(values)):
                raise InvalidDataError(f"Series {name} has missing or non-finite values.")
            series.append(TimeSeries(str(name), values, rate, start))

    logger.info("Read %d series from %s (%s layout).", len(series), path, layout)
    return Dataset(series, time_unit)


def write_csv(data: Dataset, path, layout: Literal["auto", "wide", "long"] = "auto"):
    """
    Write a dataset in the layouts understood by `read_csv`.
    The wide layout is only possible when all series share rate, start time and length.
    """
    shared = (
        len({(s.rate, s.start_time, len(s)) for s in data}) == 1
        if len(data)
        else True
    )
    if layout == "auto":
        layout = "wide" if shared else "long"
    if layout == "wide" and not shared:
        raise InvalidDataError("Wide layout requires equal rates, start times and lengths.")

    if layout == "wide":
        first = data[0]
        frame = pd.DataFrame(
            {"time": [float(first.time(i)) for i in range(len(first))]}
            | {s.name: s.values for s in data}
        )
    else:
        frame = pd.concat(
            [
                pd.DataFrame(
                    {
                        "series": s.name,
                        "time": [float(s.time(i)) for i in range(len(s))],
                        "value": s.values,
                    }
                )
                for s in data
            ],
            ignore_index=True,
        )

    frame.to_csv(path, index=False)
