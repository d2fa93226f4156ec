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
import zlib
from fractions import Fraction
from math import lcm

import numpy as np


def checksum(*keys) -> int:
    """
    A checksum that does not change between interpreter runs, unlike `hash`.
    Arrays are hashed by content, everything else by its string form.
    """
    value: int = 0
    for key in keys:
        if isinstance(key, np.ndarray):
            data = np.ascontiguousarray(key).tobytes()
        else:
            data = str(key).encode()
        value = zlib.crc32(data, value)
    return value


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """
    Create a generator whose stream depends only on the seed and the keys.
    Used wherever results must not depend on evaluation order or scheduling.
    """
    return np.random.default_rng([seed & 0xFFFFFFFF, checksum(*keys)])


def common_denominator(*values: Fraction | int) -> int:
    denominator: int = 1
    for v in values:
        denominator = lcm(denominator, Fraction(v).denominator)
    return denominator


def setup_logging(verbosity: int = 0):
    """
    Attach a stream handler to the package logger, used by the command line interface only.

    :param verbosity: 0 for warnings, 1 for info, 2 or more for debug messages
    """
    level = (
        logging.WARNING
        if verbosity <= 0
        else logging.INFO
        if verbosity == 1
        else logging.DEBUG
    )
    logger = logging.getLogger("pctmi")
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        )
        logger.addHandler(handler)
    logger.setLevel(level)
