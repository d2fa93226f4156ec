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
import logging
from dataclasses import fields
from fractions import Fraction

import numpy as np
import pytest

from pctmi.config import (
    Config,
    DiscoveryConfig,
    KnnParams,
    PermutationParams,
    config,
    configure,
)
from pctmi.errors import InvalidConfigError
from pctmi.utility import checksum, common_denominator, derive_rng, setup_logging


@pytest.fixture(scope="function")
def restore_config(monkeypatch):
    for f in fields(Config):
        monkeypatch.setattr(config, f.name, getattr(config, f.name))


def test_configure_with_valid_values(restore_config):
    configure(
        min_samples=20,
        knn_k=4,
        jitter_scale=1e-8,
        n_permutations=30,
        perm_neighbors=3,
        alpha=0.01,
        lambda_max=2,
        gamma_max=3,
        tie_tolerance=1e-9,
        n_jobs=-1,
        cond_sweeps=1,
        self_loops=False,
    )
    assert config.min_samples == 20
    assert config.knn_k == 4
    assert config.jitter_scale == 1e-8
    assert config.alpha == 0.01
    assert config.n_jobs == -1
    assert config.self_loops is False

    cfg = DiscoveryConfig()
    assert cfg.bounds == (2, 3)
    assert cfg.knn.k == 4
    assert cfg.perm.n_permutations == 30
    assert cfg.perm.local_neighbors == 3
    assert cfg.min_samples == 20


def test_configure_ignores_invalid_values(restore_config):
    configure(knn_k=0, alpha=1.5, n_jobs=0, lambda_max="3", self_loops=1, jitter_scale=0)
    assert config.knn_k == 10
    assert config.alpha == 0.05
    assert config.n_jobs == 1
    assert config.lambda_max == 5
    assert config.self_loops is True
    assert config.jitter_scale == 1e-10


def test_discovery_config_from_mapping():
    cfg = DiscoveryConfig.from_mapping(
        {"lambda_max": 2, "knn_k": 3, "n_permutations": 9, "seed": 4, "transform": "rank"}
    )
    assert cfg.lambda_max == 2
    assert cfg.knn == KnnParams(k=3, seed=4, transform="rank")
    assert cfg.perm.n_permutations == 9
    assert cfg.seed == 4

    with pytest.raises(InvalidConfigError):
        DiscoveryConfig.from_mapping({"lambda": 2})


def test_discovery_config_validation():
    with pytest.raises(InvalidConfigError):
        DiscoveryConfig(lambda_max=0)
    with pytest.raises(InvalidConfigError):
        DiscoveryConfig(alpha=1.0)
    with pytest.raises(InvalidConfigError):
        PermutationParams(alpha=0)
    with pytest.raises(InvalidConfigError):
        KnnParams(transform="log")
    with pytest.raises(InvalidConfigError):
        KnnParams(jitter_scale=0)

    cfg = DiscoveryConfig(alpha=0.1, perm=PermutationParams(alpha=0.2))
    assert cfg.perm.alpha == 0.1


def test_checksum_is_stable():
    assert checksum("a", 1) == checksum("a", 1)
    assert checksum("a", 1) != checksum("a", 2)
    assert checksum(np.arange(3.0)) == checksum(np.arange(3.0))

    first = derive_rng(7, "x").standard_normal(4)
    second = derive_rng(7, "x").standard_normal(4)
    assert np.array_equal(first, second)
    assert not np.array_equal(first, derive_rng(7, "y").standard_normal(4))


def test_common_denominator():
    assert common_denominator(0.5, 1, 0.25) == 4
    assert common_denominator(1, 2) == 1
    assert common_denominator(Fraction(1, 3), 0.5) == 6


def test_setup_logging():
    setup_logging(2)
    logger = logging.getLogger("pctmi")
    assert logger.level == logging.DEBUG
    assert len(logger.handlers) == 1

    setup_logging(0)
    assert logger.level == logging.WARNING
    assert len(logger.handlers) == 1
