"""Shared fixtures: one generated scenario reused across test modules."""

from __future__ import annotations

import pytest

from botdetect.chain import load_chain_data
from botdetect.config import load_config
from botdetect.fixture import generate_fixture


@pytest.fixture(scope="session")
def scenario_dir(tmp_path_factory):
    """A generated scenario (seed 1, scale 1) shared by the whole session."""
    path = tmp_path_factory.mktemp("scenario")
    generate_fixture(str(path), seed=1, scale=1)
    return path


@pytest.fixture(scope="session")
def scenario_config(scenario_dir):
    return load_config(str(scenario_dir / "run.json"))


@pytest.fixture(scope="session")
def scenario_chain(scenario_config):
    cfg = scenario_config
    return load_chain_data(cfg.blocks, cfg.txs, cfg.logs, cfg.block_range)
