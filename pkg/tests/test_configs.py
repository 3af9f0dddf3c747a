"""Shipped example configs must validate and cover every experiment kind."""
import json
from pathlib import Path

import pytest

from knlb.experiments import KINDS, ExperimentConfig

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
CONFIG_FILES = sorted(CONFIG_DIR.glob("*.json"))


def test_examples_exist_for_every_kind():
    kinds = {json.loads(p.read_text())["kind"] for p in CONFIG_FILES}
    assert kinds == set(KINDS)


@pytest.mark.parametrize("path", CONFIG_FILES, ids=lambda p: p.name)
def test_example_validates(path):
    cfg = ExperimentConfig.from_dict(json.loads(path.read_text()))
    for idx in range(len(cfg.grid)):
        point = cfg.resolve_point(idx)
        assert point.n >= 2 and point.d >= 2
