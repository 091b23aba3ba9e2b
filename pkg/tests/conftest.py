from __future__ import annotations

import os

import pytest

from hiergraph.corpus import load_dataset
from hiergraph.taxonomy import load_taxonomy

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


@pytest.fixture(scope="session")
def tree3():
    return load_taxonomy("radgraph2_depth3")


@pytest.fixture(scope="session")
def tree2():
    return load_taxonomy("radgraph2_depth2")


@pytest.fixture(scope="session")
def tree1():
    return load_taxonomy("radgraph1_depth2")


@pytest.fixture(scope="session")
def small_path():
    return os.path.join(FIXTURE_DIR, "synthetic_small.json")


@pytest.fixture(scope="session")
def small_ds(small_path):
    return load_dataset(small_path)
