import os

import pytest

import nestfrag.globals as globals
from nestfrag.utils.mass_partitions.mass_partitions import load_params

FIXTURES = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config', 'fixtures')


@pytest.fixture(autouse=True)
def default_config():
    # every test starts from the built-in defaults
    globals.CONFIG.clear()
    globals.CONFIG.update(globals.DEFAULTS)
    yield globals.CONFIG
    globals.CONFIG.clear()
    globals.CONFIG.update(globals.DEFAULTS)


@pytest.fixture
def mixed_path():
    return os.path.join(FIXTURES, 'mixed_params.json')


@pytest.fixture
def binary_path():
    return os.path.join(FIXTURES, 'binary_params.json')


@pytest.fixture
def mixed_params(mixed_path):
    return load_params(mixed_path)


@pytest.fixture
def binary_params(binary_path):
    return load_params(binary_path)
