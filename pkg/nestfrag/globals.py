import os

import yaml

from nestfrag.errors import NestFragError

# Configuration file, overridable from the environment
CONFIG_PATH = os.getenv(
    'NESTFRAG_CONFIG',
    os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config', 'nestfrag_config.yaml'),
)

# Seed fallback when --seed is not given
SEED_ENV_VAR = 'NESTFRAG_SEED'

# API bind address override, used by the container
HOST_ENV_VAR = 'NESTFRAG_HOST'

DEFAULTS = {
    # enumeration and oracle caps
    'partition_cap': 8,
    'nested_cap': 6,
    'oracle_cap': 6,
    'brute_force_cap': 5,
    'inner_block_cap': 6,
    # numerical tolerances
    'tolerance': 1e-9,
    'rate_tolerance': 1e-10,
    'consistency_tolerance': 1e-9,
    # statistical thresholds
    'z_bound': 4.0,
    'chi2_alpha': 0.001,
    'min_jumps': 1000,
    'min_expected': 5.0,
    'lln_sigmas': 3.0,
    # simulation
    'empirical_horizon': 50.0,
    'default_max_events': 100000,
    'replica_workers': 4,
    # api
    'host': '127.0.0.1',
    'port': 8080,
}

CONFIG = dict(DEFAULTS)


def load_config(path=None):
    """
    Load the YAML configuration and merge it over the built-in defaults.

    Args:
        path (str): Path to a YAML file; CONFIG_PATH when omitted

    Returns:
        dict: The merged configuration, also stored in CONFIG
    """
    path = path or CONFIG_PATH
    values = {}
    if os.path.exists(path):
        try:
            with open(path) as f:
                values = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise NestFragError("BAD_CONFIG", f"cannot read {path}: {e}")
    if not isinstance(values, dict):
        raise NestFragError("BAD_CONFIG", f"{path} must hold a mapping")

    merged = dict(DEFAULTS)
    for key, value in values.items():
        if key not in DEFAULTS:
            raise NestFragError("BAD_CONFIG", f"unknown key {key!r}")
        expected = type(DEFAULTS[key])
        # ints are acceptable where floats are expected
        if expected is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, expected) or isinstance(value, bool):
            raise NestFragError("BAD_CONFIG", f"{key} must be {expected.__name__}")
        merged[key] = value

    if os.getenv(HOST_ENV_VAR):
        merged['host'] = os.getenv(HOST_ENV_VAR)

    CONFIG.clear()
    CONFIG.update(merged)
    return CONFIG


def env_seed():
    value = os.getenv(SEED_ENV_VAR)
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        raise NestFragError("BAD_CONFIG", f"{SEED_ENV_VAR} must be an integer, got {value!r}")
