"""Python access to the pacfl experiment core.

Configs are plain dicts with the same layout as the CLI's JSON config files.
"""

import json

from . import _core
from ._core import (
    ConfigError,
    IoError,
    NumericError,
    bound_names,
    covering_number,
    log_covering_number,
    not_pac_condition,
    privacy_upper_bound,
    private_pac_sample_size,
    sample_lower_bound,
    trial_seed,
    utility_upper_bound,
    utility_upper_bound_he,
)

__all__ = [
    "ConfigError", "IoError", "NumericError", "bound_names", "covering_number",
    "log_covering_number", "not_pac_condition", "privacy_upper_bound",
    "private_pac_sample_size", "sample_lower_bound", "trial_seed", "utility_upper_bound",
    "utility_upper_bound_he", "default_config", "normalize_config", "run_trial",
    "verify_bound", "train", "attack", "verify", "sweep", "estimate_constants",
]


def _text(config):
    if config is None:
        return "{}"
    return config if isinstance(config, str) else json.dumps(config)


def default_config():
    return json.loads(_core.default_config())


def normalize_config(config):
    """Fills defaults and validates; raises ConfigError on bad input."""
    return json.loads(_core.normalize_config(_text(config)))


def run_trial(config=None, trial=0):
    return json.loads(_core.run_trial(_text(config), trial))


def verify_bound(bound, config=None):
    return json.loads(_core.verify_bound(bound, _text(config)))


# The functions below mirror the CLI subcommands and return (exit_code, log).
def train(config=None):
    return _core.train(_text(config))


def attack(config, run_dir, dump_trajectory=False):
    return _core.attack(_text(config), str(run_dir), dump_trajectory)


def verify(config, bound="privacy"):
    return _core.verify(_text(config), bound)


def sweep(config, axis, values):
    return _core.sweep(_text(config), axis, list(values))


def estimate_constants(config=None):
    return _core.estimate_constants(_text(config))
