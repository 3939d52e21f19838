# Copyright (c) 2026, The lodrank Authors
# SPDX-License-Identifier: Apache-2.0
"""Ordered low-rank factorized LeNet: training runs, pruning and theory runs."""

import json as _json

from ._core import (
    ConfigError,
    ContractError,
    FormatError,
    IoError,
    Model,
    ShapeError,
    config_reference,
    format_config_text,
    greedy_prune,
    load_checkpoint,
    make_lenet,
    _run_config_text,
)

__all__ = [
    "ConfigError",
    "ContractError",
    "FormatError",
    "IoError",
    "Model",
    "ShapeError",
    "config_reference",
    "format_config_text",
    "greedy_prune",
    "load_checkpoint",
    "make_lenet",
    "run_config",
]


def run_config(text):
    """Runs an INI config given as text and returns its report as a dict."""
    return _json.loads(_run_config_text(text))
