"""dB <-> linear conversions used at I/O boundaries."""

import math

import numpy as np


def db_to_linear(value_db):
    """Convert a power ratio in dB to linear scale. +inf maps to +inf."""
    if np.ndim(value_db) == 0:
        return math.inf if value_db == math.inf else 10.0 ** (float(value_db) / 10.0)
    return np.power(10.0, np.asarray(value_db, dtype=float) / 10.0)


def linear_to_db(value):
    """Convert a linear power ratio to dB. Zero maps to -inf."""
    if np.ndim(value) == 0:
        value = float(value)
        if value <= 0.0:
            return -math.inf
        return 10.0 * math.log10(value)
    with np.errstate(divide='ignore'):
        return 10.0 * np.log10(np.asarray(value, dtype=float))
