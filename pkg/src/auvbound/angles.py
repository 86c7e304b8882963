"""Angle helpers shared by every module.

All angles are radians internally and normalised to (-pi, pi].
"""

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap(angle: float) -> float:
    """Normalise a scalar angle to (-pi, pi]."""
    a = math.fmod(angle, TWO_PI)
    if a <= -math.pi:
        a += TWO_PI
    elif a > math.pi:
        a -= TWO_PI
    return a


def wrap_array(angles):
    """Vectorised :func:`wrap`."""
    a = np.fmod(np.asarray(angles, dtype=float), TWO_PI)
    a = np.where(a <= -np.pi, a + TWO_PI, a)
    return np.where(a > np.pi, a - TWO_PI, a)


def angle_diff(target: float, current: float) -> float:
    """Signed shortest rotation taking ``current`` onto ``target``."""
    return wrap(target - current)
