from __future__ import annotations

import random

import numpy as np
import pytest

from dynfl.metric import validate


class ScriptedRng:
    """Stands in for random.Random; hands out preset uniforms and counts draws."""

    def __init__(self, values=()):
        self.values = list(values)
        self.draws = 0

    def random(self):
        self.draws += 1
        if not self.values:
            raise AssertionError("unexpected coin flip")
        return self.values.pop(0)

    def shuffle(self, xs):
        random.Random(0).shuffle(xs)


def euclid(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    return np.sqrt(((p[:, None, :] - p[None, :, :]) ** 2).sum(axis=-1))


@pytest.fixture
def scripted():
    return ScriptedRng


@pytest.fixture
def line_metric():
    # points on a line at 0, 0.1, 0.5, 1.0
    return validate(euclid([[0.0, 0.0], [0.1, 0.0], [0.5, 0.0], [1.0, 0.0]]))
