import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make `reference` importable

from circlefuse import Circle, Detection


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_circle(rng, extent=400.0, r_range=(8.0, 40.0)) -> Circle:
    return Circle(
        float(rng.uniform(0, extent)),
        float(rng.uniform(0, extent)),
        float(rng.uniform(*r_range)),
    )


def as_detection(t) -> Detection:
    cx, cy, r, score, model_id = t
    return Detection(Circle(cx, cy, r), score, model_id)


def as_tuple(d: Detection):
    return (d.circle.cx, d.circle.cy, d.circle.r, d.score, d.model_id)
