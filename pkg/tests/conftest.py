import math
import os
import tempfile

os.environ.setdefault("LOG_DIR", tempfile.mkdtemp(prefix="gradiometer-logs-"))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from sensing.estimation import TubeArray  # noqa: E402


class LorentzianResponse:
    """
    Аналитический отклик трубки: φ(B) = atan((B - B*)/w), T = cos² φ.
    F = 4/(w²(1 + u²)²), минимум ΔB = w/2 в центре.
    """

    def __init__(self, center: float, width: float):
        self.center = center
        self.width = width

    def phase(self, B: float) -> float:
        return math.atan((B - self.center) / self.width)

    def evaluate(self, fields):
        u = (np.atleast_1d(np.asarray(fields, dtype=float)) - self.center) / self.width
        T = 1.0 / (1.0 + u ** 2)
        R = u ** 2 / (1.0 + u ** 2)
        slope = 1.0 / (self.width * (1.0 + u ** 2))
        dT = -2.0 * u / (1.0 + u ** 2) * slope
        return T, dT, R


def line_array(count: int, spacing_mm: float = 1.0) -> TubeArray:
    """Один ряд трубок вдоль x с центром в нуле."""
    xs = (np.arange(count) - (count - 1) / 2.0) * spacing_mm
    return TubeArray(np.column_stack([xs, np.zeros(count)]), spacing_mm, (count, 1))


@pytest.fixture
def lorentzian():
    return LorentzianResponse(center=0.0123, width=0.02)


@pytest.fixture
def small_line():
    return line_array(5)


@pytest.fixture
def small_grid():
    return TubeArray.grid(3, 3, 1.0e6)
