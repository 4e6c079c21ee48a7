import numpy as np
import pytest

from binoise import VarianceSchedule, build_linear_schedule, default_schedule


@pytest.fixture
def sched4() -> VarianceSchedule:
    # betas [0.1, 0.2, 0.3, 0.4] -> alpha_bars [0.9, 0.72, 0.504, 0.3024]
    return build_linear_schedule(4, 0.1, 0.4)


@pytest.fixture
def sched100() -> VarianceSchedule:
    return default_schedule(100)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
