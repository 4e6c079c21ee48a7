import numpy as np
import pytest

from binoise import VarianceSchedule, build_linear_schedule, default_schedule


def test_linear_t4_hand_values(sched4):
    assert np.allclose(sched4.betas, [0.1, 0.2, 0.3, 0.4], rtol=0, atol=1e-15)
    assert np.allclose(sched4.alphas, [0.9, 0.8, 0.7, 0.6], rtol=0, atol=1e-15)
    # hand-computed cumulative product
    assert np.allclose(sched4.alpha_bars, [0.9, 0.72, 0.504, 0.3024], rtol=1e-12)
    assert np.allclose(sched4.sigmas, np.sqrt([0.1, 0.2, 0.3, 0.4]), rtol=1e-15)


def test_single_step_schedule():
    s = build_linear_schedule(1, 0.5, 0.5)
    assert s.T == 1
    assert np.allclose(s.betas, [0.5])
    assert np.allclose(s.alpha_bars, [0.5])


def test_long_schedule_terminal_attenuation():
    s = build_linear_schedule(1000, 1e-4, 0.02)
    assert s.alpha_bars[-1] < 5e-5
    # frozen regression value (independently computed cumulative product)
    assert np.isclose(s.alpha_bars[-1], 4.035829765375676e-05, rtol=1e-10)


def test_default_schedule_rescaled():
    s = default_schedule(100)
    assert s.T == 100
    assert np.isclose(s.betas[0], 1e-3)
    assert np.isclose(s.betas[-1], 0.2)
    # short schedule keeps a near-pure-noise terminal state
    assert np.isclose(s.alpha_bars[-1], 2.039008975564078e-05, rtol=1e-10)


def test_lookup_values(sched4):
    beta, alpha, alpha_bar, sigma = sched4.lookup(2)
    assert np.isclose(beta, 0.2)
    assert np.isclose(alpha, 0.8)
    assert np.isclose(alpha_bar, 0.72)
    assert np.isclose(sigma, np.sqrt(0.2))


def test_lookup_t1_alpha_bar_equals_alpha(sched4):
    c = sched4.lookup(1)
    assert c.alpha_bar == c.alpha


@pytest.mark.parametrize("t", [0, 5, -1])
def test_lookup_out_of_range(sched4, t):
    with pytest.raises(ValueError):
        sched4.lookup(t)


def test_lookup_rejects_float_timestep(sched4):
    with pytest.raises(TypeError):
        sched4.lookup(1.5)


def test_alpha_bars_strictly_decreasing(sched100):
    assert np.all(np.diff(sched100.alpha_bars) < 0)


def test_alpha_bar_recurrence(sched100):
    # for t >= 2: abar_t = abar_{t-1} * alpha_t
    recomputed = np.cumprod(sched100.alphas)
    assert np.allclose(recomputed, sched100.alpha_bars, rtol=1e-12)
    ratio = sched100.alpha_bars[1:] / sched100.alpha_bars[:-1]
    assert np.allclose(ratio, sched100.alphas[1:], rtol=1e-12)


def test_sigma_identity(sched100):
    assert np.allclose(sched100.sigmas**2 + sched100.alphas, 1.0, rtol=0, atol=1e-15)


@pytest.mark.parametrize(
    "T,lo,hi",
    [(0, 0.1, 0.2), (3, 0.0, 0.2), (3, 0.1, 1.0), (3, 0.3, 0.2), (3, -0.1, 0.2)],
)
def test_invalid_construction(T, lo, hi):
    with pytest.raises(ValueError):
        build_linear_schedule(T, lo, hi)


def test_beta_range_validated_directly():
    with pytest.raises(ValueError):
        VarianceSchedule(np.array([0.1, 1.0]))
    with pytest.raises(ValueError):
        VarianceSchedule(np.array([]))


def test_arrays_are_frozen(sched4):
    with pytest.raises(ValueError):
        sched4.betas[0] = 0.5
    with pytest.raises(ValueError):
        sched4.alpha_bars[0] = 0.5
