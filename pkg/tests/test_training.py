import numpy as np
import pytest

from binoise import (
    AdamState,
    TrainConfig,
    WeightVector,
    VarianceSchedule,
    adam_step,
    build_linear_schedule,
    ema_fuse,
    loss_corr,
    loss_final,
    loss_simple,
    train,
)
from binoise.tasks import PairedDataset
from binoise.training import TrainingDiverged
from binoise.nets import make_mlp

from test_nets import assert_grads_match, finite_difference_grads


@pytest.fixture
def sched():
    return build_linear_schedule(8, 0.02, 0.3)


def small_net(conditional=True, seed=0):
    return make_mlp([4], conditional=conditional, hidden=[5], temb_dim=4, seed=seed)


def batch(rng, n=3, d=4):
    return rng.standard_normal((n, d)), rng.standard_normal((n, d))


# ---------------------------------------------------------------------------
# config validation


def test_train_config_defaults():
    cfg = TrainConfig()
    assert cfg.lambda_corr == 0.001
    assert cfg.ema_alpha == 0.999


@pytest.mark.parametrize(
    "kw",
    [
        {"learning_rate": -1.0},
        {"learning_rate": float("nan")},
        {"batch_size": 0},
        {"steps": 0},
        {"lambda_corr": -0.1},
        {"ema_alpha": 1.5},
        {"null_token_prob": 2.0},
    ],
)
def test_train_config_rejects_invalid(kw):
    with pytest.raises(ValueError):
        TrainConfig(**kw)


# ---------------------------------------------------------------------------
# losses


class StubNet:
    """Fixed-output denoiser with a zero gradient, for loss arithmetic tests."""

    is_conditional = False

    def __init__(self, output):
        self.output = np.asarray(output, dtype=np.float64)

    def forward(self, y, t, condition=None, null_flag=0.0):
        return np.broadcast_to(self.output, np.shape(y)).copy(), None

    def backward(self, dout, caches):
        return np.zeros(1)


class IdentityStub(StubNet):
    """Echoes its input; exposes the loss dependence on the noised inputs."""

    def __init__(self):
        pass

    def forward(self, y, t, condition=None, null_flag=0.0):
        return np.array(y, copy=True), None


def test_loss_simple_perfect_predictor_is_zero(sched):
    g = np.random.default_rng(0)
    _, y0 = batch(g)
    eps = g.standard_normal(y0.shape)

    class Perfect(StubNet):
        def forward(self, y, t, condition=None, null_flag=0.0):
            return eps.copy(), None

    loss, grads = loss_simple(Perfect(np.zeros(1)), None, y0, 3, eps, sched)
    assert loss == 0.0
    assert np.array_equal(grads, np.zeros(1))


def test_loss_simple_zero_predictor_is_unit(sched):
    # E[eps^2] = 1 per element for standard normal noise
    g = np.random.default_rng(1)
    y0 = np.zeros((4096, 8))
    eps = g.standard_normal(y0.shape)
    loss, _ = loss_simple(StubNet(np.zeros(8)), None, y0, 2, eps, sched)
    expect = float(np.mean(eps * eps))
    assert loss == pytest.approx(expect, rel=1e-12)
    assert loss == pytest.approx(1.0, rel=0.05)


def test_loss_simple_gradcheck(sched):
    net = small_net()
    g = np.random.default_rng(3)
    x0, y0 = batch(g)
    eps = g.standard_normal(y0.shape)
    t = np.array([1, 4, 8])
    _, analytic = loss_simple(net, x0, y0, t, eps, sched)
    numeric = finite_difference_grads(net, lambda: loss_simple(net, x0, y0, t, eps, sched)[0])
    assert_grads_match(analytic, numeric)


def test_loss_corr_gradcheck(sched):
    net = small_net()
    g = np.random.default_rng(4)
    x0, y0 = batch(g)
    eps = g.standard_normal(y0.shape)
    t = np.array([2, 5, 7])
    _, analytic = loss_corr(net, x0, y0, t, eps, sched)
    numeric = finite_difference_grads(net, lambda: loss_corr(net, x0, y0, t, eps, sched)[0])
    assert_grads_match(analytic, numeric)


def test_loss_corr_zero_when_no_degradation(sched):
    net = small_net()
    g = np.random.default_rng(5)
    _, y0 = batch(g)
    eps = g.standard_normal(y0.shape)
    loss, grads = loss_corr(net, y0.copy(), y0, 3, eps, sched)
    assert loss == 0.0
    assert np.array_equal(grads, np.zeros(net.n_params))


def test_loss_corr_constant_predictor_is_zero(sched):
    g = np.random.default_rng(6)
    x0, y0 = batch(g)
    eps = g.standard_normal(y0.shape)
    loss, _ = loss_corr(StubNet(np.full(4, 0.7)), x0, y0, 2, eps, sched)
    assert loss == 0.0


def test_loss_corr_scales_with_alpha():
    # two schedules with the same abar_2 but alpha_2 doubled: with an
    # input-echo model the loss doubles exactly
    sched_a = VarianceSchedule(np.array([0.1, 0.6]))   # alpha_2 = 0.4
    sched_b = VarianceSchedule(np.array([0.55, 0.2]))  # alpha_2 = 0.8
    assert np.isclose(sched_a.alpha_bars[1], sched_b.alpha_bars[1])
    g = np.random.default_rng(7)
    x0, y0 = batch(g)
    eps = g.standard_normal(y0.shape)
    la, _ = loss_corr(IdentityStub(), x0, y0, 2, eps, sched_a)
    lb, _ = loss_corr(IdentityStub(), x0, y0, 2, eps, sched_b)
    assert lb == pytest.approx(2.0 * la, rel=1e-12)


def test_loss_corr_symmetric_under_pair_swap(sched):
    # unconditional model: swapping the clean/degraded roles negates the
    # prediction gap, leaving the loss (and, by linearity of the backward
    # pass, the gradient) unchanged
    net = small_net(conditional=False)
    g = np.random.default_rng(8)
    x0, y0 = batch(g)
    eps = g.standard_normal(y0.shape)
    la, ga = loss_corr(net, x0, y0, 4, eps, sched)
    lb, gb = loss_corr(net, y0, x0, 4, eps, sched)
    assert la == lb
    assert np.allclose(ga, gb, atol=1e-15)


def test_loss_final_lambda_zero_is_loss_simple_bitwise(sched):
    net = small_net()
    g = np.random.default_rng(9)
    x0, y0 = batch(g)
    eps = g.standard_normal(y0.shape)
    cfg = TrainConfig(lambda_corr=0.0, corr_enabled=True)
    total, ls, lc, grads = loss_final(net, x0, y0, 3, eps, sched, cfg)
    ref_loss, ref_grads = loss_simple(net, x0, y0, 3, eps, sched)
    assert total == ref_loss and ls == ref_loss and lc == 0.0
    assert np.array_equal(grads, ref_grads)


def test_loss_final_disabled_corr_is_loss_simple_bitwise(sched):
    net = small_net()
    g = np.random.default_rng(10)
    x0, y0 = batch(g)
    eps = g.standard_normal(y0.shape)
    cfg = TrainConfig(lambda_corr=0.5, corr_enabled=False)
    total, _, lc, grads = loss_final(net, x0, y0, 3, eps, sched, cfg)
    ref_loss, ref_grads = loss_simple(net, x0, y0, 3, eps, sched)
    assert total == ref_loss and lc == 0.0
    assert np.array_equal(grads, ref_grads)


def test_loss_final_weighted_sum(sched):
    net = small_net()
    g = np.random.default_rng(11)
    x0, y0 = batch(g)
    eps = g.standard_normal(y0.shape)
    cfg = TrainConfig(lambda_corr=0.5, corr_enabled=True)
    total, ls, lc, grads = loss_final(net, x0, y0, 3, eps, sched, cfg)
    ref_ls, ref_gs = loss_simple(net, x0, y0, 3, eps, sched)
    ref_lc, ref_gc = loss_corr(net, x0, y0, 3, eps, sched)
    assert total == ref_ls + 0.5 * ref_lc
    assert (ls, lc) == (ref_ls, ref_lc)
    assert np.array_equal(grads, ref_gs + 0.5 * ref_gc)


def test_loss_final_hand_arithmetic():
    # L_simple = 2.0, L_corr = 3.0, lambda = 0.5 -> 3.5
    assert 2.0 + 0.5 * 3.0 == 3.5


# ---------------------------------------------------------------------------
# EMA fusion


def test_ema_endpoints_exact():
    a = WeightVector(np.array([1.0, 2.0]), "f")
    b = WeightVector(np.array([3.0, 4.0]), "f")
    assert np.array_equal(ema_fuse(a, b, 1.0).values, a.values)
    assert np.array_equal(ema_fuse(a, b, 0.0).values, b.values)
    # endpoint results are copies, not aliases
    fused = ema_fuse(a, b, 1.0)
    fused.values[0] = 99.0
    assert a.values[0] == 1.0


def test_ema_scalar_case():
    a = WeightVector(np.array([1.0]), "f")
    b = WeightVector(np.array([0.0]), "f")
    assert ema_fuse(a, b, 0.9).values[0] == pytest.approx(0.9, abs=1e-15)


def test_ema_affine_identity():
    g = np.random.default_rng(12)
    a = WeightVector(g.standard_normal(16), "f")
    b = WeightVector(g.standard_normal(16), "f")
    s = ema_fuse(a, b, 0.37).values + ema_fuse(b, a, 0.37).values
    assert np.max(np.abs(s - (a.values + b.values))) < 1e-12


def test_ema_errors():
    a = WeightVector(np.zeros(2), "f")
    b = WeightVector(np.zeros(2), "g")
    with pytest.raises(ValueError):
        ema_fuse(a, b, 0.5)
    c = WeightVector(np.zeros(3), "f")
    with pytest.raises(ValueError):
        ema_fuse(a, c, 0.5)
    d = WeightVector(np.zeros(2), "f")
    with pytest.raises(ValueError):
        ema_fuse(a, d, 1.5)


# ---------------------------------------------------------------------------
# Adam


def test_adam_zero_grads_keep_weights_from_rest():
    w = np.array([1.0, -2.0])
    w2, s2 = adam_step(w, np.zeros(2), AdamState.zeros(2), lr=0.1)
    assert np.array_equal(w2, w)
    assert s2.step == 1


def test_adam_zero_grads_decay_moments():
    state = AdamState(m=np.array([0.4, 0.4]), v=np.array([0.2, 0.2]), step=3)
    _, s2 = adam_step(np.zeros(2), np.zeros(2), state, lr=0.1)
    assert np.allclose(s2.m, 0.9 * state.m)
    assert np.allclose(s2.v, 0.999 * state.v)
    assert s2.step == 4


def test_adam_first_step_is_signed_lr():
    w = np.zeros(3)
    g = np.array([3.0, -0.01, 1e4])
    w2, _ = adam_step(w, g, AdamState.zeros(3), lr=1e-3)
    # bias-corrected first step: lr * g / (|g| + eps) = lr * sign(g)
    assert np.allclose(w2, -1e-3 * np.sign(g), rtol=1e-5)


def test_adam_zero_lr_keeps_weights():
    w = np.array([0.5, 0.5])
    w2, _ = adam_step(w, np.array([1.0, -1.0]), AdamState.zeros(2), lr=0.0)
    assert np.array_equal(w2, w)


def test_adam_deterministic():
    g = np.random.default_rng(13)
    w = g.standard_normal(8)
    gr = g.standard_normal(8)
    a = adam_step(w, gr, AdamState.zeros(8), lr=1e-2)
    b = adam_step(w, gr, AdamState.zeros(8), lr=1e-2)
    assert np.array_equal(a[0], b[0])


def test_adam_rejects_bad_grads():
    with pytest.raises(ValueError):
        adam_step(np.zeros(2), np.array([np.nan, 0.0]), AdamState.zeros(2), lr=0.1)
    with pytest.raises(ValueError):
        adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2), lr=0.1)


# ---------------------------------------------------------------------------
# training loop


def toy_pairs(n=24, d=4, seed=0):
    g = np.random.default_rng(seed)
    y0 = g.uniform(-1, 1, (n, d))
    x0 = y0.mean(axis=1, keepdims=True) * np.ones((1, d))
    return PairedDataset(x0=x0, y0=y0)


def test_train_reduces_loss(sched):
    ds = toy_pairs()
    net = small_net()
    res = train(net, ds, TrainConfig(steps=200, batch_size=8, seed=1), sched)
    first = np.mean([r[1] for r in res.loss_curve[:20]])
    last = np.mean([r[1] for r in res.loss_curve[-20:]])
    assert last < first
    assert len(res.loss_curve) == 200


def test_train_deterministic(sched):
    ds = toy_pairs()
    runs = []
    for _ in range(2):
        net = small_net(seed=2)
        runs.append(train(net, ds, TrainConfig(steps=30, batch_size=4, seed=7), sched))
    assert np.array_equal(runs[0].weights.values, runs[1].weights.values)
    assert runs[0].loss_curve == runs[1].loss_curve


def test_train_zero_lr_keeps_weights(sched):
    ds = toy_pairs()
    net = small_net(seed=3)
    w0 = net.get_weights()
    res = train(net, ds, TrainConfig(steps=10, batch_size=4, learning_rate=0.0, seed=0), sched)
    assert np.array_equal(res.weights.values, w0)


def test_train_unconditional(sched):
    ds = toy_pairs()
    net = small_net(conditional=False, seed=4)
    res = train(net, ds, TrainConfig(steps=20, batch_size=4, seed=0), sched)
    assert np.all(np.isfinite(res.weights.values))


def test_train_null_token_dropout_changes_run(sched):
    ds = toy_pairs()
    base = small_net(seed=5)
    with_drop = small_net(seed=5)
    r1 = train(base, ds, TrainConfig(steps=20, batch_size=4, seed=2), sched)
    r2 = train(with_drop, ds, TrainConfig(steps=20, batch_size=4, seed=2, null_token_prob=0.5), sched)
    assert not np.array_equal(r1.weights.values, r2.weights.values)


def test_train_ema_fusion_alpha_zero_pins_to_pretrained(sched):
    ds = toy_pairs()
    net = small_net(seed=6)
    pre = WeightVector(np.linspace(-1, 1, net.n_params), net.fingerprint)
    res = train(net, ds, TrainConfig(steps=5, batch_size=4, seed=0, ema_alpha=0.0), sched, pretrained=pre)
    assert np.array_equal(res.weights.values, pre.values)


def test_train_ema_fingerprint_mismatch(sched):
    ds = toy_pairs()
    net = small_net(seed=0)
    pre = WeightVector(np.zeros(net.n_params), "other-arch")
    with pytest.raises(ValueError):
        train(net, ds, TrainConfig(steps=2), sched, pretrained=pre)


def test_train_divergence_reports_step(sched):
    ds = toy_pairs()
    net = small_net(seed=0)
    net.set_weights(np.full(net.n_params, 1e300))
    with pytest.raises(TrainingDiverged) as e:
        train(net, ds, TrainConfig(steps=5, batch_size=4, seed=0), sched)
    assert e.value.step == 0
