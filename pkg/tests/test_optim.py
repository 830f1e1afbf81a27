import numpy as np
import pytest

from widenet import data as D
from widenet import model as M
from widenet import optim as O


def small_dataset(seed=0):
    return D.synth_classification(n=200, d=10, informative=4, classes=2,
                                  class_sep=2.0, seed=seed)


def make_net(m=32, d=10, k=2, alpha=1.0, seed=0, activation="tanh"):
    return M.init_net(m, d, k, alpha, activation,
                      M.InitSpec("gaussian", 1.0, seed))


def test_resolve_rates_practical():
    cfg = O.TrainConfig(eta=0.1, coupling="practical")
    assert O.resolve_rates(cfg, 10_000, 100.0) == (10.0, 0.1)


def test_resolve_rates_equal():
    cfg = O.TrainConfig(eta=0.1, coupling="ntk_equal")
    assert O.resolve_rates(cfg, 123, 7.0) == (0.1, 0.1)


def test_resolve_rates_scaled():
    cfg = O.TrainConfig(eta=0.1, coupling="ntk_scaled")
    eta_u, eta_theta = O.resolve_rates(cfg, 50, 100.0)
    assert eta_u == pytest.approx(0.001)
    assert eta_theta == 0.1


def test_resolve_rates_explicit():
    cfg = O.TrainConfig(eta=0.1, coupling="explicit", eta_u=3.0,
                        eta_theta=4.0)
    assert O.resolve_rates(cfg, 10, 1.0) == (3.0, 4.0)


def test_plain_step_is_exact_gd():
    net = make_net()
    cfg = O.TrainConfig(eta=0.05, coupling="ntk_equal", steps=1)
    state = O.make_state(net, cfg)
    gu = np.ones_like(net.u)
    gt = np.zeros_like(net.theta)
    u_before = net.u.copy()
    O.step(net, cfg, gu, gt, state)
    assert np.array_equal(net.u, u_before - 0.05 * gu)


def test_noise_variance():
    net = make_net(m=25_000, d=2, k=2)
    lam_p, eta = 0.3, 0.01
    cfg = O.TrainConfig(eta=eta, coupling="ntk_equal", lambda_p=lam_p,
                        steps=1, seed=9)
    state = O.make_state(net, cfg)
    u_before = net.u.copy()
    O.step(net, cfg, np.zeros_like(net.u), np.zeros_like(net.theta), state)
    delta = (net.u - u_before).ravel()
    var = delta.var()
    expected = 2 * lam_p * eta
    se = np.sqrt(2.0 / delta.size) * expected
    assert abs(var - expected) < 4 * se


def test_noisy_determinism():
    ds = small_dataset()
    loss = M.LossSpec("softmax_ce", 2)

    def run():
        net = make_net(seed=3)
        cfg = O.TrainConfig(eta=0.01, coupling="ntk_equal", lambda_p=0.01,
                            steps=20, seed=5, record_every=5)
        return O.train(net, ds, loss, M.RegSpec(), cfg)

    net_a, tr_a = run()
    net_b, tr_b = run()
    assert np.array_equal(net_a.u, net_b.u)
    assert tr_a.train_loss == tr_b.train_loss


def test_nan_gradient_aborts():
    net = make_net()
    cfg = O.TrainConfig(eta=0.1, steps=1)
    state = O.make_state(net, cfg)
    bad = np.full_like(net.u, np.nan)
    with pytest.raises(FloatingPointError):
        O.step(net, cfg, bad, np.zeros_like(net.theta), state)


def test_zero_steps():
    ds = small_dataset()
    net = make_net()
    u_before = net.u.copy()
    cfg = O.TrainConfig(eta=0.1, steps=0)
    net, trace = O.train(net, ds, M.LossSpec("softmax_ce", 2),
                         M.RegSpec(), cfg)
    assert np.array_equal(net.u, u_before)
    assert trace.dist_u == [0.0] and trace.dist_theta == [0.0]


def test_convex_top_layer_descent_monotone():
    # theta frozen via explicit eta_theta = 0: convex in u
    ds = small_dataset(seed=1)
    net = make_net(seed=1)
    cfg = O.TrainConfig(eta=0.5, coupling="explicit", eta_u=0.5,
                        eta_theta=0.0, steps=50, record_every=1)
    net, trace = O.train(net, ds, M.LossSpec("softmax_ce", 2),
                         M.RegSpec(), cfg)
    diffs = np.diff(trace.train_loss)
    assert (diffs <= 1e-12).all()


def test_full_batch_loss_nonincreasing_window():
    ds = small_dataset(seed=2)
    net = make_net(seed=2)
    cfg = O.TrainConfig(eta=0.05, coupling="ntk_equal", steps=50,
                        record_every=1)
    net, trace = O.train(net, ds, M.LossSpec("softmax_ce", 2),
                         M.RegSpec(), cfg)
    assert (np.diff(trace.train_loss) <= 1e-10).all()


def test_trace_csv_roundtrip(tmp_path):
    ds = small_dataset()
    net = make_net()
    cfg = O.TrainConfig(eta=0.05, steps=10, record_every=5)
    _, trace = O.train(net, ds, M.LossSpec("softmax_ce", 2), M.RegSpec(),
                       cfg)
    path = tmp_path / "trace.csv"
    trace.write_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "step,train_loss,test_loss,dist_u,dist_theta,accuracy"


def test_inverse_time_schedule():
    cfg = O.TrainConfig(eta=0.1, schedule="inverse_time", t0=10.0)
    assert cfg.eta_at(0) == 0.1
    assert cfg.eta_at(10) == pytest.approx(0.05)
