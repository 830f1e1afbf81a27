import numpy as np

from widenet import meanfield as MF
from widenet import model as M


def cloud(m=10, d=3, k=1, activation="sigmoid", seed=0):
    return M.init_net(m, d, k, 1.0, activation,
                      M.InitSpec("gaussian", 1.0, seed))


def test_particle_g_zero_at_perfect_fit_no_reg():
    # if the net already matches the targets exactly (squared loss,
    # no regularizer), the loss gradient vanishes and so does every g_j
    net = cloud(seed=1)
    X = np.random.default_rng(2).standard_normal((20, 3))
    Y = M.forward(net, X)
    diag = MF.particle_g(net, X, Y, M.LossSpec("squared", 1), M.RegSpec())
    assert np.max(np.abs(diag.g_values)) < 1e-12
    assert np.max(np.abs(diag.grad_g_u)) < 1e-12
    assert np.max(np.abs(diag.grad_g_theta)) < 1e-12
    assert diag.residual < 1e-24


def test_particle_g_reg_only():
    # with constant zero predictions (u = 0) and matching zero targets,
    # only the regularizer part of g survives
    net = cloud(seed=3)
    net.u = np.zeros_like(net.u)
    X = np.random.default_rng(4).standard_normal((10, 3))
    Y = np.zeros((10, 1))
    reg = M.RegSpec(lambda_u=0.4, lambda_theta=0.6)
    diag = MF.particle_g(net, X, Y, M.LossSpec("squared", 1), reg)
    want = 0.3 * np.sum(net.theta ** 2, axis=1)
    assert np.max(np.abs(diag.g_values - want)) < 1e-12
    assert np.max(np.abs(diag.grad_g_theta - 0.6 * net.theta)) < 1e-12


def test_grad_g_is_m_times_objective_gradient():
    # the per-particle gradient of g equals m times the gradient of the
    # full objective in that particle's coordinates
    net = cloud(m=7, seed=5)
    rng = np.random.default_rng(6)
    X = rng.standard_normal((15, 3))
    Y = rng.standard_normal((15, 1))
    spec = M.LossSpec("squared", 1)
    reg = M.RegSpec(lambda_u=0.1, lambda_theta=0.2)
    diag = MF.particle_g(net, X, Y, spec, reg)
    gu, gt, _ = M.gradients(net, spec, reg, X, Y)
    assert np.max(np.abs(diag.grad_g_u - net.m * gu)) < 1e-10
    assert np.max(np.abs(diag.grad_g_theta - net.m * gt)) < 1e-10


def test_grad_g_finite_difference():
    net = cloud(m=5, seed=7)
    rng = np.random.default_rng(8)
    X = rng.standard_normal((12, 3))
    Y = rng.standard_normal((12, 1))
    spec = M.LossSpec("squared", 1)
    reg = M.RegSpec(lambda_u=0.05, lambda_theta=0.05)
    diag = MF.particle_g(net, X, Y, spec, reg)

    def phi_of(netp):
        return M.objective(netp, spec, reg, X, Y)

    eps = 1e-6
    j, a = 2, 0
    plus, minus = net.copy(), net.copy()
    plus.u = net.u.copy()
    minus.u = net.u.copy()
    plus.u[j, a] += eps
    minus.u[j, a] -= eps
    num = (phi_of(plus) - phi_of(minus)) / (2 * eps)
    # d(phi)/du_j = (1/m) grad_u g_j
    assert abs(num - diag.grad_g_u[j, a] / net.m) < 1e-8


def test_dissipation_identity_small_eta():
    net = cloud(m=20, seed=9)
    rng = np.random.default_rng(10)
    X = rng.standard_normal((50, 3))
    Y = rng.standard_normal((50, 1))
    spec = M.LossSpec("squared", 1)
    reg = M.RegSpec(lambda_u=0.01)
    actual, predicted, ratio = MF.dissipation_check(
        net, X, Y, spec, reg, eta=1e-5)
    assert predicted > 0
    assert 0.99 <= ratio <= 1.01


def test_dissipation_error_shrinks_with_eta():
    # the first-order identity has O(eta) relative error, so halving
    # eta should roughly halve |ratio - 1|
    net = cloud(m=15, seed=11)
    rng = np.random.default_rng(12)
    X = rng.standard_normal((40, 3))
    Y = rng.standard_normal((40, 1))
    spec = M.LossSpec("squared", 1)
    errs = []
    for eta in (2e-4, 1e-4):
        _, _, ratio = MF.dissipation_check(net, X, Y, spec, M.RegSpec(), eta)
        errs.append(abs(ratio - 1.0))
    assert errs[1] < 0.75 * errs[0]


def test_wasted_fraction_trivials():
    net = cloud(m=6, seed=13)
    assert MF.wasted_fraction(net, tau=0.0) == 0.0
    assert MF.wasted_fraction(net, tau=1e12) == 1.0
    try:
        MF.wasted_fraction(net, tau=-1.0)
    except ValueError:
        pass
    else:
        assert False


def test_wasted_fraction_counts_small_particles():
    net = cloud(m=4, seed=14)
    net.u = np.array([[10.0], [10.0], [10.0], [1e-8]])
    # default tau = 0.05 * median = 0.5, so exactly one particle is wasted
    assert MF.wasted_fraction(net) == 0.25


def test_teacher_properties():
    teacher, sample = MF.make_teacher(d=2, seed=0)
    assert teacher.m == 4 and teacher.d == 2
    assert np.array_equal(teacher.u, np.ones((4, 1)))
    norms = np.linalg.norm(teacher.theta, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-12
    X, y = sample(100, sample_seed=1)
    assert X.shape == (100, 2) and y.shape == (100, 1)
    # inputs are wide-scale: std around 100
    assert 80 < X.std() < 120
    resid = y - M.forward(teacher, X)
    assert abs(resid.std() - 0.1) < 0.03


def test_teacher_sampling_deterministic():
    _, sample = MF.make_teacher(seed=0)
    X1, y1 = sample(10, sample_seed=5)
    X2, y2 = sample(10, sample_seed=5)
    assert np.array_equal(X1, X2) and np.array_equal(y1, y2)


def test_target_experiment_loss_decreases():
    (steps, losses), student, teacher = MF.target_experiment(
        m_student=16, seed=0, n=200, steps=300, eta=1e-6,
        record_every=100)
    assert losses[-1] < losses[0]
    assert student.m == 16


def test_noisy_flow_second_moment_growth():
    # with zero gradient signal (zero inputs and targets, no reg), the
    # noisy step is a pure random walk: Var grows by 2*lambda_p*eta per step
    net = cloud(m=400, d=3, seed=15)
    net.u = np.zeros_like(net.u)
    lambda_p, eta, steps = 0.5, 0.01, 200
    rng = np.random.default_rng(16)
    std = np.sqrt(2 * lambda_p * eta)
    u = net.u.copy()
    for _ in range(steps):
        u = u + std * rng.standard_normal(u.shape)
    var = u.var()
    expect = 2 * lambda_p * eta * steps
    se = expect * np.sqrt(2.0 / (u.size - 1))
    assert abs(var - expect) < 4 * se


def test_alpha_sweep_shrinks_distance():
    from widenet import optim as O
    from widenet.data import Dataset, split_dataset
    rng = np.random.default_rng(17)
    X = rng.standard_normal((60, 4))
    y = (X[:, 0] > 0).astype(np.int64)
    ds = split_dataset(Dataset(X=X, Y=y, train_idx=None, test_idx=None),
                       test_fraction=0.2, seed=0)
    cfg = O.TrainConfig(eta=0.5, coupling="ntk_equal", batch_size=-1,
                        steps=400, seed=0, record_every=400)
    rows = MF.alpha_sweep(200, ds, cfg, alphas=[np.sqrt(200), 200.0])
    # at comparable (or better) fit, the larger scaling stays closer
    # to its initialization
    assert rows[1]["train_loss"] <= rows[0]["train_loss"]
    assert rows[1]["dist_theta"] < rows[0]["dist_theta"]
    assert rows[1]["dist_u"] < rows[0]["dist_u"]


def test_export_cloud_csv(tmp_path):
    net = cloud(m=3, d=2, seed=18)
    p = tmp_path / "cloud.csv"
    MF.export_cloud_csv(net, p)
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "j,u_norm,theta_1,theta_2"
    assert len(lines) == 4
