import numpy as np
import pytest

from widenet import data as D


def test_idx_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(10, 28, 28)).astype(np.uint8)
    labels = rng.integers(0, 10, size=10).astype(np.uint8)
    ip, lp = tmp_path / "imgs.idx", tmp_path / "lbls.idx"
    D.write_idx(ip, images)
    D.write_idx(lp, labels)
    assert np.array_equal(D.read_idx(ip), images)
    assert np.array_equal(D.read_idx(lp), labels)


def test_load_mnist_shapes(tmp_path):
    rng = np.random.default_rng(1)
    images = rng.integers(0, 256, size=(30, 28, 28)).astype(np.uint8)
    labels = rng.integers(0, 10, size=30).astype(np.uint8)
    D.write_idx(tmp_path / "imgs.idx", images)
    D.write_idx(tmp_path / "lbls.idx", labels)
    ds = D.load_mnist(tmp_path / "imgs.idx", tmp_path / "lbls.idx")
    assert ds.n == 30 and ds.d == 784
    assert ds.X.min() >= 0 and ds.X.max() <= 1


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.idx"
    path.write_bytes(b"\x00\x00\x12\x34" + b"\x00" * 16)
    with pytest.raises(D.IdxFormatError, match="bad magic"):
        D.read_idx(path)


def test_truncated_file_names_offset(tmp_path):
    rng = np.random.default_rng(2)
    images = rng.integers(0, 256, size=(5, 28, 28)).astype(np.uint8)
    path = tmp_path / "trunc.idx"
    D.write_idx(path, images)
    data = path.read_bytes()
    path.write_bytes(data[:100])
    with pytest.raises(D.IdxFormatError, match="byte offset"):
        D.read_idx(path)


def test_count_mismatch(tmp_path):
    rng = np.random.default_rng(3)
    D.write_idx(tmp_path / "i.idx",
                rng.integers(0, 256, size=(5, 4, 4)).astype(np.uint8))
    D.write_idx(tmp_path / "l.idx",
                rng.integers(0, 10, size=6).astype(np.uint8))
    with pytest.raises(D.IdxFormatError, match="count"):
        D.load_mnist(tmp_path / "i.idx", tmp_path / "l.idx")


def test_synth_determinism():
    a = D.synth_classification(500, seed=4)
    b = D.synth_classification(500, seed=4)
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.Y, b.Y)
    assert not np.array_equal(a.X, D.synth_classification(500, seed=5).X)


def test_synth_separated_limit_linear_probe():
    ds = D.synth_classification(400, d=20, informative=5, classes=2,
                                class_sep=1e3, seed=6, test_fraction=0.0)
    # least-squares linear probe reaches perfect train accuracy
    X1 = np.hstack([ds.X, np.ones((ds.n, 1))])
    y = 2.0 * ds.Y - 1.0
    w, *_ = np.linalg.lstsq(X1, y, rcond=None)
    assert np.mean(np.sign(X1 @ w) == y) == 1.0


def test_synth_too_many_classes():
    with pytest.raises(ValueError):
        D.synth_classification(10, d=4, informative=2, classes=5)


def test_synth_label_balance():
    ds = D.synth_classification(20_000, classes=2, seed=7,
                                test_fraction=0.0)
    frac = np.mean(ds.Y == 0)
    assert abs(frac - 0.5) < 0.02


def test_split_disjoint_and_deterministic():
    ds = D.synth_classification(300, seed=8)
    assert np.intersect1d(ds.train_idx, ds.test_idx).size == 0
    ds2 = D.synth_classification(300, seed=8)
    assert np.array_equal(ds.train_idx, ds2.train_idx)


def test_standardize_train_stats():
    ds = D.synth_classification(500, d=6, informative=3, seed=9)
    norm = D.normalize_features(ds)
    Xtr = norm.X[norm.train_idx]
    assert np.abs(Xtr.mean(axis=0)).max() < 1e-12
    assert np.abs(Xtr.std(axis=0) - 1).max() < 1e-12


def test_standardize_idempotent():
    ds = D.synth_classification(500, d=6, informative=3, seed=10)
    once = D.normalize_features(ds)
    twice = D.normalize_features(once)
    assert np.allclose(once.X, twice.X, atol=1e-12)


def test_standardize_no_leakage():
    ds = D.synth_classification(500, d=6, informative=3, seed=11)
    norm = D.normalize_features(ds)
    rec = norm.normalization["per_pixel_standardize"]
    expect = (ds.X[ds.test_idx] - rec["mean"]) / rec["scale"]
    assert np.allclose(norm.X[norm.test_idx], expect)


def test_zero_variance_coordinate_warns():
    X = np.random.default_rng(12).standard_normal((50, 3))
    X[:, 1] = 2.5
    ds = D.Dataset(X, np.zeros(50, dtype=np.int64))
    with pytest.warns(UserWarning):
        norm = D.normalize_features(ds)
    assert np.allclose(norm.X[:, 1], 2.5)


def test_unit_second_moment_scale():
    ds = D.synth_classification(200, d=8, informative=4, seed=13)
    theta = np.random.default_rng(14).standard_normal((20, 8))
    c = D.unit_second_moment_scale(theta, ds.X, "tanh")
    from widenet.activations import act
    H = act("tanh", ds.X @ theta.T) / c
    assert np.abs(np.mean(H * H, axis=0) - 1).max() < 1e-9
