"""Dataset acquisition and preparation.

MNIST IDX parsing (big-endian binary, magic 0x803 images / 0x801 labels),
a 100-d synthetic classification generator built from hypercube-vertex
centroids plus Gaussian noise, per-coordinate standardization fitted on
the training split, and deterministic splits.

Class labels are integers 0..k-1 throughout.
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

IDX_MAGIC_IMAGES = 0x00000803
IDX_MAGIC_LABELS = 0x00000801


class IdxFormatError(ValueError):
    pass


@dataclass
class Dataset:
    X: np.ndarray                 # n x d
    Y: np.ndarray                 # int labels (n,) or real n x k
    train_idx: np.ndarray = None
    test_idx: np.ndarray = None
    normalization: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Y = np.asarray(self.Y)
        if not np.isfinite(self.X).all():
            raise ValueError("X contains NaN/Inf")
        if self.Y.dtype.kind == "f" and not np.isfinite(self.Y).all():
            raise ValueError("Y contains NaN/Inf")
        n = self.X.shape[0]
        if self.Y.shape[0] != n:
            raise ValueError("X and Y row counts differ")
        if self.train_idx is None:
            self.train_idx = np.arange(n)
        if self.test_idx is None:
            self.test_idx = np.arange(0)
        if np.intersect1d(self.train_idx, self.test_idx).size:
            raise ValueError("train and test splits overlap")

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    @property
    def num_classes(self):
        if self.Y.dtype.kind in "iu":
            return int(self.Y.max()) + 1
        return self.Y.shape[1]

    def train_xy(self):
        return self.X[self.train_idx], self.Y[self.train_idx]

    def test_xy(self):
        if self.test_idx.size == 0:
            return None, None
        return self.X[self.test_idx], self.Y[self.test_idx]

    def subset(self, n_train, n_test=None, seed=0):
        """Deterministic random sub-split, preserving train/test roles."""
        rng = np.random.default_rng(seed)
        tr = rng.permutation(self.train_idx)[:n_train]
        te = self.test_idx
        if n_test is not None and te.size:
            te = rng.permutation(te)[:n_test]
        return Dataset(self.X, self.Y, np.sort(tr), np.sort(te),
                       dict(self.normalization))

    def write_csv(self, path):
        Y = self.Y if self.Y.ndim > 1 else self.Y[:, None]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.d)]
                       + [f"y{i}" for i in range(Y.shape[1])])
            for xi, yi in zip(self.X, Y):
                w.writerow([repr(v) for v in xi] + [repr(v) for v in yi])


def _read_exact(fh, count, what, path):
    buf = fh.read(count)
    if len(buf) != count:
        raise IdxFormatError(
            f"{path}: truncated while reading {what} at byte offset "
            f"{fh.tell() - len(buf)} (wanted {count} bytes, got {len(buf)})")
    return buf


def read_idx(path):
    """Parse one big-endian IDX file into an integer ndarray."""
    with open(path, "rb") as fh:
        magic = struct.unpack(">i", _read_exact(fh, 4, "magic", path))[0]
        if magic == IDX_MAGIC_IMAGES:
            ndim = 3
        elif magic == IDX_MAGIC_LABELS:
            ndim = 1
        else:
            raise IdxFormatError(f"{path}: bad magic 0x{magic:08x}")
        dims = [struct.unpack(">i", _read_exact(fh, 4, "dim", path))[0]
                for _ in range(ndim)]
        count = int(np.prod(dims))
        data = np.frombuffer(_read_exact(fh, count, "payload", path),
                             dtype=np.uint8)
    return data.reshape(dims)


def write_idx(path, array):
    """Write a uint8 array in IDX format (1-d labels or 3-d images)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = IDX_MAGIC_LABELS if array.ndim == 1 else IDX_MAGIC_IMAGES
    if array.ndim not in (1, 3):
        raise ValueError("IDX writer supports 1-d or 3-d arrays")
    with open(path, "wb") as fh:
        fh.write(struct.pack(">i", magic))
        for dim in array.shape:
            fh.write(struct.pack(">i", dim))
        fh.write(array.tobytes())


def load_mnist(path_images, path_labels, test_images=None, test_labels=None):
    """Load MNIST-style IDX files; pixels scaled to [0,1], d = rows*cols."""
    images = read_idx(path_images)
    labels = read_idx(path_labels)
    if images.ndim != 3:
        raise IdxFormatError(f"{path_images}: expected an image file")
    if labels.ndim != 1:
        raise IdxFormatError(f"{path_labels}: expected a label file")
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"image count {images.shape[0]} != label count {labels.shape[0]}")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    Y = labels.astype(np.int64)
    n_train = X.shape[0]
    if test_images is not None:
        ds_test = load_mnist(test_images, test_labels)
        X = np.vstack([X, ds_test.X])
        Y = np.concatenate([Y, ds_test.Y])
        return Dataset(X, Y, np.arange(n_train), np.arange(n_train, X.shape[0]))
    return Dataset(X, Y)


def load_digits_dataset(test_fraction=0.2, seed=0):
    """Bundled scikit-learn 8x8 digits, as an offline image-data stand-in."""
    from sklearn.datasets import load_digits
    raw = load_digits()
    X = raw.data / 16.0
    Y = raw.target.astype(np.int64)
    return split_dataset(Dataset(X, Y), test_fraction, seed)


def split_dataset(dataset, test_fraction, seed):
    """Deterministic disjoint train/test split of all rows."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.n)
    n_test = int(round(dataset.n * test_fraction))
    return Dataset(dataset.X, dataset.Y, np.sort(perm[n_test:]),
                   np.sort(perm[:n_test]), dict(dataset.normalization))


def synth_classification(n, d=100, informative=10, classes=2, class_sep=1.0,
                         seed=0, test_fraction=0.25):
    """Synthetic task: hypercube-vertex centroids plus unit Gaussian noise.

    Each class owns one vertex of {-class_sep, +class_sep}^informative;
    the remaining d-informative coordinates are pure noise.
    """
    if informative > d:
        raise ValueError("informative must be <= d")
    if informative < 63 and classes > 2 ** informative:
        raise ValueError("not enough hypercube vertices for that many classes")
    rng = np.random.default_rng(seed)
    # spread class vertices over the hypercube deterministically; draw
    # sign patterns directly and reject duplicates so large `informative`
    # never requires enumerating all 2^informative vertices
    seen, centroids = set(), []
    while len(centroids) < classes:
        v = rng.integers(0, 2, size=informative)
        key = v.tobytes()
        if key in seen:
            continue
        seen.add(key)
        centroids.append(np.where(v == 1, class_sep, -class_sep))
    centroids = np.array(centroids)
    y = rng.integers(0, classes, size=n)
    X = rng.standard_normal((n, d))
    X[:, :informative] += centroids[y]
    ds = Dataset(X, y.astype(np.int64))
    if test_fraction > 0:
        return split_dataset(ds, test_fraction, seed)
    return ds


def normalize_features(dataset, mode="per_pixel_standardize"):
    """Normalize using statistics of the training split only.

    per_pixel_standardize: mean 0 / variance 1 per coordinate (train stats
    applied to every row); zero-variance coordinates are left untouched.
    Idempotent: already-normalized data maps to itself.
    """
    if mode != "per_pixel_standardize":
        raise ValueError(f"unknown normalization mode {mode!r}")
    Xtr = dataset.X[dataset.train_idx]
    if Xtr.shape[0] == 0:
        raise ValueError("cannot normalize with an empty training split")
    mean = Xtr.mean(axis=0)
    std = Xtr.std(axis=0)
    keep = std > 0
    if not keep.all():
        import warnings
        warnings.warn(f"{int((~keep).sum())} zero-variance coordinate(s) "
                      "left untouched")
    scale = np.where(keep, std, 1.0)
    shift = np.where(keep, mean, 0.0)
    X = (dataset.X - shift) / scale
    record = dict(dataset.normalization)
    record["per_pixel_standardize"] = {"mean": shift, "scale": scale}
    return Dataset(X, dataset.Y, dataset.train_idx, dataset.test_idx, record)


def unit_second_moment_scale(theta, X, activation):
    """Per-theta scalars c with (1/n) sum_i (h(theta,x_i)/c)^2 = 1.

    Realizes the feature batch-normalization condition used by the
    variance diagnostics; theta rows with identically-zero activation
    get scale 1.
    """
    from .activations import act
    H = act(activation, X @ np.asarray(theta, dtype=np.float64).T)
    c = np.sqrt(np.mean(H * H, axis=0))
    return np.where(c > 0, c, 1.0)
