"""Net serialization: one flat binary container per net.

Layout (all little-endian): a JSON header line holding
(alpha, m, d, k, activation, seed) terminated by a newline, followed by
the four float64 row-major blocks u, theta, u0, theta0.
"""

import json

import numpy as np

from .model import TwoLayerNet

MAGIC = b"WIDENET1\n"


def save_net(net, path):
    header = {"alpha": net.alpha, "m": net.m, "d": net.d, "k": net.k,
              "activation": net.activation, "seed": int(net.seed)}
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        for block in (net.u, net.theta, net.u0, net.theta0):
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_net(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a net container")
        header = json.loads(fh.readline().decode())
        m, d, k = header["m"], header["d"], header["k"]

        def block(rows, cols):
            buf = fh.read(rows * cols * 8)
            if len(buf) != rows * cols * 8:
                raise ValueError(f"{path}: truncated weight block")
            return np.frombuffer(buf, dtype="<f8").reshape(rows, cols).copy()

        u = block(m, k)
        theta = block(m, d)
        u0 = block(m, k)
        theta0 = block(m, d)
    return TwoLayerNet(header["alpha"], u, theta, header["activation"],
                       u0, theta0, header["seed"])
