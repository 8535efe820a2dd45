#!/usr/bin/env python3
"""Writes tests/data/nn_reference.json: random weights for a narrow CNN-LSTM
Q-network, two 40x87 feature matrices and the eval-mode outputs computed with
a plain numpy forward pass (Keras layer semantics). The C++ test loads the
weights by name and compares its own forward pass against these outputs."""
import json
import pathlib

import numpy as np

rng = np.random.default_rng(2024)
F, T = 40, 87
C1, C2, U, D, A = 2, 3, 16, 256, 4


def conv_same(x, k, b):  # x: (H, W, Cin), k: (kh, kw, Cin, Cout)
    kh, kw = k.shape[:2]
    p = kh // 2
    xp = np.pad(x, ((p, p), (p, p), (0, 0)))
    out = np.zeros(x.shape[:2] + (k.shape[3],))
    for dy in range(kh):
        for dx in range(kw):
            out += xp[dy:dy + x.shape[0], dx:dx + x.shape[1], :] @ k[dy, dx]
    return np.maximum(out + b, 0.0)


def sig(v):
    return 1.0 / (1.0 + np.exp(-v))


def forward(feat, w):
    img = feat.T[:, :, None]  # (time, freq, 1)
    a = conv_same(img, w["conv1.kernel"], w["conv1.bias"])
    a = (a - w["bn1.moving_mean"]) / np.sqrt(w["bn1.moving_variance"] + 1e-3) * w["bn1.gamma"] + w["bn1.beta"]
    a = conv_same(a, w["conv2.kernel"], w["conv2.bias"])
    seq = a.reshape(T, F * C2)
    h = np.zeros(U)
    c = np.zeros(U)
    for t in range(T):
        z = seq[t] @ w["lstm.kernel"] + h @ w["lstm.recurrent_kernel"] + w["lstm.bias"]
        i, f, g, o = sig(z[:U]), sig(z[U:2 * U]), np.tanh(z[2 * U:3 * U]), sig(z[3 * U:])
        c = f * c + i * g
        h = o * np.tanh(c)
    z = np.maximum(h @ w["dense1.kernel"] + w["dense1.bias"], 0.0)
    return z @ w["dense2.kernel"] + w["dense2.bias"]


def main():
    shapes = {
        "conv1.kernel": (5, 5, 1, C1), "conv1.bias": (C1,),
        "bn1.gamma": (C1,), "bn1.beta": (C1,), "bn1.moving_mean": (C1,), "bn1.moving_variance": (C1,),
        "conv2.kernel": (3, 3, C1, C2), "conv2.bias": (C2,),
        "lstm.kernel": (F * C2, 4 * U), "lstm.recurrent_kernel": (U, 4 * U), "lstm.bias": (4 * U,),
        "dense1.kernel": (U, D), "dense1.bias": (D,),
        "dense2.kernel": (D, A), "dense2.bias": (A,),
    }
    w = {k: rng.uniform(-0.3, 0.3, s).astype(np.float32).astype(np.float64) for k, s in shapes.items()}
    w["bn1.gamma"] = rng.uniform(0.5, 1.5, C1).astype(np.float32).astype(np.float64)
    w["bn1.moving_variance"] = rng.uniform(0.5, 2.0, C1).astype(np.float32).astype(np.float64)
    feats = [rng.normal(0.0, 1.0, (F, T)).astype(np.float32).astype(np.float64) for _ in range(2)]
    outs = [forward(f, w) for f in feats]
    doc = {
        "architecture": {"conv1_filters": C1, "conv2_filters": C2},
        "weights": {k: v.reshape(-1).tolist() for k, v in w.items()},
        "features": [f.reshape(-1).tolist() for f in feats],
        "outputs": [o.tolist() for o in outs],
    }
    out = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "nn_reference.json"
    out.write_text(json.dumps(doc))
    print(out, [o.round(4).tolist() for o in outs])


if __name__ == "__main__":
    main()
