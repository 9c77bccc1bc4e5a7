"""Independent reference computations used by the tests.

Nothing here calls into the package's numerical kernels.
"""

import math

import mpmath
import numpy as np

mpmath.mp.dps = 40


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def mp_loss(theta, D, H, x, target):
    """Half squared error of the network, evaluated in 40-digit arithmetic.

    ``theta`` is ordered w (row-major by input then hidden unit), hidden bias,
    output weights, output bias.
    """
    theta = [mpmath.mpf(t) for t in theta]
    w = theta[:D * H]
    bh = theta[D * H:D * H + H]
    v = theta[D * H + H:D * H + 2 * H]
    s = theta[-1]
    xs = [mpmath.mpf(float(xi)) for xi in x]
    for h in range(H):
        z = bh[h] + mpmath.fsum(w[d * H + h] * xs[d] for d in range(D))
        s += v[h] / (1 + mpmath.exp(-z))
    out = 1 / (1 + mpmath.exp(-s))
    return (out - mpmath.mpf(float(target))) ** 2 / 2


def central_difference_gradient(theta, D, H, x, target, h=1e-5):
    base = [mpmath.mpf(float(t)) for t in theta]
    step = mpmath.mpf(h)
    grad = np.empty(len(base))
    for i in range(len(base)):
        up, down = list(base), list(base)
        up[i] += step
        down[i] -= step
        grad[i] = float((mp_loss(up, D, H, x, target) - mp_loss(down, D, H, x, target)) / (2 * step))
    return grad


def max_relative_error(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(a), np.abs(b))
    both_zero = scale == 0
    rel = np.where(both_zero, 0.0, np.abs(a - b) / np.where(both_zero, 1.0, scale))
    return float(rel.max())


def brute_force_embed(series, D, T):
    """1-based enumeration: for t = D*T+1..L, inputs y_{t-T}, ..., y_{t-D*T}, target y_t."""
    y = {i + 1: v for i, v in enumerate(series)}
    inputs, targets = [], []
    for t in range(D * T + 1, len(series) + 1):
        inputs.append([y[t - d * T] for d in range(1, D + 1)])
        targets.append(y[t])
    return inputs, targets


def loop_forward(w, bh, v, bo, x):
    """Textbook double loop over hidden units and inputs with math.exp."""
    D, H = len(w), len(w[0])
    s = bo
    for h in range(H):
        s += v[h] * sigmoid(bh[h] + sum(w[d][h] * x[d] for d in range(D)))
    return sigmoid(s)
