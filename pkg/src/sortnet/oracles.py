"""Slow, independent reference computations used to check the fast paths.

Nothing here shares code with the implementations it checks: metrics are
computed with exact fractions and explicit enumeration, gradients with
central finite differences, and the comparator with scalar loops over an
explicitly materialised dual network.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np

from .comparator import WeightSharedComparator, forward, loss


def precision_at(ratings, n):
    hits = 0
    for j in range(n):
        if ratings[j] > 0:
            hits += 1
    return Fraction(hits, n)


def average_precision(ratings):
    total = sum(1 for r in ratings if r > 0)
    if total == 0:
        return None
    acc = Fraction(0)
    for pos in range(1, len(ratings) + 1):
        if ratings[pos - 1] > 0:
            acc += precision_at(ratings, pos)
    return acc / total


def mean_average_precision(lists):
    aps = [ap for ap in (average_precision(r) for r in lists) if ap is not None]
    return sum(aps, Fraction(0)) / len(aps)


def _dcg(ratings, n):
    return math.fsum((2.0 ** ratings[j] - 1.0) / math.log(1 + (j + 1)) for j in range(n))


def ideal_dcg(ratings, n):
    """Max DCG@n over every arrangement of the ratings."""
    best = 0.0
    if all(r in (0, 1) for r in ratings):
        # binary: enumerate which positions hold the relevant documents
        k = sum(ratings)
        for slots in itertools.combinations(range(len(ratings)), k):
            arr = [0] * len(ratings)
            for s in slots:
                arr[s] = 1
            best = max(best, _dcg(arr, n))
        return best
    for perm in set(itertools.permutations(ratings)):
        best = max(best, _dcg(perm, n))
    return best


def ndcg_at(ratings, n):
    ideal = ideal_dcg(list(ratings), n)
    return 0.0 if ideal == 0.0 else _dcg(list(ratings), n) / ideal


def plain_forward(net: WeightSharedComparator, x, y):
    """Scalar forward pass through the fully materialised 2H-unit network."""
    H, d = net.H, net.d
    act = (lambda a: 1.0 / (1.0 + math.exp(-a))) if net.activation == "logistic" else math.tanh
    vx, vy = net.v_x.tolist(), net.v_y.tolist()
    units = []  # (weights on x, weights on y, bias, w to succ, w to prec)
    for i in range(H):
        units.append((vx[i], vy[i], net.b_h[i], net.w_succ[i], net.w_prec[i]))
        units.append((vy[i], vx[i], net.b_h[i], net.w_prec[i], net.w_succ[i]))
    z_s = z_p = net.b_out
    for wx, wy, b, ws, wp in units:
        a = b + sum(wx[k] * x[k] for k in range(d)) + sum(wy[k] * y[k] for k in range(d))
        h = act(a)
        z_s += ws * h
        z_p += wp * h
    if net.linear_output:
        return z_s, z_p
    return act(z_s), act(z_p)


def finite_difference_gradient(net: WeightSharedComparator, x, y, target, step=1e-5):
    """Central differences of the squared error w.r.t. every stored parameter."""
    out = {}
    for name in ("v_x", "v_y", "b_h", "w_succ", "w_prec", "b_out"):
        base = np.array(getattr(net, name), dtype=np.float64)
        grad = np.zeros_like(base)
        flat = grad.reshape(-1)
        for k in range(base.size):
            values = []
            for sign in (1.0, -1.0):
                bumped = base.copy().reshape(-1)
                bumped[k] += sign * step
                bumped = bumped.reshape(base.shape) if base.ndim else float(bumped[0])
                probe = _with(net, name, bumped)
                values.append(loss(forward(probe, x, y), target))
            flat[k] = (values[0] - values[1]) / (2.0 * step)
        out[name] = grad if base.ndim else float(grad)
    return out


def _with(net, name, value):
    params = dict(net.parameters())
    params[name] = value
    return WeightSharedComparator(activation=net.activation, linear_output=net.linear_output, **params)


def relative_errors(analytic, numeric) -> dict:
    """``|a - fd| / max(1, |fd|)`` per parameter block (max over entries)."""
    errs = {}
    for name, fd in numeric.items():
        a = np.asarray(getattr(analytic, name), dtype=np.float64)
        fd = np.asarray(fd, dtype=np.float64)
        errs[name] = float(np.max(np.abs(a - fd) / np.maximum(1.0, np.abs(fd))))
    return errs
