"""Built-in self checks run by ``sortnet selftest``."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

import numpy as np

from . import metrics, oracles
from .comparator import forward, gradient, init_random, random_plain_net, symmetrize_network


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


def check_symmetry(n_cases=1000, seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    for case in range(n_cases):
        d, H = int(rng.integers(1, 12)), int(rng.integers(1, 8))
        net = init_random(d, H, rng.choice(["logistic", "tanh"]), seed=int(rng.integers(2**31)))
        x, y = rng.normal(scale=3.0, size=d), rng.normal(scale=3.0, size=d)
        a, b = forward(net, x, y), forward(net, y, x)
        if a.n_succ != b.n_prec or a.n_prec != b.n_succ:
            return SuiteResult("symmetry", False, f"case {case}: outputs not swapped exactly")
    return SuiteResult("symmetry", True, f"{n_cases} random nets, bit-exact")


def check_gradient(dims=(1, 3, 7), hiddens=(1, 2, 5), tol=1e-4, seed=0, corrupt=False) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for d, H in itertools.product(dims, hiddens):
        for activation in ("logistic", "tanh"):
            net = init_random(d, H, activation, seed=int(rng.integers(2**31)))
            x, y = rng.normal(size=d), rng.normal(size=d)
            target = [(1.0, 0.0), (0.0, 1.0)][int(rng.integers(2))]
            grad = gradient(net, x, y, target)
            if corrupt:
                grad = replace(grad, v_x=grad.v_x + 1e-2)
            fd = oracles.finite_difference_gradient(net, x, y, target)
            worst = max(worst, max(oracles.relative_errors(grad, fd).values()))
    ok = worst < tol
    return SuiteResult("gradient", ok, f"max relative error {worst:.2e} (tol {tol:g})")


def check_metrics(max_len=8) -> SuiteResult:
    n_cases = 0
    for length in range(1, max_len + 1):
        for bits in itertools.product((0, 1), repeat=length):
            for n in range(1, length + 1):
                n_cases += 1
                if metrics.precision_at(bits, n) != float(oracles.precision_at(bits, n)):
                    return SuiteResult("metric-oracle", False, f"P@{n} differs on {bits}")
                if metrics.ndcg_at(bits, n) != oracles.ndcg_at(bits, n):
                    return SuiteResult("metric-oracle", False, f"NDCG@{n} differs on {bits}")
            ap, ref = metrics.average_precision(bits), oracles.average_precision(bits)
            if (ap is None) != (ref is None) or (ap is not None and ap != float(ref)):
                return SuiteResult("metric-oracle", False, f"AP differs on {bits}")
    return SuiteResult("metric-oracle", True, f"{n_cases} exhaustive binary cases")


def check_symmetrize(n_cases=100, seed=0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for case in range(n_cases):
        d, m = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        plain = random_plain_net(d, m, seed=int(rng.integers(2**31)))
        net = symmetrize_network(plain)
        x, y = rng.normal(size=d), rng.normal(size=d)
        a, b = forward(net, x, y), forward(net, y, x)
        if a.n_succ != b.n_prec or a.n_prec != b.n_succ:
            return SuiteResult("symmetrize", False, f"case {case}: symmetry broken")
        r_xy, r_yx = plain(x, y), plain(y, x)
        worst = max(worst, abs(a.z_succ - (r_xy[0] + r_yx[1])), abs(a.z_prec - (r_xy[1] + r_yx[0])))
    ok = worst <= 1e-12
    return SuiteResult("symmetrize", ok, f"{n_cases} random nets, max deviation {worst:.1e}")


def run_all(corrupt_gradient: bool = False) -> list[SuiteResult]:
    return [
        check_symmetry(),
        check_gradient(corrupt=corrupt_gradient),
        check_metrics(),
        check_symmetrize(),
    ]
