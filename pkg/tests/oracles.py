"""Independent brute-force oracle for the weighted l1 problem.

Uses only objective evaluations: a coarse grid start followed by cyclic
coordinate-wise golden-section minimization.  Deliberately shares no code or
closed-form update with the production solver.
"""

from itertools import product

import numpy as np

_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def brute_force_weighted_l1(x, y, weights, lam, bracket=6.0, sweeps=500):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n, p = x.shape
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    pen = np.where(np.isfinite(weights), weights, 0.0)
    free = np.flatnonzero(~np.isinf(weights))

    def objective(b):
        r = yc - xc @ b
        return float(r @ r) / (2 * n) + lam * float(pen @ np.abs(b))

    # coarse global grid over the free coordinates
    best = np.zeros(p)
    best_val = objective(best)
    for combo in product(np.linspace(-3.0, 3.0, 5), repeat=free.size):
        b = np.zeros(p)
        b[free] = combo
        val = objective(b)
        if val < best_val:
            best_val, best = val, b

    b = best.copy()

    def line_min(j):
        lo, hi = b[j] - bracket, b[j] + bracket
        c1 = hi - _PHI * (hi - lo)
        c2 = lo + _PHI * (hi - lo)

        def f(t):
            old = b[j]
            b[j] = t
            val = objective(b)
            b[j] = old
            return val

        f1, f2 = f(c1), f(c2)
        while hi - lo > 1e-12:
            if f1 <= f2:
                hi, c2, f2 = c2, c1, f1
                c1 = hi - _PHI * (hi - lo)
                f1 = f(c1)
            else:
                lo, c1, f1 = c1, c2, f2
                c2 = lo + _PHI * (hi - lo)
                f2 = f(c2)
        return (lo + hi) / 2.0

    for _ in range(sweeps):
        moved = 0.0
        for j in free:
            t = line_min(j)
            moved = max(moved, abs(t - b[j]))
            b[j] = t
        if moved < 1e-11:
            break
    return b


def random_oracle_instance(rng):
    """A small, generically unique weighted problem (full-rank design)."""
    p = int(rng.integers(1, 4))
    n = int(rng.integers(p + 2, 11))
    x = rng.standard_normal((n, p))
    beta = rng.uniform(-2.0, 2.0, size=p) * (rng.random(p) < 0.7)
    y = x @ beta + 0.3 * rng.standard_normal(n)
    weights = rng.uniform(0.2, 2.5, size=p)
    roll = rng.random(p)
    weights[roll < 0.15] = 0.0  # unpenalized
    weights[roll > 0.92] = np.inf  # excluded
    if np.isinf(weights).all():
        weights[0] = 1.0
    lam = 0.0 if rng.random() < 0.1 else float(rng.uniform(0.01, 1.2))
    return x, y, weights, lam
