"""Small oracle checks exercised by ``seqdec oracle-check``.

Each check compares a library routine with an independent computation and
returns ``(name, passed, detail)``.
"""

from __future__ import annotations

import math

import numpy as np

from . import pomdp
from .belief import GaussianBelief, RlsState, conjugate_update, ridge_solution, rls_update
from .core import derive_stream, make_rng
from .problems.energy import forecast_roll


def check_conjugate(rng, n=1000):
    worst = 0.0
    for _ in range(n):
        mu, beta, W, bw = rng.normal(0, 10), rng.uniform(0.01, 10), rng.normal(0, 10), rng.uniform(0.01, 10)
        post = conjugate_update(GaussianBelief(mu, beta), W, bw)
        # product of densities: log-quadratic coefficients
        a = beta + bw
        b = beta * mu + bw * W
        worst = max(worst, abs(post.mean - b / a), abs(post.precision - a) / a)
    return "conjugate update", worst <= 1e-12, f"max error {worst:.3g}"


def check_rls(rng, n=20):
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(1, 6))
        lam = 1e-2
        r = RlsState.initial(d, lam)
        P, y = [], []
        for _ in range(100):
            p = rng.normal(size=d)
            yy = float(p @ np.arange(1, d + 1) + rng.normal())
            r, _ = rls_update(r, p, yy)
            P.append(p)
            y.append(yy)
        worst = max(worst, float(np.max(np.abs(r.theta - ridge_solution(np.array(P), np.array(y), lam)))))
    return "rls vs batch", worst <= 1e-8, f"max error {worst:.3g}"


def check_bayes(rng, n=50):
    worst = 0.0
    for _ in range(n):
        K, A, O = int(rng.integers(2, 6)), int(rng.integers(1, 4)), int(rng.integers(1, 5))
        m = pomdp.random_pomdp(rng, K, A, O)
        b = rng.dirichlet(np.ones(K))
        x = int(rng.integers(A))
        total = 0.0
        for w in range(O):
            joint = np.einsum("s,st,t->t", b, m.transition[x], m.observation[x, :, w])
            pw = joint.sum()
            total += pomdp.observation_likelihood(m, b, x, w)
            if pw > 0:
                worst = max(worst, float(np.max(np.abs(pomdp.belief_update(m, b, x, w) - joint / pw))))
        worst = max(worst, abs(total - 1.0))
    return "bayes update", worst <= 1e-12, f"max error {worst:.3g}"


def check_exact_solver(rng, n=30):
    worst = 0.0
    for _ in range(n):
        K, A, O, T = (int(v) for v in rng.integers(1, 4, size=4))
        m = pomdp.random_pomdp(rng, max(K, 2), A, O, T)
        b = rng.dirichlet(np.ones(m.n_states))
        worst = max(worst, abs(pomdp.solve_exact_reachable(m, b).value - pomdp.brute_force_value(m, b)))
    return "exact vs brute force", worst <= 1e-9, f"max error {worst:.3g}"


def check_forecast(rng, n=20000, sigma=0.5):
    f = np.zeros(4)
    inc = np.empty((n, 3))
    for i in range(n):
        _, g = forecast_roll(f, sigma, rng)
        inc[i] = np.asarray(g[:3]) - f[1:4]
    var = inc.var(axis=0, ddof=1)
    rel = np.abs(var / (sigma**2 * np.arange(1, 4)) - 1.0)
    se = inc.std(axis=0, ddof=1) / math.sqrt(n)
    ok = bool(np.all(np.abs(inc.mean(axis=0)) <= 3 * se) and np.all(rel <= 0.05))
    return "forecast roll", ok, f"max relative variance error {rel.max():.3g}"


def run_all(seed: int = 0):
    checks = (check_conjugate, check_rls, check_bayes, check_exact_solver, check_forecast)
    return [c(make_rng(derive_stream(seed, 0, c.__name__))) for c in checks]
