"""Independent reference implementations used only by the tests.

None of these share code with the package: they use mpmath, explicit loops
or textbook closed forms.
"""

import itertools
import math

import mpmath as mp
import numpy as np


def mmse_mpmath(s, alpha, dps=30):
    """MMSE via alpha - E[b E[b|y]] with the sinh/cosh posterior, in mpmath."""
    with mp.workdps(dps):
        s = mp.mpf(s)
        a = mp.mpf(alpha)
        rs = mp.sqrt(s)

        def pm(y):
            # posterior mean of b given y = sqrt(s) b + z
            num = a * mp.sinh(rs * y)
            den = a * mp.cosh(rs * y) + (1 - a) * mp.exp(s / 2)
            return num / den

        def integrand(z):
            phi = mp.npdf(z)
            # condition on b = +1 (odd symmetry covers b = -1)
            e1 = (1 - pm(rs + z)) ** 2
            e0 = pm(z) ** 2
            return phi * (a * e1 + (1 - a) * e0)

        lam = mp.log(2 * (1 - a) / a) if 0 < alpha < 1 else 0
        cuts = sorted({-12, -(rs / 2 + lam / rs), -rs / 2, 0, rs / 2 + lam / rs, 12})
        cuts = [c for c in cuts if -12 <= c <= 12]
        return float(mp.quad(integrand, cuts))


def golden_section(f, a, b, tol=mp.mpf("1e-14"), dps=40):
    """Minimize a unimodal ``f`` on [a, b] in mpmath arithmetic."""
    with mp.workdps(dps):
        a, b = mp.mpf(a), mp.mpf(b)
        g = (mp.sqrt(5) - 1) / 2
        c = b - g * (b - a)
        d = a + g * (b - a)
        fc, fd = f(c), f(d)
        while b - a > tol:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - g * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + g * (b - a)
                fd = f(d)
        return float((a + b) / 2)


def g_critical_points_numeric(u):
    """Local min and max of (1-eta) e^{u eta}/sqrt(eta) by grid + golden section."""
    def log_g(x):
        return mp.log(1 - x) + u * x - mp.log(x) / 2

    grid = np.linspace(1e-4, 1 - 1e-4, 20001)
    vals = np.log1p(-grid) + u * grid - 0.5 * np.log(grid)
    d = np.diff(vals)
    turns = np.nonzero(np.sign(d[1:]) != np.sign(d[:-1]))[0] + 1
    i_min, i_max = turns[0], turns[1]
    e_min = golden_section(log_g, grid[i_min - 1], grid[i_min + 1])
    e_max = golden_section(lambda x: -log_g(x), grid[i_max - 1], grid[i_max + 1])
    return e_min, e_max


def brute_force_posteriors(S, y, gamma, alpha):
    """Per-user posteriors by explicit enumeration in linear probability space."""
    N, K = S.shape
    masses = {-1: alpha / 2, 0: 1 - alpha, 1: alpha / 2}
    post = np.zeros((K, 3))
    total = 0.0
    for h in itertools.product((-1, 0, 1), repeat=K):
        prior = 1.0
        for x in h:
            prior *= masses[x]
        if prior == 0:
            continue
        r = y - math.sqrt(gamma) * (S @ np.array(h, dtype=float))
        w = prior * math.exp(-0.5 * float(r @ r))
        total += w
        for k, x in enumerate(h):
            post[k, x + 1] += w
    return post / total


def brute_force_jo(S, y, gamma, alpha):
    """Vector MAP by enumeration; first maximizer in (-1, 0, 1) order wins."""
    N, K = S.shape
    masses = {-1: alpha / 2, 0: 1 - alpha, 1: alpha / 2}
    best, best_h = -math.inf, None
    for h in itertools.product((-1, 0, 1), repeat=K):
        prior = 1.0
        for x in h:
            prior *= masses[x]
        if prior == 0:
            continue
        r = y - math.sqrt(gamma) * (S @ np.array(h, dtype=float))
        score = math.log(prior) - 0.5 * float(r @ r)
        if score > best:
            best, best_h = score, h
    return np.array(best_h, dtype=float)


def binary_mmse_mpmath(s, dps=30):
    """1 - E[tanh(s + sqrt(s) z)], the all-active (binary) MMSE."""
    with mp.workdps(dps):
        s = mp.mpf(s)
        f = lambda z: mp.npdf(z) * mp.tanh(s + mp.sqrt(s) * z)
        return float(1 - mp.quad(f, [-mp.inf, -mp.sqrt(s), 0, mp.inf]))
