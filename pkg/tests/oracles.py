"""Independent reference computations used only by the tests."""

import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln, ive


def brute_force_ml(y, X):
    """Index of the nearest candidate, computed with numpy norms."""
    dist = np.linalg.norm(y[:, None] - X, axis=0) ** 2
    return int(np.argmin(dist)), dist


def marcum_q_quad(m, a, b):
    """Q_m(a, b) from its defining integral over [b, inf)."""
    if b == 0.0:
        return 1.0

    if a == 0.0:
        log_c = -(m - 1) * math.log(2.0) - gammaln(m)

        def f(x):
            return math.exp(log_c + (2 * m - 1) * math.log(x) - 0.5 * x * x) if x > 0 else 0.0

    else:

        def f(x):
            if x <= 0:
                return 0.0
            # x (x/a)^(m-1) exp(-(x^2+a^2)/2) I_{m-1}(a x), with I scaled by exp(-a x)
            return math.exp(m * math.log(x) - (m - 1) * math.log(a) - 0.5 * (x - a) ** 2) * ive(m - 1, a * x)

    centre = math.sqrt(a * a + 2.0 * m)
    upper = max(b, centre) + 40.0
    pts = [p for p in (a, centre) if b < p < upper]
    val, _ = integrate.quad(f, b, upper, points=pts or None, epsabs=1e-13, epsrel=1e-13, limit=500)
    return val


def ncx2_cdf_quad(x, df, nc):
    """Noncentral chi-square CDF by integrating scipy's density."""
    from scipy.stats import ncx2

    if x <= 0:
        return 0.0
    mean = df + nc
    sd = math.sqrt(2 * (df + 2 * nc))
    pts = [p for p in (mean - 3 * sd, mean, mean + 3 * sd) if 0 < p < x]
    val, _ = integrate.quad(lambda t: ncx2.pdf(t, df, nc), 0.0, x, points=pts or None, epsabs=1e-13, epsrel=1e-13, limit=500)
    return val


def visit_prob_monte_carlo(gamma2, zeta2_j, zeta2_t, i, N_r, n, rng, chunk=200_000):
    """Fraction of draws with d_{i,j} <= R, plus its standard error."""
    hits = 0
    done = 0
    mean = np.zeros(i, dtype=complex)
    mean[0] = math.sqrt(gamma2)
    while done < n:
        k = min(chunk, n - done)
        u = math.sqrt(zeta2_j / 2) * (rng.standard_normal((k, i)) + 1j * rng.standard_normal((k, i)))
        w = math.sqrt(zeta2_t / 2) * (rng.standard_normal((k, N_r)) + 1j * rng.standard_normal((k, N_r)))
        d = np.sum(np.abs(mean + u) ** 2, axis=1)
        R = np.sum(np.abs(w) ** 2, axis=1)
        hits += int(np.count_nonzero(d <= R))
        done += k
    p = hits / n
    return p, math.sqrt(max(p * (1 - p), 1e-300) / n)
