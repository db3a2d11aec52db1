"""Hot loops of the tree-search detectors.

Every kernel works on a step-cost table ``costs[n, j] = |y_n - x_{n,j}|^2``
of shape ``(N_r, K)``. Each kernel exists twice: an explicit-loop version
compiled with numba and a numpy version used when numba is disabled (see
:mod:`smtree._accel`). Both accumulate branch metrics in the same order,
row ``0`` first, so their floating-point results are bit-identical.
"""

import numpy as np

from ._accel import HAVE_NUMBA, njit

__all__ = [
    "step_costs",
    "accumulate",
    "best_first",
    "exhaustive",
    "census",
    "best_first_numpy",
    "best_first_numba",
]


def step_costs(y: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Per-level squared distances, ``(Re)^2 + (Im)^2`` for every node."""
    diff = y[:, None] - X
    return diff.real * diff.real + diff.imag * diff.imag


# ---------------------------------------------------------------------------
# explicit-loop kernels (numba targets)
# ---------------------------------------------------------------------------


def _accumulate_loop(costs):
    n_r, k = costs.shape
    acc = np.empty((n_r, k))
    for j in range(k):
        s = 0.0
        for n in range(n_r):
            s += costs[n, j]
            acc[n, j] = s
    return acc


def _best_first_loop(costs, stop_on_first, order):
    n_r, k = costs.shape
    v = np.ones(k, dtype=np.int64)
    d = costs[0].copy()
    visited = k
    n_exp = 0
    record = order.shape[0] > 0
    max_exp = k * (n_r - 1)
    while n_exp <= max_exp:
        j_min = 0
        best = d[0]
        for j in range(1, k):
            if d[j] < best:
                best = d[j]
                j_min = j
        if v[j_min] == n_r:
            return j_min, visited, best, n_exp
        level = v[j_min]
        d[j_min] += costs[level, j_min]
        v[j_min] = level + 1
        visited += 1
        if record:
            order[n_exp] = j_min
        n_exp += 1
        if stop_on_first and level + 1 == n_r:
            return j_min, visited, d[j_min], n_exp
    raise RuntimeError("best-first search exceeded its expansion bound")


def _exhaustive_loop(costs):
    n_r, k = costs.shape
    best = np.inf
    j_best = 0
    for j in range(k):
        s = 0.0
        for n in range(n_r):
            s += costs[n, j]
        if s < best:
            best = s
            j_best = j
    return j_best, n_r * k, best


def _census_loop(costs, radius):
    n_r, k = costs.shape
    count = k
    for j in range(k):
        s = 0.0
        for n in range(n_r):
            s += costs[n, j]
            if s <= radius:
                count += 1
            else:
                break
    return count


# ---------------------------------------------------------------------------
# numpy kernels
# ---------------------------------------------------------------------------


def accumulate_numpy(costs):
    acc = np.empty_like(costs, dtype=np.float64)
    acc[0] = costs[0]
    for n in range(1, costs.shape[0]):
        acc[n] = acc[n - 1] + costs[n]
    return acc


def best_first_numpy(costs, stop_on_first, order):
    n_r, k = costs.shape
    v = np.ones(k, dtype=np.int64)
    d = costs[0].astype(np.float64, copy=True)
    visited = k
    n_exp = 0
    record = order.shape[0] > 0
    max_exp = k * (n_r - 1)
    while n_exp <= max_exp:
        # np.argmin returns the first minimum: lowest index wins ties
        j_min = int(np.argmin(d))
        if v[j_min] == n_r:
            return j_min, visited, float(d[j_min]), n_exp
        level = v[j_min]
        d[j_min] += costs[level, j_min]
        v[j_min] = level + 1
        visited += 1
        if record:
            order[n_exp] = j_min
        n_exp += 1
        if stop_on_first and level + 1 == n_r:
            return j_min, visited, float(d[j_min]), n_exp
    raise RuntimeError("best-first search exceeded its expansion bound")


def exhaustive_numpy(costs):
    full = accumulate_numpy(costs)[-1]
    j = int(np.argmin(full))
    return j, costs.size, float(full[j])


def census_numpy(costs, radius):
    # prefix sums are nondecreasing, so "<= radius" is a prefix per branch
    return int(costs.shape[1] + np.count_nonzero(accumulate_numpy(costs) <= radius))


if HAVE_NUMBA:
    accumulate_numba = njit(cache=True)(_accumulate_loop)
    best_first_numba = njit(cache=True)(_best_first_loop)
    exhaustive_numba = njit(cache=True)(_exhaustive_loop)
    census_numba = njit(cache=True)(_census_loop)

    accumulate = accumulate_numba
    best_first = best_first_numba
    exhaustive = exhaustive_numba
    census = census_numba
else:
    best_first_numba = None
    accumulate = accumulate_numpy
    best_first = best_first_numpy
    exhaustive = exhaustive_numpy
    census = census_numpy
