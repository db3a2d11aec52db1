"""Expected visited-node count of the m-M search.

A node ``(i, j)`` counts as visited when its metric ``d_{i,j}`` falls
inside the pruning radius ``R``, the full distance of the transmitted
branch. Given the transmitted combination and the channel, ``d_{i,j}`` is a
scaled noncentral chi-square with ``2i`` degrees of freedom and ``R`` a
scaled central chi-square with ``2 N_r``, so each visit probability is a
one-dimensional expectation of a Marcum Q function over ``R``.

Two evaluations of that expectation are provided and checked against each
other in the tests:

* :func:`node_visit_prob` integrates the Marcum-Q form with adaptive
  quadrature (the reference route);
* :func:`node_visit_prob_series` uses the Poisson-mixture form of the
  noncentral chi-square, which turns every mixture component into a ratio
  of two gamma variables and hence a regularized incomplete beta function.
  It is exact up to a truncation bounded below ``1e-16`` and vectorizes, so
  the sweep harness uses it.

Imperfect channel knowledge enters only through the per-candidate
variances ``zeta_j^2 = sigma_n^2 + (1 - rho^2) |s_j|^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import betainc, gammaln
from scipy.stats import gamma as gamma_dist

from .core import CandidateSet, Constellation, CsirModel, InvalidArgument, build_qam
from .special import marcum_q  # noqa: F401 (re-exported)

__all__ = [
    "NumericFailure",
    "Scenario",
    "NoncentralityTable",
    "VarianceModel",
    "noncentrality",
    "noncentrality_table",
    "rho",
    "zeta2",
    "variance_model",
    "node_visit_prob",
    "node_visit_prob_series",
    "expected_complexity",
    "complexity_reduction",
    "max_complexity_reduction",
]


class NumericFailure(ArithmeticError):
    """Quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class Scenario:
    M: int
    N_t: int
    N_r: int
    sigma_n2: float
    csir: CsirModel = field(default_factory=CsirModel.perfect)

    def __post_init__(self):
        if min(self.M, self.N_t, self.N_r) < 1:
            raise InvalidArgument("scenario dimensions must be positive")
        if not self.sigma_n2 > 0:
            raise InvalidArgument("sigma_n2 must be positive")

    @property
    def K(self) -> int:
        return self.M * self.N_t

    @property
    def sigma_e2(self) -> float:
        return self.csir.error_variance(1.0 / self.sigma_n2)

    @cached_property
    def constellation(self) -> Constellation:
        return build_qam(self.M)


@dataclass(frozen=True)
class NoncentralityTable:
    """``gamma2[i - 1, j]`` for levels ``i = 1..N_r``."""

    gamma2: np.ndarray


@dataclass(frozen=True)
class VarianceModel:
    rho: float
    zeta2_j: np.ndarray
    zeta2_t: float


def noncentrality(x_t, x_j, i: int) -> float:
    """Squared distance between two candidates over the first ``i`` antennas."""
    x_t = np.asarray(x_t)
    x_j = np.asarray(x_j)
    if not 1 <= i <= x_t.shape[0]:
        raise InvalidArgument(f"level {i} outside [1, {x_t.shape[0]}]")
    diff = x_t[:i] - x_j[:i]
    return float(np.sum(diff.real**2 + diff.imag**2))


def noncentrality_table(x_t, candidates) -> NoncentralityTable:
    X = candidates.vectors if isinstance(candidates, CandidateSet) else np.asarray(candidates)
    diff = np.asarray(x_t)[:, None] - X
    return NoncentralityTable(np.cumsum(diff.real**2 + diff.imag**2, axis=0))


def rho(sigma_e2: float) -> float:
    """Correlation between a channel entry and its noisy estimate."""
    if sigma_e2 < 0:
        raise InvalidArgument(f"sigma_e2 must be nonnegative, got {sigma_e2}")
    return 1.0 / math.sqrt(1.0 + sigma_e2)


def zeta2(sigma_n2, rho_value, symbol_energy):
    """Received-element variance given the channel estimate."""
    if np.any(np.asarray(sigma_n2) < 0) or np.any(np.asarray(symbol_energy) < 0):
        raise InvalidArgument("variances and energies must be nonnegative")
    if not 0.0 < rho_value <= 1.0:
        raise InvalidArgument(f"rho must lie in (0, 1], got {rho_value}")
    return sigma_n2 + (1.0 - rho_value * rho_value) * symbol_energy


def variance_model(scenario: Scenario, t: int) -> VarianceModel:
    r = rho(scenario.sigma_e2)
    energies = np.tile(scenario.constellation.energies, scenario.N_t)
    z = zeta2(scenario.sigma_n2, r, energies)
    return VarianceModel(r, z, float(z[t]))


def _radius_upper(N_r: int, zeta2_t: float) -> float:
    return float(gamma_dist.isf(1e-17, N_r, scale=zeta2_t))


def node_visit_prob(
    gamma2: float,
    zeta2_j: float,
    zeta2_t: float,
    i: int,
    N_r: int,
    tol: float = 1e-9,
) -> float:
    """``E_R[Pr(d_{i,j} <= R)]`` by adaptive quadrature.

    The integrand is ``1 - Q_i(sqrt(2 gamma2) / zeta_j, sqrt(2 R) / zeta_j)``
    weighted by the gamma(``N_r``, ``zeta2_t``) density of ``R``. The range
    is cut where the radius density's upper tail falls below ``1e-17``.

    Raises
    ------
    NumericFailure
        If the quadrature error estimate exceeds ``tol``.
    """
    if not (zeta2_j > 0 and zeta2_t > 0):
        raise InvalidArgument("variances must be positive")
    if not 1 <= i <= N_r:
        raise InvalidArgument(f"level {i} outside [1, {N_r}]")
    if gamma2 < 0:
        raise InvalidArgument("gamma2 must be nonnegative")
    if math.isinf(gamma2):
        return 0.0
    a = math.sqrt(2.0 * gamma2 / zeta2_j)
    scale_b = math.sqrt(2.0 / zeta2_j)
    log_norm = -gammaln(N_r) - N_r * math.log(zeta2_t)

    def integrand(R):
        if R <= 0.0:
            return 0.0
        log_pdf = log_norm + (N_r - 1) * math.log(R) - R / zeta2_t
        return (1.0 - marcum_q(i, a, scale_b * math.sqrt(R))) * math.exp(log_pdf)

    upper = _radius_upper(N_r, zeta2_t)
    # the radius density peaks at (N_r - 1) zeta2_t; flag it for the quadrature
    peak = (N_r - 1) * zeta2_t
    points = [p for p in (peak, (N_r + 3.0 * math.sqrt(N_r)) * zeta2_t) if 0 < p < upper]
    value, err = integrate.quad(
        integrand, 0.0, upper, points=points or None, epsabs=tol * 0.1, epsrel=0.0, limit=200
    )
    if not err <= tol:
        raise NumericFailure("node visit probability quadrature did not converge", err)
    return min(1.0, max(0.0, value))


_BETA_TAIL = 1e-17


def _series_cutoff(i_min: int, N_r: int, p_max: float) -> int:
    """Smallest ``k`` with ``I_p(i_min + k, N_r) < _BETA_TAIL``."""
    k = 32
    while betainc(i_min + k, N_r, p_max) >= _BETA_TAIL:
        k *= 2
    lo, hi = k // 2, k
    while lo < hi:
        mid = (lo + hi) // 2
        if betainc(i_min + mid, N_r, p_max) < _BETA_TAIL:
            hi = mid
        else:
            lo = mid + 1
    return hi


def node_visit_prob_series(gamma2, zeta2_j, zeta2_t, i, N_r: int):
    """Closed-form visit probability, broadcasting over all arguments.

    ``sum_k Pois(k; gamma2 / zeta2_j) * I_p(i + k, N_r)`` with
    ``p = zeta2_t / (zeta2_j + zeta2_t)``. Since ``I_p`` decreases in its
    first argument, the terms dropped past the cutoff add less than
    ``1e-17`` in total.
    """
    g, zj, zt, lvl = np.broadcast_arrays(
        np.asarray(gamma2, dtype=np.float64),
        np.asarray(zeta2_j, dtype=np.float64),
        np.asarray(zeta2_t, dtype=np.float64),
        np.asarray(i, dtype=np.int64),
    )
    if np.any(zj <= 0) or np.any(zt <= 0):
        raise InvalidArgument("variances must be positive")
    if np.any(lvl < 1) or np.any(lvl > N_r):
        raise InvalidArgument("levels must lie in [1, N_r]")
    shape = g.shape
    g, zj, zt, lvl = (arr.ravel() for arr in (g, zj, zt, lvl))
    out = np.zeros(g.size)
    finite = np.isfinite(g)
    if not finite.any():
        return out.reshape(shape)[()]

    mu = np.where(finite, g, 0.0) / zj
    p = zt / (zj + zt)
    k_max = _series_cutoff(int(lvl.min()), N_r, float(p.max()))
    k = np.arange(k_max + 1, dtype=np.float64)

    # incomplete-beta factors depend on (p, i, k) only; p takes few values
    p_vals, p_idx = np.unique(p, return_inverse=True)
    levels = np.arange(1, N_r + 1)
    beta = betainc(
        (levels[None, :, None] + k[None, None, :]),
        float(N_r),
        p_vals[:, None, None],
    )
    B = beta[p_idx, lvl - 1]  # (n, k_max + 1)

    with np.errstate(divide="ignore", invalid="ignore"):
        log_mu = np.log(mu)
        log_w = k[None, :] * log_mu[:, None] - mu[:, None] - gammaln(k + 1.0)[None, :]
    log_w[mu == 0.0] = -np.inf
    log_w[mu == 0.0, 0] = 0.0
    out = np.einsum("nk,nk->n", np.exp(log_w), B)
    out[~finite] = 0.0
    out = np.clip(out, 0.0, 1.0)
    return out.reshape(shape)[()]


def _resolve_transmitted(x_t, X: np.ndarray) -> int:
    if np.ndim(x_t) == 0:
        t = int(x_t)
        if not 0 <= t < X.shape[1]:
            raise InvalidArgument(f"transmitted index {t} out of range")
        return t
    diff = np.asarray(x_t)[:, None] - X
    return int(np.argmin(np.sum(diff.real**2 + diff.imag**2, axis=0)))


def expected_complexity(scenario: Scenario, x_t, candidates, method: str = "series") -> float:
    """Predicted average visited nodes of the m-M search for one realization.

    ``x_t`` is the transmitted candidate, given either by index or as a
    vector (matched to the nearest candidate, which also fixes ``|s_t|^2``).
    Other branches are treated as independent of the radius; the
    transmitted branch is always fully visited, since its node metrics
    never exceed its own full distance.
    ``method`` selects ``"series"`` (default) or ``"quadrature"``.
    """
    X = candidates.vectors if isinstance(candidates, CandidateSet) else np.asarray(candidates)
    N_r, K = X.shape
    if N_r != scenario.N_r or K != scenario.K:
        raise InvalidArgument(f"candidate matrix {X.shape} does not fit the scenario")
    t = _resolve_transmitted(x_t, X)
    gamma2 = noncentrality_table(X[:, t], X).gamma2
    var = variance_model(scenario, t)
    levels = np.arange(1, N_r + 1)[:, None]
    if method == "series":
        probs = node_visit_prob_series(gamma2, var.zeta2_j[None, :], var.zeta2_t, levels, N_r)
    elif method == "quadrature":
        probs = np.array(
            [
                [node_visit_prob(gamma2[i, j], var.zeta2_j[j], var.zeta2_t, i + 1, N_r) for j in range(K)]
                for i in range(N_r)
            ]
        )
    else:
        raise InvalidArgument(f"unknown method {method!r}")
    # the transmitted branch's prefixes are partial sums of R itself
    probs[:, t] = 1.0
    return float(K + probs.sum())


def complexity_reduction(C: float, M: int, N_t: int, N_r: int) -> float:
    """Fraction of the exhaustive ``M N_t N_r`` nodes saved."""
    total = M * N_t * N_r
    if not 0 <= C <= total:
        raise InvalidArgument(f"complexity {C} outside [0, {total}]")
    return 1.0 - C / total


def max_complexity_reduction(M: int, N_t: int, N_r: int) -> float:
    """Ceiling set by one full branch plus the rest of the first level."""
    if min(M, N_t, N_r) < 1:
        raise InvalidArgument("dimensions must be positive")
    return 1.0 - (N_r + M * N_t - 1) / (M * N_t * N_r)
