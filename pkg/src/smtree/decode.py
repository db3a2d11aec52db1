"""ML, m-M and m-Mw detectors over the SM tree.

Each of the ``K = M N_t`` candidate combinations is a branch of ``N_r``
nodes; node ``(i, j)`` carries the accumulated distance of the first
``i + 1`` receive antennas. Detectors read their node metrics through a
:class:`MetricProvider`, so a stub distance table can stand in for a
received signal.

Visited nodes are counted as ``sum(v)`` at termination, first-level nodes
included.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import numpy as np

from . import kernels
from .core import CandidateSet

__all__ = [
    "MetricProvider",
    "SignalMetrics",
    "TableMetrics",
    "SearchState",
    "DecodeOutcome",
    "TraceEvent",
    "ml_decode",
    "mm_decode",
    "mmw_decode",
    "count_nodes_within_radius",
]


class MetricProvider(Protocol):
    shape: tuple[int, int]

    def step_cost(self, n: int, j: int) -> float: ...

    def costs(self) -> np.ndarray: ...


class SignalMetrics:
    """Step costs ``|y_n - x_{n,j}|^2`` of a received vector against candidates.

    The full table is built on first use of :meth:`costs`; single entries
    from :meth:`step_cost` are computed on demand and agree with it.
    """

    def __init__(self, y, candidates):
        X = candidates.vectors if isinstance(candidates, CandidateSet) else candidates
        self.y = np.asarray(y, dtype=np.complex128)
        self.X = np.asarray(X, dtype=np.complex128)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(f"candidate matrix {self.X.shape} does not match y {self.y.shape}")
        self.shape = self.X.shape
        self._table = None

    def step_cost(self, n: int, j: int) -> float:
        diff = self.y[n] - self.X[n, j]
        return float(diff.real * diff.real + diff.imag * diff.imag)

    def costs(self) -> np.ndarray:
        if self._table is None:
            self._table = kernels.step_costs(self.y, self.X)
            self._table.setflags(write=False)
        return self._table


class TableMetrics:
    """Provider backed by an explicit ``(N_r, K)`` step-cost table."""

    def __init__(self, table):
        table = np.array(table, dtype=np.float64, ndmin=2)
        if np.any(table < 0) or not np.all(np.isfinite(table)):
            raise ValueError("step costs must be finite and nonnegative")
        table.setflags(write=False)
        self._table = table
        self.shape = table.shape

    @classmethod
    def from_accumulated(cls, acc) -> "TableMetrics":
        """Build from node metrics ``d[i, j]`` (prefix sums down each branch)."""
        acc = np.array(acc, dtype=np.float64, ndmin=2)
        return cls(np.diff(acc, axis=0, prepend=0.0))

    def step_cost(self, n: int, j: int) -> float:
        return float(self._table[n, j])

    def costs(self) -> np.ndarray:
        return self._table


@dataclass(frozen=True)
class DecodeOutcome:
    index: int
    visited_nodes: int
    final_radius: float
    expansions: Optional[tuple] = None


@dataclass(frozen=True)
class TraceEvent:
    """One step of a best-first search.

    ``stop`` events repeat the iteration number of the last expansion.
    """

    iteration: int
    j_min: int
    v: tuple
    d_value: float
    stop: bool = False


class SearchState:
    """Visited-level vector ``v`` and node-metric vector ``d``."""

    def __init__(self, metrics: MetricProvider):
        self.metrics = metrics
        n_r, k = metrics.shape
        self.n_r = n_r
        self.v = np.ones(k, dtype=np.int64)
        self.d = np.array([metrics.step_cost(0, j) for j in range(k)], dtype=np.float64)

    @property
    def j_max(self) -> set:
        return set(np.flatnonzero(self.v == self.n_r).tolist())

    @property
    def visited(self) -> int:
        return int(self.v.sum())

    def j_min(self) -> int:
        return int(np.argmin(self.d))

    def expand(self, j: int) -> float:
        level = int(self.v[j])
        if level >= self.n_r:
            raise ValueError(f"branch {j} is already fully expanded")
        self.d[j] += self.metrics.step_cost(level, j)
        self.v[j] = level + 1
        return float(self.d[j])


def _replay(metrics, order, n_exp, index, trace):
    state = SearchState(metrics)
    for it in range(n_exp):
        j = int(order[it])
        d_val = state.expand(j)
        trace(TraceEvent(it + 1, j, tuple(state.v.tolist()), d_val))
    trace(TraceEvent(n_exp, index, tuple(state.v.tolist()), float(state.d[index]), stop=True))


def _best_first(metrics, stop_on_first, trace):
    costs = metrics.costs()
    n_r, k = costs.shape
    want_order = trace is not None
    order = np.empty(k * (n_r - 1) if want_order else 0, dtype=np.int64)
    j, visited, radius, n_exp = kernels.best_first(costs, stop_on_first, order)
    expansions = tuple(order[:n_exp].tolist()) if want_order else None
    if want_order:
        _replay(metrics, order, int(n_exp), int(j), trace)
    return DecodeOutcome(int(j), int(visited), float(radius), expansions)


def ml_decode(metrics: MetricProvider) -> DecodeOutcome:
    """Exhaustive search over every full branch; ties go to the lowest index."""
    j, visited, radius = kernels.exhaustive(metrics.costs())
    return DecodeOutcome(int(j), int(visited), float(radius))


def mm_decode(
    metrics: MetricProvider, trace: Optional[Callable[[TraceEvent], None]] = None
) -> DecodeOutcome:
    """Minimum-distance of maximum-length search.

    Expands the globally smallest node metric one level at a time and stops
    once that minimum sits at the end of a fully expanded branch, which
    makes the answer identical to :func:`ml_decode`.

    Parameters
    ----------
    metrics : MetricProvider
    trace : callable, optional
        Receives a :class:`TraceEvent` per expansion and one final ``stop``
        event. Tracing replays the search in Python after the kernel runs,
        so the kernel itself is unaffected.
    """
    return _best_first(metrics, False, trace)


def mmw_decode(
    metrics: MetricProvider, trace: Optional[Callable[[TraceEvent], None]] = None
) -> DecodeOutcome:
    """m-M without the optimality check: stops at the first full branch."""
    return _best_first(metrics, True, trace)


def count_nodes_within_radius(metrics: MetricProvider, R: float) -> int:
    """``K`` plus the number of nodes whose metric is at most ``R``."""
    if R < 0:
        raise ValueError("radius must be nonnegative")
    return int(kernels.census(metrics.costs(), float(R)))
