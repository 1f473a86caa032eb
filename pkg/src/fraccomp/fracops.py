"""Discrete fractional calculus on time grids.

Riemann-Liouville integrals by product integration (exact for piecewise-linear
data), Caputo derivatives by the classical L1 scheme (exact for affine data,
order 2-alpha for smooth data), and the discrete extremum-principle check:
at an interior-or-right-end minimum the Caputo derivative is nonpositive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

__all__ = [
    "TimeGrid",
    "TimeSeries",
    "NotApplicableError",
    "rl_integral",
    "caputo_l1",
    "caputo_l1_weights",
    "caputo_l1_field",
    "extremum_check",
    "ExtremumReport",
]


class NotApplicableError(ValueError):
    """The requested check's hypotheses are not met by the data."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing nodes t_0 = 0 < t_1 < ... < t_N = T."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("need at least 3 nodes (N >= 2 steps)")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at t = 0")
        if not np.all(np.diff(nodes) > 0.0):
            raise ValueError("nodes must be strictly increasing")

    @classmethod
    def uniform(cls, T, n_steps):
        return cls(np.linspace(0.0, float(T), int(n_steps) + 1))

    @classmethod
    def graded(cls, T, n_steps, r):
        """t_k = T (k/N)^r; r = 2/alpha compensates the t^alpha initial layer."""
        if r < 1.0:
            raise ValueError("grading exponent must be >= 1")
        k = np.arange(int(n_steps) + 1, dtype=float)
        return cls(float(T) * (k / n_steps) ** float(r))

    @property
    def horizon(self):
        return float(self.nodes[-1])

    @property
    def n_steps(self):
        return self.nodes.size - 1

    @property
    def steps(self):
        return np.diff(self.nodes)

    def max_step(self):
        return float(np.max(self.steps))


@dataclass(frozen=True)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.nodes.shape:
            raise ValueError("values length must match grid nodes")


def rl_integral(y: TimeSeries, beta: float) -> TimeSeries:
    """Riemann-Liouville integral J^beta y with piecewise-linear y.

    Exact for y linear in t; the quadrature weights are nonnegative, so
    nonnegative input gives nonnegative output identically.
    """
    if not (0.0 < beta <= 2.0):
        raise ValueError(f"beta must lie in (0, 2], got {beta}")
    t = y.grid.nodes
    v = y.values
    n = t.size
    inv_g1 = np.exp(-gammaln(beta + 1.0))
    inv_g2 = np.exp(-gammaln(beta + 2.0))
    out = np.zeros(n)
    for m in range(1, n):
        a = t[m] - t[:m]       # distances to left step ends, descending
        b = t[m] - t[1 : m + 1]
        tau = a - b
        pa = a ** beta
        pb = b ** beta
        # exact moments of (t-s)^(beta-1)/Gamma(beta): against 1 and (s - t_k)
        i0 = (pa - pb) * inv_g1
        i1 = a * (pa - pb) * inv_g1 - (a ** (beta + 1.0) - b ** (beta + 1.0)) * beta * inv_g2
        slope = (v[1 : m + 1] - v[:m]) / tau
        out[m] = np.dot(v[:m], i0) + np.dot(slope, i1)
    return TimeSeries(y.grid, out)


def caputo_l1_weights(t, alpha):
    """L1 weights d_{m,k}: the mean of the kernel (t_m - s)^(-alpha)/Gamma(1-alpha)
    over [t_k, t_{k+1}], for one output node t_m = t[-1].

    Increasing in k on any grid, which is what makes the implicit scheme order
    preserving.  On strongly graded grids early steps can be unresolvable
    against t_m in float64; the mean then degenerates to the kernel value."""
    inv_g2a = np.exp(-gammaln(2.0 - alpha))
    a = t[-1] - t[:-1]
    b = t[-1] - t[1:]
    tau = a - b
    with np.errstate(invalid="ignore", divide="ignore"):
        w = inv_g2a * (a ** (1.0 - alpha) - b ** (1.0 - alpha)) / tau
    degenerate = ~(tau > 0.0) | ~np.isfinite(w)
    if degenerate.any():
        inv_g1a = np.exp(-gammaln(1.0 - alpha))
        w = np.where(degenerate, inv_g1a * np.maximum(a, 1e-300) ** -alpha, w)
    return w


def caputo_l1(y: TimeSeries, alpha: float) -> TimeSeries:
    """Pointwise Caputo derivative by the L1 scheme; output[0] = 0 by convention.

    Constant shifts drop out exactly, matching d_t^alpha y = d_t^alpha (y - y(0)).
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    t = y.grid.nodes
    v = y.values
    n = t.size
    out = np.zeros(n)
    dv = np.diff(v)
    for m in range(1, n):
        w = caputo_l1_weights(t[: m + 1], alpha)
        out[m] = np.dot(w, dv[:m])
    return TimeSeries(y.grid, out)


def caputo_l1_field(tgrid: TimeGrid, values: np.ndarray, alpha: float) -> np.ndarray:
    """L1 Caputo derivative applied along axis 0 of a (time, space) array."""
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    t = tgrid.nodes
    v = np.asarray(values, dtype=float)
    if v.shape[0] != t.size:
        raise ValueError("axis 0 must match the time grid")
    out = np.zeros_like(v)
    dv = np.diff(v, axis=0)
    for m in range(1, t.size):
        w = caputo_l1_weights(t[: m + 1], alpha)
        out[m] = w @ dv[:m]
    return out


@dataclass(frozen=True)
class ExtremumReport:
    t_min_index: int
    caputo_at_min: float
    tolerance: float
    holds: bool


def extremum_check(y: TimeSeries, alpha: float) -> ExtremumReport:
    """At a sampled minimum with t_0 > 0 the Caputo derivative must be <= 0,
    up to the L1 discretisation error (estimated from second differences).

    Raises NotApplicableError when the minimum sits at t = 0; the principle
    genuinely needs t_0 > 0.
    """
    v = y.values
    k = int(np.argmin(v))
    if k == 0:
        raise NotApplicableError("minimum attained at t=0; the check needs t_0 > 0")
    cap = caputo_l1(y, alpha).values[k]
    t = y.grid.nodes
    tau = float(np.max(np.diff(t)))
    # crude max |y''| from second differences on the (possibly nonuniform) grid
    if v.size >= 3:
        h1 = np.diff(t)[:-1]
        h2 = np.diff(t)[1:]
        second = 2.0 * (v[2:] * h1 - v[1:-1] * (h1 + h2) + v[:-2] * h2) / (h1 * h2 * (h1 + h2))
        ypp = float(np.max(np.abs(second))) if second.size else 0.0
    else:
        ypp = 0.0
    tol = 10.0 * tau ** (2.0 - alpha) * max(ypp, 1.0)
    return ExtremumReport(k, float(cap), tol, bool(cap <= tol))
