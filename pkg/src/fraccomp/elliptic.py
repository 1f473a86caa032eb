"""Second-order elliptic operators on a 1D interval with Neumann/Robin closure.

The self-adjoint part -(a u')' + c0 u is discretised in flux (finite-volume)
form on a grid that carries both endpoints as unknowns: half cells at the
boundary, ghost-free Robin closure through the conormal flux a u' nu + sigma u.
This makes the stiffness matrix exactly symmetric, so the eigenproblem is a
weighted symmetric tridiagonal one, second order in h including the boundary.

Drift terms b(x,t) d/dx and zeroth-order terms never enter the eigenproblem;
they are kept as separate matrices and routed through the solvers' splitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

__all__ = [
    "Grid1D",
    "EllipticSpec",
    "DiscreteOperator",
    "EigenDecomposition",
    "SpaceField",
    "SingularOperatorError",
    "DegenerateEigenpairError",
    "assemble",
    "eigendecompose",
    "principal_eigenpair",
    "solve_stationary",
    "coercivity_form",
]


class SingularOperatorError(np.linalg.LinAlgError):
    pass


class DegenerateEigenpairError(RuntimeError):
    pass


def _as_xfun(f):
    """Coefficient given as a constant or a callable of x."""
    if f is None:
        return None
    if callable(f):
        return lambda x: np.asarray(f(x), dtype=float) * np.ones_like(x)
    c = float(f)
    return lambda x: np.full_like(np.asarray(x, dtype=float), c)


def _as_xtfun(f):
    """Coefficient given as a constant or a callable of (x, t)."""
    if f is None:
        return None
    if callable(f):
        return lambda x, t: np.asarray(f(x, t), dtype=float) * np.ones_like(x)
    c = float(f)
    return lambda x, t: np.full_like(np.asarray(x, dtype=float), c)


@dataclass(frozen=True)
class Grid1D:
    x_lo: float
    x_hi: float
    n: int  # interior unknowns; nodes include both endpoints

    def __post_init__(self):
        if not self.x_lo < self.x_hi:
            raise ValueError("need x_lo < x_hi")
        if self.n < 3:
            raise ValueError("need at least 3 interior nodes")

    @property
    def h(self):
        return (self.x_hi - self.x_lo) / (self.n + 1)

    @property
    def nodes(self):
        return np.linspace(self.x_lo, self.x_hi, self.n + 2)

    @property
    def n_nodes(self):
        return self.n + 2

    @property
    def volumes(self):
        """Cell volumes: the trapezoidal weights of the discrete L2 product."""
        w = np.full(self.n + 2, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w


@dataclass(frozen=True)
class SpaceField:
    grid: Grid1D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.shape != (self.grid.n_nodes,):
            raise ValueError("values must live on all grid nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")


@dataclass(frozen=True)
class EllipticSpec:
    """Coefficients of -A u = (a u')' + b u' + c u, the shifted self-adjoint
    part -(a u')' + c0 u, and the Robin data sigma >= 0 at both endpoints.
    b0 > 0 activates the positive-reaction form -(a u')' - b u' + b0 u."""

    a: object = 1.0
    b: object = None
    c: object = None
    c0: float = 0.0
    sigma_lo: float = 0.0
    sigma_hi: float = 0.0
    b0: object = None

    def __post_init__(self):
        if self.c0 < 0.0:
            raise ValueError("c0 must be >= 0")
        if self.sigma_lo < 0.0 or self.sigma_hi < 0.0:
            raise ValueError("Robin coefficients must be >= 0")

    def a_fun(self):
        return _as_xfun(self.a)

    def b_fun(self):
        return _as_xtfun(self.b)

    def c_fun(self):
        return _as_xtfun(self.c)

    def b0_fun(self):
        return _as_xtfun(self.b0)


def _derivative_matrix(grid):
    """d/dx, centred inside, one-sided second order at the endpoints."""
    m = grid.n_nodes
    h = grid.h
    G = np.zeros((m, m))
    for i in range(1, m - 1):
        G[i, i - 1] = -0.5 / h
        G[i, i + 1] = 0.5 / h
    G[0, 0], G[0, 1], G[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
    G[-1, -1], G[-1, -2], G[-1, -3] = 1.5 / h, -2.0 / h, 0.5 / h
    return G


@dataclass(frozen=True)
class DiscreteOperator:
    """Flux-form discretisation split into a symmetric part and drift."""

    grid: Grid1D
    spec: EllipticSpec
    flux_diag: np.ndarray = field(repr=False)      # T0 main diagonal (no c0 yet)
    flux_off: np.ndarray = field(repr=False)       # T0 off diagonal
    volumes: np.ndarray = field(repr=False)
    deriv: np.ndarray = field(repr=False)          # d/dx matrix

    def apply_sym(self, v):
        """Pointwise A0 v = (-(a v')' + c0 v) with the Robin closure."""
        v = np.asarray(v, dtype=float)
        out = self.flux_diag * v
        out[:-1] += self.flux_off * v[1:]
        out[1:] += self.flux_off * v[:-1]
        return out / self.volumes + self.spec.c0 * v

    def q_parts(self, t):
        """Vectors (b, c0 + c) sampled at time t for the splitting
        Q u = b u' + (c0 + c) u."""
        x = self.grid.nodes
        bf = self.spec.b_fun()
        cf = self.spec.c_fun()
        b = bf(x, t) if bf is not None else None
        c = cf(x, t) if cf is not None else np.zeros_like(x)
        return b, self.spec.c0 + c

    def apply_q(self, v, t):
        b, czero = self.q_parts(t)
        out = czero * v
        if b is not None:
            out = out + b * (self.deriv @ v)
        return out

    def apply_full(self, v, t=0.0):
        """A v = A0 v - Q v = -(a v')' - b v' - c v (c0 cancels)."""
        return self.apply_sym(v) - self.apply_q(v, t)

    def full_matrix(self, t=0.0):
        """Dense matrix of A at time t (for implicit stepping)."""
        m = self.grid.n_nodes
        M = np.zeros((m, m))
        idx = np.arange(m)
        M[idx, idx] = self.flux_diag / self.volumes + self.spec.c0
        M[idx[:-1], idx[:-1] + 1] += self.flux_off / self.volumes[:-1]
        M[idx[1:], idx[1:] - 1] += self.flux_off / self.volumes[1:]
        b, czero = self.q_parts(t)
        M[idx, idx] -= czero
        if b is not None:
            M -= b[:, None] * self.deriv
        return M

    def robin_residual(self, v):
        """Conormal-plus-sigma boundary residuals (left, right) of a field,
        with one-sided second-order derivatives."""
        x = self.grid.nodes
        af = self.spec.a_fun()
        dv = self.deriv @ np.asarray(v, dtype=float)
        lo = -float(af(x[:1])[0]) * dv[0] + self.spec.sigma_lo * v[0]
        hi = float(af(x[-1:])[0]) * dv[-1] + self.spec.sigma_hi * v[-1]
        return lo, hi


def assemble(spec: EllipticSpec, grid: Grid1D, t: float = 0.0) -> DiscreteOperator:
    """Flux-form assembly; rejects non-elliptic a(x)."""
    x = grid.nodes
    h = grid.h
    af = spec.a_fun()
    a_mid = af(0.5 * (x[:-1] + x[1:]))
    if np.min(af(x)) <= 0.0 or np.min(a_mid) <= 0.0:
        raise ValueError("ellipticity violated: a(x) must be positive")
    m = grid.n_nodes
    diag = np.zeros(m)
    off = -a_mid / h
    diag[1:-1] = (a_mid[:-1] + a_mid[1:]) / h
    diag[0] = a_mid[0] / h + spec.sigma_lo
    diag[-1] = a_mid[-1] / h + spec.sigma_hi
    return DiscreteOperator(
        grid=grid,
        spec=spec,
        flux_diag=diag,
        flux_off=off,
        volumes=grid.volumes,
        deriv=_derivative_matrix(grid),
    )


@dataclass(frozen=True)
class EigenDecomposition:
    lambdas: np.ndarray
    modes: np.ndarray = field(repr=False)      # columns phi_n on the nodes
    weights: np.ndarray = field(repr=False)    # discrete L2 weights

    def inner(self, u, v):
        return float(np.sum(self.weights * u * v))

    def project(self, v):
        """Coefficients (v, phi_n)_h for all retained modes."""
        return self.modes.T @ (self.weights * v)

    def synthesize(self, coef):
        return self.modes @ coef


def eigendecompose(op: DiscreteOperator, k: Optional[int] = None) -> EigenDecomposition:
    """k smallest eigenpairs of the symmetric part, orthonormal under the cell
    weights; only the self-adjoint A0 enters (drift is handled by splitting)."""
    w = op.volumes
    sw = np.sqrt(w)
    d = op.flux_diag / w + op.spec.c0
    e = op.flux_off / (sw[:-1] * sw[1:])
    m = op.grid.n_nodes
    k = m if k is None else int(k)
    if not 1 <= k <= m:
        raise ValueError(f"k must lie in [1, {m}]")
    try:
        lam, psi = eigh_tridiagonal(d, e, select="i", select_range=(0, k - 1))
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise RuntimeError("tridiagonal eigensolver failed") from exc
    modes = psi / sw[:, None]
    # deterministic signs: positive weighted mean, falling back to the largest entry
    for j in range(modes.shape[1]):
        s = np.sum(w * modes[:, j])
        if abs(s) < 1e-12:
            s = modes[np.argmax(np.abs(modes[:, j])), j]
        if s < 0:
            modes[:, j] = -modes[:, j]
    return EigenDecomposition(lambdas=lam, modes=modes, weights=w)


def principal_eigenpair(eig: EigenDecomposition):
    """(lambda_1, phi_1) with phi_1 positive at every node; rejects numerically
    degenerate ground states (they indicate a discretisation fault)."""
    lam = eig.lambdas
    if lam.size >= 2 and lam[1] - lam[0] <= 1e-10 * abs(lam[0]):
        raise DegenerateEigenpairError(
            f"ground eigenvalue not simple: lambda_1={lam[0]}, lambda_2={lam[1]}"
        )
    phi = eig.modes[:, 0].copy()
    if np.max(phi) < 0.0:
        phi = -phi
    if np.min(phi) <= 0.0:
        raise DegenerateEigenpairError("ground mode changes sign on the grid")
    return float(lam[0]), phi


def _reaction_vector(spec, grid, t):
    """b0(x,t) when present, else the c0 shift (the A0 form)."""
    b0f = spec.b0_fun()
    if b0f is not None:
        vec = b0f(grid.nodes, t)
        if np.min(vec) <= 0.0:
            raise ValueError("b0 must be positive")
        return vec, True
    return np.full(grid.n_nodes, spec.c0), False


def _stationary_matrix(op, t, reaction):
    m = op.grid.n_nodes
    M = np.zeros((m, m))
    idx = np.arange(m)
    M[idx, idx] = op.flux_diag / op.volumes + reaction
    M[idx[:-1], idx[:-1] + 1] += op.flux_off / op.volumes[:-1]
    M[idx[1:], idx[1:] - 1] += op.flux_off / op.volumes[1:]
    bf = op.spec.b_fun()
    if bf is not None:
        M -= bf(op.grid.nodes, t)[:, None] * op.deriv
    return M


def banded_solve(M, rhs):
    """Solve with the pentadiagonal structure all operators here have."""
    m = M.shape[0]
    ab = np.zeros((5, m))
    for r, offset in zip(range(5), range(2, -3, -1)):
        ab[r, max(0, offset) : m + min(0, offset)] = np.diagonal(M, offset)
    return solve_banded((2, 2), ab, rhs)


def solve_stationary(spec: EllipticSpec, grid: Grid1D, rhs, boundary_rhs=(0.0, 0.0), t=0.0) -> SpaceField:
    """Solve A1 psi = rhs (or A0 psi = rhs when b0 is absent) with possibly
    inhomogeneous Robin data a psi' nu + sigma psi = g at the endpoints."""
    op = assemble(spec, grid, t)
    reaction, _ = _reaction_vector(spec, grid, t)
    M = _stationary_matrix(op, t, reaction)
    f = np.asarray(rhs.values if isinstance(rhs, SpaceField) else rhs, dtype=float).copy()
    g_lo, g_hi = boundary_rhs
    f[0] += g_lo / op.volumes[0]
    f[-1] += g_hi / op.volumes[-1]
    try:
        sol = banded_solve(M, f)
    except np.linalg.LinAlgError as exc:
        raise SingularOperatorError("stationary operator is singular") from exc
    res = np.max(np.abs(M @ sol - f))
    scale = np.max(np.abs(f)) + np.max(np.abs(sol)) + 1e-30
    if not np.all(np.isfinite(sol)) or res > 1e-10 * scale:
        raise SingularOperatorError(
            f"stationary solve failed: relative residual {res / scale:.2e}"
        )
    return SpaceField(grid, sol)


def _flux_apply(op, v):
    """T0 v (flux part including sigma), not volume-scaled."""
    out = op.flux_diag * v
    out[:-1] += op.flux_off * v[1:]
    out[1:] += op.flux_off * v[:-1]
    return out


def coercivity_form(op: DiscreteOperator, v, t: float = 0.0) -> float:
    """Discrete (A1 v, v)_h including the boundary sigma terms.

    Compare against kappa1 (||v||_h^2 + ||v'||_h^2); see h1_norm_sq."""
    vv = np.asarray(v.values if isinstance(v, SpaceField) else v, dtype=float)
    reaction, _ = _reaction_vector(op.spec, op.grid, t)
    quad = float(vv @ _flux_apply(op, vv)) + float(np.sum(op.volumes * reaction * vv * vv))
    bf = op.spec.b_fun()
    if bf is not None:
        quad -= float(np.sum(op.volumes * bf(op.grid.nodes, t) * (op.deriv @ vv) * vv))
    return quad


def h1_norm_sq(grid: Grid1D, v) -> tuple:
    """(||v||_h^2, ||v'||_h^2) with midpoint differences for the gradient."""
    vv = np.asarray(v.values if isinstance(v, SpaceField) else v, dtype=float)
    w = grid.volumes
    l2 = float(np.sum(w * vv * vv))
    dv = np.diff(vv) / grid.h
    h1 = float(np.sum(grid.h * dv * dv))
    return l2, h1
