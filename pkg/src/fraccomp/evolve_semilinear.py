"""Semilinear evolution d_t^alpha (u - a) + A u = f(u) by the same fixed-point
marching as the linear solver, with the nonlinearity evaluated nodewise in
physical space and projected onto the modes each sweep, plus the stationary
problem A u_inf = f(u_inf) by damped Newton.

Built-in nonlinearities: the saturating enzyme sink -u/(1+|u|) and the
advective Burgers product -mu(x) u u_x (gradient-dependent, hence excluded
from comparison-principle checks)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .elliptic import (
    EigenDecomposition,
    EllipticSpec,
    Grid1D,
    SpaceField,
    assemble,
    banded_solve,
    eigendecompose,
)
from .evolve_linear import Field, ProblemSpec, SolverError, spectral_march

__all__ = [
    "SemilinearTerm",
    "BoxExitError",
    "builtin_enzyme",
    "builtin_burgers",
    "solve_semilinear",
    "solve_semilinear_stationary",
    "scalar_fractional_ode",
]


class BoxExitError(SolverError):
    """The state left the box on which the nonlinearity's bounds are certified."""


@dataclass(frozen=True)
class SemilinearTerm:
    """Pointwise source f(x, u) with |f|, |f_u| <= bound_M on |u| <= box_m.

    Gradient-dependent terms take (x, u, u_x) and are flagged; the comparison
    machinery refuses them (the ordering theorems need f independent of
    derivatives)."""

    eval: Callable
    deriv_u: Optional[Callable] = None
    bound_M: float = 1.0
    monotone_decreasing: bool = False
    depends_on_gradient: bool = False
    box_m: float = math.inf

    def __call__(self, x, u, ux=None):
        if self.depends_on_gradient:
            return np.asarray(self.eval(x, u, ux), dtype=float) * np.ones_like(u)
        return np.asarray(self.eval(x, u), dtype=float) * np.ones_like(u)

    def shifted(self, delta):
        """The term plus a constant; keeps the ordering f1 >= f2 testable."""
        if self.depends_on_gradient:
            raise ValueError("shift only supported for pointwise terms")
        return SemilinearTerm(
            eval=lambda x, u: self.eval(x, u) + delta,
            deriv_u=self.deriv_u,
            bound_M=self.bound_M + abs(delta),
            monotone_decreasing=self.monotone_decreasing,
            box_m=self.box_m,
        )


def builtin_enzyme() -> SemilinearTerm:
    """Saturating sink -u/(1+|u|): globally C^1 with unit bound, decreasing."""
    return SemilinearTerm(
        eval=lambda x, u: -u / (1.0 + np.abs(u)),
        deriv_u=lambda x, u: -1.0 / (1.0 + np.abs(u)) ** 2,
        bound_M=1.0,
        monotone_decreasing=True,
    )


def builtin_burgers(mu=1.0) -> SemilinearTerm:
    """Advective product -mu(x) u u_x of the fractional Burgers equation."""
    mu_fun = mu if callable(mu) else (lambda x: mu * np.ones_like(x))
    return SemilinearTerm(
        eval=lambda x, u, ux: -np.asarray(mu_fun(x), dtype=float) * u * ux,
        deriv_u=None,
        bound_M=math.inf,
        depends_on_gradient=True,
    )


def solve_semilinear(
    p: ProblemSpec,
    f: SemilinearTerm,
    eig: Optional[EigenDecomposition] = None,
    tol: float = 1e-10,
    max_iter: int = 50,
    info: Optional[dict] = None,
) -> Field:
    """Per-node Picard iteration on the fixed-point map with f evaluated
    pointwise on the grid.  Hard-fails when |u| exceeds the declared box
    (the Lipschitz certificate stops there) or when the iteration stalls
    (the contraction is local in time: refine the grid or shrink T)."""
    op = assemble(p.elliptic, p.grid)
    if eig is None:
        eig = eigendecompose(op)
    x = p.grid.nodes

    def nonlinearity(u, t):
        if f.depends_on_gradient:
            return f(x, u, op.deriv @ u)
        return f(x, u)

    box = f.box_m

    def guard(u, node):
        peak = float(np.max(np.abs(u)))
        if peak > box:
            raise BoxExitError(
                f"|u| = {peak:.3g} left the certified box m = {box:.3g} at node {node}",
                node=node,
            )

    a_peak = float(np.max(np.abs(p.initial_values())))
    if a_peak > box:
        raise BoxExitError(f"initial value already outside the box m = {box:.3g}", node=0)

    u, counts = spectral_march(
        p, eig, op,
        nonlinearity=nonlinearity,
        picard_tol=tol,
        picard_max=max_iter,
        state_guard=guard,
    )
    if info is not None:
        info["picard_counts"] = counts
    return Field(p.grid, p.tgrid, u)


def solve_semilinear_stationary(
    spec: EllipticSpec,
    grid: Grid1D,
    f: SemilinearTerm,
    max_steps: int = 100,
    tol: float = 1e-10,
) -> SpaceField:
    """Damped Newton for A u = f(u) with the Robin closure, from u = 0.

    Needs a decreasing f (the long-time theory's hypothesis) and a zeroth-order
    coefficient c <= 0 so that A - f'(u) stays invertible."""
    if f.depends_on_gradient:
        raise ValueError("stationary solver needs a pointwise nonlinearity")
    if not f.monotone_decreasing:
        raise ValueError("stationary solver requires a monotone decreasing term")
    cf = spec.c_fun()
    if cf is not None and np.max(cf(grid.nodes, 0.0)) > 0.0:
        raise ValueError("stationary theory needs c <= 0")
    op = assemble(spec, grid)
    A = op.full_matrix(0.0)
    x = grid.nodes
    u = np.zeros(grid.n_nodes)

    def residual(v):
        return A @ v - f(x, v)

    r = residual(u)
    scale = max(1.0, float(np.max(np.abs(f(x, u)))))
    for _ in range(max_steps):
        rn = float(np.max(np.abs(r)))
        if rn <= tol * scale:
            break
        J = A.copy()
        if f.deriv_u is not None:
            J[np.arange(x.size), np.arange(x.size)] -= f.deriv_u(x, u) * np.ones_like(u)
        try:
            step = banded_solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SolverError("Newton linearisation is singular") from exc
        lam = 1.0
        for _ in range(40):
            trial = u + lam * step
            rt = residual(trial)
            if float(np.max(np.abs(rt))) < rn:
                u, r = trial, rt
                break
            lam *= 0.5
        else:
            raise SolverError("Newton damping failed to reduce the residual")
    else:
        raise SolverError(f"Newton did not converge in {max_steps} damped steps")
    if float(np.max(np.abs(u))) > f.box_m:
        raise BoxExitError("stationary state left the certified box")
    return SpaceField(grid, u)


def scalar_fractional_ode(tgrid, alpha, y0, rhs, rhs_du=None, newton_tol=1e-12):
    """Implicit L1 marching of d_t^alpha (y - y0) = rhs(y) (brute-force oracle
    for spatially flat problems).  rhs_du enables Newton; otherwise damped
    fixed point with numerical slope."""
    from .fracops import caputo_l1_weights

    t = tgrid.nodes
    y = np.empty(t.size)
    y[0] = y0
    dy = np.empty(t.size - 1)
    for m in range(1, t.size):
        w = caputo_l1_weights(t[: m + 1], alpha)
        hist = 0.0 if m == 1 else float(w[: m - 1] @ dy[: m - 1])
        d = w[-1]
        # solve d*(ym - y[m-1]) + hist = rhs(ym)
        ym = y[m - 1]
        for _ in range(100):
            g = d * (ym - y[m - 1]) + hist - rhs(ym)
            slope = d - (rhs_du(ym) if rhs_du is not None else (rhs(ym + 1e-7) - rhs(ym - 1e-7)) / 2e-7)
            step = -g / slope
            ym += step
            if abs(step) <= newton_tol * (1.0 + abs(ym)):
                break
        y[m] = ym
        dy[m - 1] = y[m] - y[m - 1]
    return y
