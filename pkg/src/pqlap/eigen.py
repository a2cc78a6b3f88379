"""First eigenpair of the discrete r-Laplacian and the closed-form 1D spectrum.

On (0, 1) the Dirichlet spectrum of -Δ_r is ``λ_k = (r-1) (k π_r)^r`` with
``π_r = 2π / (r sin(π/r))``; the mode-k eigenfunction is the generalized sine
``sin_r(k π_r x)``. The discrete first eigenpair is found by a normalized
descent on the Rayleigh quotient preconditioned with the exact inverse
r-Laplacian (in 1D the inverse is a flux integration plus one scalar root),
so a unit step is one nonlinear inverse-power iteration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .functionals import DomainError, r_laplacian, rayleigh, spow
from .grid import Grid1D, GridFunction, lp_power, norm


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations."""


@dataclass(frozen=True, eq=False)
class EigenPair:
    lam: float
    phi: GridFunction
    r: float
    k: int = 1
    iterations: int = 0


def pi_r(r: float) -> float:
    """Half period of the generalized sine, 2π / (r sin(π/r))."""
    if not r > 1:
        raise ValueError("r must exceed 1")
    return 2.0 * math.pi / (r * math.sin(math.pi / r))


def analytic_lambda_k(r: float, k: int) -> float:
    if k < 1:
        raise ValueError("mode index starts at 1")
    return (r - 1.0) * (k * pi_r(r)) ** r


# --- generalized sine via the initial-value problem -------------------------

def _sin_r_rhs(r: float):
    e = 1.0 / (r - 1.0)

    def rhs(_, y):
        u, w = y
        return [math.copysign(abs(w) ** e, w), -(r - 1.0) * math.copysign(abs(u) ** (r - 1.0), u)]

    return rhs


def _sin_r_ivp(r: float, t_end: float, rtol: float = 1e-12):
    """Integrate -(|u'|^{r-2}u')' = (r-1)|u|^{r-2}u, u(0)=0, u'(0)=1 in flux form."""
    def peak(_, y):
        return y[1]

    peak.terminal = True
    peak.direction = -1
    return solve_ivp(_sin_r_rhs(r), (0.0, t_end), [0.0, 1.0], method="DOP853",
                     rtol=rtol, atol=1e-14, dense_output=True, events=peak)


def shooting_pi_r(r: float) -> float:
    """π_r from the IVP: twice the position of the first flux zero (the peak).

    Independent of the closed form; used to validate it.
    """
    sol = _sin_r_ivp(r, 10.0)
    if not sol.success or len(sol.t_events[0]) == 0:
        raise ConvergenceError(f"sin_r IVP failed for r={r}: {sol.message}")
    return 2.0 * float(sol.t_events[0][0])


def _sin_r_half(r: float):
    """Dense interpolant of sin_r on [0, π_r/2]."""
    sol = _sin_r_ivp(r, 10.0)
    if not sol.success:
        raise ConvergenceError(f"sin_r IVP failed for r={r}: {sol.message}")
    return sol.sol


def analytic_eigenfunction(r: float, k: int, grid: Grid1D) -> EigenPair:
    """Mode-k eigenfunction sin_r(k π_r x) sampled on the grid, ‖φ‖_r = 1.

    One bump is integrated as an IVP up to its peak, then extended by even
    reflection about the peak and odd reflection across each zero.
    """
    if k < 1:
        raise ValueError("mode index starts at 1")
    half = _sin_r_half(r)
    pr = pi_r(r)
    y = k * grid.x
    bump = np.floor(y)
    s = (y - bump) * pr
    s = np.where(s > pr / 2, pr - s, s)
    vals = half(s)[0] * np.where(bump % 2 == 0, 1.0, -1.0)
    # nodes that sit exactly on a zero of the mode
    vals[np.isclose(y, np.round(y), rtol=0, atol=1e-12)] = 0.0
    phi = GridFunction(grid, vals)
    phi = phi / norm(phi, r)
    return EigenPair(lam=analytic_lambda_k(r, k), phi=phi, r=r, k=k)


# --- discrete solver ---------------------------------------------------------

def inverse_r_laplacian(g: np.ndarray, r: float, grid: Grid1D) -> np.ndarray:
    """Solve the discrete -Δ_r v = g with v(0) = v(1) = 0.

    The cell fluxes are ``w_0 - h * cumsum(g)``; the constant ``w_0`` is the
    unique root of the monotone map ``w_0 -> v(1)``.
    """
    h = grid.h
    S = np.concatenate(([0.0], h * np.cumsum(g)))
    lo, hi = float(S.min()), float(S.max())
    if hi == lo:
        return np.zeros(grid.n)
    e = 1.0 / (r - 1.0)
    w0 = brentq(lambda c: float(np.sum(spow(c - S, e))), lo, hi,
                xtol=1e-300, rtol=1e-15, maxiter=500)
    dv = spow(w0 - S, e)
    return h * np.cumsum(dv)[:-1]


def _rayleigh_grad(v: np.ndarray, r: float, grid: Grid1D, R: float) -> np.ndarray:
    u = GridFunction(grid, v)
    den = lp_power(u, r)
    return r * grid.h * (r_laplacian(u, r) - R * spow(v, r - 1)) / den


def first_eigenpair(r: float, grid: Grid1D, tol: float = 1e-13, *,
                    utol: float = 1e-10, max_iter: int = 500,
                    init: GridFunction | None = None) -> EigenPair:
    """Discrete first eigenpair by preconditioned Rayleigh-quotient descent.

    Each step moves toward the normalized inverse-r-Laplacian image of
    ``|u|^{r-2}u`` with Armijo backtracking, then renormalizes ‖u‖_r = 1.
    Stops when the relative quotient decrease is below ``tol`` and the
    iterate moved less than ``utol`` in sup norm.
    """
    if not r > 1:
        raise ValueError("r must exceed 1")
    if init is None:
        v = grid.x * (1.0 - grid.x)
    else:
        v = np.abs(init.values).astype(float)
    v = v / norm(GridFunction(grid, v), r)
    R = rayleigh(GridFunction(grid, v), r)
    for it in range(1, max_iter + 1):
        t = inverse_r_laplacian(spow(v, r - 1), r, grid)
        t = t / norm(GridFunction(grid, t), r)
        d = t - v
        slope = float(np.dot(_rayleigh_grad(v, r, grid, R), d))
        tau = 1.0
        while True:
            cand = v + tau * d
            cand = cand / norm(GridFunction(grid, cand), r)
            R_new = rayleigh(GridFunction(grid, cand), r)
            if R_new <= R + 1e-4 * tau * min(slope, 0.0) + 4e-16 * R or tau < 1e-8:
                break
            tau *= 0.5
        moved = float(np.max(np.abs(cand - v)))
        decrease = R - R_new
        v, R = cand, R_new
        if decrease <= tol * R and moved <= utol:
            phi = GridFunction(grid, v)
            return EigenPair(lam=rayleigh(phi, r), phi=phi, r=r, k=1, iterations=it)
    raise ConvergenceError(f"first_eigenpair(r={r}, n={grid.n}) did not converge in {max_iter} steps")


def mode_eigenpair(r: float, k: int, grid: Grid1D, tol: float = 1e-13) -> EigenPair:
    """Discrete mode-k eigenpair, built from the first eigenpair on a subgrid.

    Needs ``(n + 1) % k == 0`` so the k - 1 interior zeros fall on nodes; the
    k bumps are glued by odd reflection, which satisfies the discrete equation
    at the junction nodes exactly.
    """
    if k == 1:
        return first_eigenpair(r, grid, tol)
    if (grid.n + 1) % k:
        raise ValueError(f"n + 1 = {grid.n + 1} is not divisible by k = {k}")
    m = (grid.n + 1) // k - 1
    sub = first_eigenpair(r, Grid1D(m), tol)
    full = np.zeros(grid.n)
    for j in range(k):
        start = j * (m + 1)
        full[start:start + m] = (-1) ** j * sub.phi.values
    phi = GridFunction(grid, full)
    phi = phi / norm(phi, r)
    return EigenPair(lam=rayleigh(phi, r), phi=phi, r=r, k=k, iterations=sub.iterations)


def eigen_residual(pair: EigenPair, grid: Grid1D | None = None) -> float:
    """Weak residual of the eigen-equation against nodal hat functions.

    Each hat test v_i gives ``h * res_i``; dividing by ∫v_i = h leaves the
    nodal residual density. Reported relative to max|λ φ^{r-1}|.
    """
    phi = pair.phi
    if grid is not None and grid != phi.grid:
        raise ValueError("eigenpair lives on a different grid")
    scale = float(np.max(np.abs(pair.lam * spow(phi.values, pair.r - 1))))
    if scale == 0.0:
        raise DomainError("residual of the zero function is undefined")
    res = r_laplacian(phi, pair.r) - pair.lam * spow(phi.values, pair.r - 1)
    return float(np.max(np.abs(res))) / scale


def count_sign_changes(u: GridFunction, tol: float | None = None) -> int:
    """Sign changes along the node sequence, ignoring near-zero nodes."""
    v = u.values
    if tol is None:
        tol = 1e-8 * u.sup()
    s = np.sign(v[np.abs(v) > tol])
    return int(np.count_nonzero(s[1:] != s[:-1]))

