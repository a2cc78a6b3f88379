"""Scalar functionals of the Dirichlet problem for -Δ_p u - Δ_q u.

Notation used throughout::

    H_α(u) = ‖∇u‖_p^p - α‖u‖_p^p
    G_β(u) = ‖∇u‖_q^q - β‖u‖_q^q
    E(u)   = H_α(u)/p + G_β(u)/q - <f, u>

All integrals are the discrete ones from :mod:`pqlap.grid`, so the discrete
energy gradient is exact for the discrete energy.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .grid import (
    GridFunction,
    check_same_grid,
    default_sign_tol,
    grad_power,
    gradient,
    lp_power,
    pairing,
)


class DomainError(ValueError):
    """A functional was evaluated outside its admissible set."""


#: relative tolerance on H_α (scaled by ‖∇u‖_p^p) for set memberships
H_TOL = 1e-10


def spow(x, e):
    """Signed power ``|x|^e sgn(x)``, safe at x = 0 for any e > 0."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** e


@dataclass(frozen=True)
class Params:
    p: float
    q: float
    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if not (self.p > self.q > 1):
            raise ValueError(f"need p > q > 1, got p={self.p}, q={self.q}")

    def with_(self, **changes) -> "Params":
        d = dict(p=self.p, q=self.q, alpha=self.alpha, beta=self.beta)
        d.update(changes)
        return Params(**d)


@dataclass(frozen=True)
class EnergyReport:
    H: float
    G: float
    pairing_f: float
    E: float

    def to_dict(self) -> dict:
        return {"H": self.H, "G": self.G, "F": self.pairing_f, "E": self.E}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def phi_coefficient(p: float, q: float) -> float:
    """(p-1)/(p-q) * ((p-q)/(q-1))^((q-1)/(p-1)), shared by Φ^± and the tangency."""
    return (p - 1) / (p - q) * ((p - q) / (q - 1)) ** ((q - 1) / (p - 1))


def H_alpha(u: GridFunction, p: float, alpha: float) -> float:
    return grad_power(u, p) - alpha * lp_power(u, p)


def G_beta(u: GridFunction, q: float, beta: float) -> float:
    return grad_power(u, q) - beta * lp_power(u, q)


def r_laplacian(u: GridFunction, r: float) -> np.ndarray:
    """Nodal density of the discrete -Δ_r u."""
    w = spow(gradient(u), r - 1)
    return -(w[1:] - w[:-1]) / u.grid.h


def pq_operator(u: GridFunction, p: float, q: float) -> np.ndarray:
    """Nodal density of the discrete -Δ_p u - Δ_q u."""
    du = gradient(u)
    w = spow(du, p - 1) + spow(du, q - 1)
    return -(w[1:] - w[:-1]) / u.grid.h


def energy(u: GridFunction, params: Params, f: GridFunction) -> EnergyReport:
    check_same_grid(u, f)
    H = H_alpha(u, params.p, params.alpha)
    G = G_beta(u, params.q, params.beta)
    F = pairing(f, u)
    return EnergyReport(H=H, G=G, pairing_f=F, E=H / params.p + G / params.q - F)


def energy_gradient(u: GridFunction, params: Params, f: GridFunction) -> GridFunction:
    """Derivative of the discrete energy, divided by h.

    With this density normalization the vector is the nodal residual of the
    discrete equation ``-Δ_p u - Δ_q u - α|u|^{p-2}u - β|u|^{q-2}u - f``, and
    the directional derivative of E along v is ``h * <g, v>``.
    """
    check_same_grid(u, f)
    p, q = params.p, params.q
    g = (pq_operator(u, p, q) - params.alpha * spow(u.values, p - 1)
         - params.beta * spow(u.values, q - 1) - f.values)
    return GridFunction(u.grid, g)


def rayleigh(u: GridFunction, r: float) -> float:
    den = lp_power(u, r)
    if den == 0.0:
        raise DomainError("Rayleigh quotient of the zero function")
    return grad_power(u, r) / den


def _is_nonnegative(u: GridFunction) -> bool:
    return bool(np.min(u.values) >= -default_sign_tol(u))


def _h_tol(u: GridFunction, p: float) -> float:
    return H_TOL * grad_power(u, p)


def _phi(u: GridFunction, params: Params, f: GridFunction, sign: int) -> float:
    check_same_grid(u, f)
    p, q = params.p, params.q
    if u.sup() == 0.0:
        raise DomainError("Φ is undefined at u = 0")
    if not _is_nonnegative(u):
        raise DomainError("Φ requires a nonnegative function")
    H = sign * H_alpha(u, p, params.alpha)
    if H < -_h_tol(u, p):
        raise DomainError(f"{'-' if sign < 0 else ''}H_α(u) = {H:.3e} < 0")
    F = pairing(f, u)
    if F < 0:
        raise DomainError(f"<f, u> = {F:.3e} < 0; f must be nonnegative")
    nq = lp_power(u, q)
    extra = phi_coefficient(p, q) * max(H, 0.0) ** ((q - 1) / (p - 1)) * F ** ((p - q) / (p - 1))
    return grad_power(u, q) / nq + sign * extra / nq


def phi_plus(u: GridFunction, params: Params, f: GridFunction) -> float:
    """Φ_α^+(u) for u in B^+(α)."""
    return _phi(u, params, f, +1)


def phi_minus(u: GridFunction, params: Params, f: GridFunction) -> float:
    """Φ_α^-(u) for u in B^-(α)."""
    return _phi(u, params, f, -1)


def in_B_plus(u: GridFunction, params: Params) -> bool:
    if u.sup() == 0.0 or not _is_nonnegative(u):
        return False
    return H_alpha(u, params.p, params.alpha) >= -_h_tol(u, params.p)


def in_B_minus(u: GridFunction, params: Params) -> bool:
    if u.sup() == 0.0 or not _is_nonnegative(u):
        return False
    return H_alpha(u, params.p, params.alpha) <= _h_tol(u, params.p)


def in_Y(u: GridFunction, p: float, lam: float) -> bool:
    return grad_power(u, p) >= lam * lp_power(u, p) - _h_tol(u, p)


def extended_functional(u: GridFunction, phi: GridFunction, params: Params) -> float:
    """L_α(u; φ) for positive u and a nonnegative test function φ."""
    check_same_grid(u, phi)
    if np.min(u.values) <= 0:
        raise DomainError("extended functional needs u > 0 at interior nodes")
    p, q, h = params.p, params.q, u.grid.h
    du, dphi = gradient(u), gradient(phi)
    num = (h * np.sum((spow(du, p - 1) + spow(du, q - 1)) * dphi)
           - params.alpha * h * np.sum(u.values ** (p - 1) * phi.values))
    den = h * np.sum(u.values ** (q - 1) * phi.values)
    if den <= 0:
        raise DomainError("denominator of L_α is not positive")
    return float(num / den)


def hat_extended_values(u: GridFunction, params: Params) -> np.ndarray:
    """L_α(u; v_i) for every nodal hat function v_i, vectorized.

    With nodal quadrature the infimum of L_α(u; ·) over all nonnegative grid
    functions equals the minimum of this vector.
    """
    if np.min(u.values) <= 0:
        raise DomainError("extended functional needs u > 0 at interior nodes")
    p, q = params.p, params.q
    num = pq_operator(u, p, q) - params.alpha * u.values ** (p - 1)
    return num / u.values ** (q - 1)


def l2_decompose(u: GridFunction, phi_p: GridFunction) -> tuple[float, GridFunction]:
    check_same_grid(u, phi_p)
    nrm2 = lp_power(phi_p, 2)
    if nrm2 == 0.0:
        raise DomainError("cannot decompose along the zero function")
    gamma = pairing(u, phi_p) / nrm2
    return gamma, u - gamma * phi_p


def improved_poincare_ratio(u: GridFunction, p: float, phi_p: GridFunction,
                            lambda1: float, rtol: float = 1e-12) -> float:
    """H_{λ1}(u) / (|γ|^{p-2} ∫|∇φ_p|^{p-2}|∇u⊥|² + ‖∇u⊥‖_p^p)."""
    if p < 2:
        raise ValueError("improved Poincaré ratio is defined for p >= 2")
    gamma, u_perp = l2_decompose(u, phi_p)
    dphi, dperp = gradient(phi_p), gradient(u_perp)
    h = u.grid.h
    den = (abs(gamma) ** (p - 2) * h * np.sum(np.abs(dphi) ** (p - 2) * dperp ** 2)
           + grad_power(u_perp, p))
    if den <= rtol * max(grad_power(u, p), 1e-300):
        raise DomainError("u is (numerically) a multiple of φ_p")
    return H_alpha(u, p, lambda1) / den

