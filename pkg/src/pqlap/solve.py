"""Solutions of -Δ_p u - Δ_q u = α|u|^{p-2}u + β|u|^{q-2}u + f on (0, 1).

Shooting integrates the first-order system in the flux variable
``w = Ψ(u')``, ``Ψ(s) = |s|^{p-2}s + |s|^{q-2}s``, which stays regular where
u' vanishes. Brackets found with the RK4 shot are re-solved with a marching
scheme that reproduces the discrete equations node by node, so accepted
solutions are critical points of the discrete energy up to round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.linalg import LinAlgError, solve_banded, solveh_banded
from scipy.optimize import brentq

from .curves import CurvesContext
from .eigen import ConvergenceError, first_eigenpair
from .functionals import (
    H_TOL,
    DomainError,
    EnergyReport,
    H_alpha,
    Params,
    energy,
    energy_gradient,
    phi_coefficient,
    pq_operator,
    spow,
)
from .grid import (
    Grid1D,
    GridFunction,
    SignClass,
    classify_sign,
    grad_power,
    gradient,
    lp_power,
    pairing,
    split_signs,
)

FLUX_TOL = 1e-13
BLOWUP = 1e8


# --- scalar flux -----------------------------------------------------------------------

@numba.njit(cache=True)
def _flux(s, p, q):
    a = abs(s)
    return math.copysign(a ** (p - 1) + a ** (q - 1), s)


@numba.njit(cache=True)
def _flux_inverse(w, p, q, tol):
    if w == 0.0:
        return 0.0
    target = abs(w)
    # each power alone is ≤ |w|, so the root is at most the smaller solo root
    hi = min(target ** (1.0 / (p - 1)), target ** (1.0 / (q - 1)))
    lo = 0.0
    t = hi
    atol = max(tol, 4e-16 * target)
    for _ in range(200):
        g = t ** (p - 1) + t ** (q - 1) - target
        if abs(g) <= atol:
            break
        if g > 0:
            hi = t
        else:
            lo = t
        dg = (p - 1) * t ** (p - 2) + (q - 1) * t ** (q - 2) if t > 0 else np.inf
        step = t - g / dg
        # Newton unless it leaves the bracket or stalls; then bisect
        if not (lo < step < hi) or step == t:
            step = 0.5 * (lo + hi)
        if step == t:
            break
        t = step
    return math.copysign(t, w)


def flux(s: float, p: float, q: float) -> float:
    """Ψ(s) = |s|^{p-2}s + |s|^{q-2}s."""
    return float(_flux(float(s), float(p), float(q)))


def flux_inverse(w: float, p: float, q: float, tol: float = FLUX_TOL) -> float:
    """Ψ^{-1}(w) by Newton's method safeguarded with bisection."""
    if not p > q > 1:
        raise ValueError(f"need p > q > 1, got p={p}, q={q}")
    return float(_flux_inverse(float(w), float(p), float(q), float(tol)))


# --- shooting kernels ------------------------------------------------------------------------

@numba.njit(cache=True)
def _rhs(u, w, fx, p, q, alpha, beta, tol):
    du = _flux_inverse(w, p, q, tol)
    au = abs(u)
    dw = -(alpha * math.copysign(au ** (p - 1), u) + beta * math.copysign(au ** (q - 1), u) + fx)
    return du, dw


@numba.njit(cache=True)
def _rk4_shot(f_full, h, slope0, p, q, alpha, beta, tol, out):
    """Classical RK4 on the node grid; f at midpoints by linear interpolation."""
    n1 = f_full.shape[0] - 1
    u, w = 0.0, slope0
    for i in range(n1):
        f0, f2 = f_full[i], f_full[i + 1]
        f1 = 0.5 * (f0 + f2)
        k1u, k1w = _rhs(u, w, f0, p, q, alpha, beta, tol)
        k2u, k2w = _rhs(u + 0.5 * h * k1u, w + 0.5 * h * k1w, f1, p, q, alpha, beta, tol)
        k3u, k3w = _rhs(u + 0.5 * h * k2u, w + 0.5 * h * k2w, f1, p, q, alpha, beta, tol)
        k4u, k4w = _rhs(u + h * k3u, w + h * k3w, f2, p, q, alpha, beta, tol)
        u += h * (k1u + 2 * k2u + 2 * k3u + k4u) / 6.0
        w += h * (k1w + 2 * k2w + 2 * k3w + k4w) / 6.0
        if not abs(u) <= BLOWUP or not abs(w) < 1e300:
            return math.copysign(np.inf, u) if u == u else np.inf
        if i < n1 - 1:
            out[i] = u
    return u


@numba.njit(cache=True)
def _discrete_march(f_int, h, slope0, p, q, alpha, beta, tol, out):
    """March the discrete equations: cell flux, then node, then next flux."""
    n = f_int.shape[0]
    u, w = 0.0, slope0
    for i in range(n):
        u += h * _flux_inverse(w, p, q, tol)
        if not abs(u) <= BLOWUP:
            return math.copysign(np.inf, u) if u == u else np.inf
        out[i] = u
        au = abs(u)
        w -= h * (alpha * math.copysign(au ** (p - 1), u)
                  + beta * math.copysign(au ** (q - 1), u) + f_int[i])
    return u + h * _flux_inverse(w, p, q, tol)


def _f_full(f: GridFunction) -> np.ndarray:
    # the source is not a Dirichlet function: extend it to the ends by its edge values
    v = f.values
    return np.concatenate(([v[0]], v, [v[-1]]))


def shoot(params: Params, f: GridFunction, slope0: float) -> tuple[float, GridFunction | None]:
    """Fixed-step RK4 shot from u(0) = 0, w(0) = slope0.

    Returns u(1) and the nodal trajectory; a shot that leaves |u| ≤ 1e8
    returns a signed infinite endpoint and no trajectory.
    """
    grid = f.grid
    out = np.zeros(grid.n)
    end = _rk4_shot(_f_full(f), grid.h, float(slope0), params.p, params.q,
                    params.alpha, params.beta, FLUX_TOL, out)
    if not np.isfinite(end):
        return float(end), None
    return float(end), GridFunction(grid, out)


def march(params: Params, f: GridFunction, slope0: float) -> tuple[float, GridFunction | None]:
    """Discrete counterpart of :func:`shoot`: a zero endpoint is an exact discrete solution."""
    grid = f.grid
    out = np.zeros(grid.n)
    end = _discrete_march(np.ascontiguousarray(f.values), grid.h, float(slope0), params.p,
                          params.q, params.alpha, params.beta, FLUX_TOL, out)
    if not np.isfinite(end):
        return float(end), None
    return float(end), GridFunction(grid, out)


# --- solution records ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SolutionRecord:
    u: GridFunction
    slope0: float
    residual: float
    sign: SignClass
    energy: EnergyReport
    method: str = "shooting"

    def to_dict(self) -> dict:
        return {
            "slope0": self.slope0,
            "residual": self.residual,
            "sign": self.sign.value,
            "energy": self.energy.to_dict(),
            "method": self.method,
            "sup": self.u.sup(),
        }


def residual(u: GridFunction, params: Params, f: GridFunction) -> float:
    """Sup of the nodal residual density, relative to the size of its terms."""
    p, q = params.p, params.q
    g = energy_gradient(u, params, f).values
    scale = 1.0 + max(
        float(np.max(np.abs(pq_operator(u, p, q)))),
        abs(params.alpha) * u.sup() ** (p - 1),
        abs(params.beta) * u.sup() ** (q - 1),
        f.sup(),
    )
    return float(np.max(np.abs(g))) / scale


def _record(u, slope0, params, f, method) -> SolutionRecord:
    return SolutionRecord(u=u, slope0=float(slope0), residual=residual(u, params, f),
                          sign=classify_sign(u), energy=energy(u, params, f), method=method)


def _jacobian_bands(u: GridFunction, params: Params, floor: float, with_lower: bool):
    """Tridiagonal Jacobian of the residual density as (diag, offdiag).

    Ψ' and |u|^{q-2} are singular at 0 when q < 2; their arguments are
    floored at ``floor`` so the matrix stays finite.
    """
    p, q, h = params.p, params.q, u.grid.h
    du = np.maximum(np.abs(gradient(u)), floor)
    a = (p - 1) * du ** (p - 2) + (q - 1) * du ** (q - 2)
    diag = (a[:-1] + a[1:]) / h ** 2
    off = -a[1:-1] / h ** 2
    if with_lower:
        au = np.maximum(np.abs(u.values), floor)
        diag = diag - params.alpha * (p - 1) * au ** (p - 2) - params.beta * (q - 1) * au ** (q - 2)
    return diag, off


def _newton_polish(u: GridFunction, params: Params, f: GridFunction, steps: int = 4) -> GridFunction:
    """A few Newton steps on the discrete equations, kept only while they help."""
    best, best_res = u, residual(u, params, f)
    for _ in range(steps):
        if best_res < 1e-14:
            break
        diag, off = _jacobian_bands(best, params, 1e-12, with_lower=True)
        ab = np.zeros((3, best.grid.n))
        ab[0, 1:], ab[1], ab[2, :-1] = off, diag, off
        g = energy_gradient(best, params, f).values
        try:
            d = solve_banded((1, 1), ab, -g)
        except (LinAlgError, ValueError):
            break
        if not np.all(np.isfinite(d)):
            break
        cand = best + d
        res = residual(cand, params, f)
        if not res < best_res:
            break
        best, best_res = cand, res
    return best


def _discrete_root(params, f, s_a, s_b, s_guess):
    """Root of the discrete endpoint map near an RK4 bracket."""
    def end(s):
        return march(params, f, s)[0]

    e_a, e_b = end(s_a), end(s_b)
    if e_a == 0.0:
        return s_a
    if e_b == 0.0:
        return s_b
    if np.sign(e_a) != np.sign(e_b) and np.isfinite(e_a) and np.isfinite(e_b):
        return brentq(end, s_a, s_b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    width = max(abs(s_b - s_a), 1e-8 * (1 + abs(s_guess)))
    for _ in range(40):
        lo, hi = s_guess - width, s_guess + width
        e_lo, e_hi = end(lo), end(hi)
        if np.isfinite(e_lo) and np.isfinite(e_hi) and np.sign(e_lo) != np.sign(e_hi):
            return brentq(end, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        width *= 2.0
    return None


def _bisect(fun, a, fa, b, fb, xtol):
    """Plain bisection; endpoints may be signed infinities."""
    for _ in range(200):
        if abs(b - a) <= xtol * (1 + abs(a)):
            break
        m = 0.5 * (a + b)
        fm = fun(m)
        if fm == 0.0:
            return m
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b, fb = m, fm
    return 0.5 * (a + b)


def find_solutions(params: Params, f: GridFunction, slope_range=(-60.0, 60.0),
                   scan_count: int = 241, tol: float = 1e-9) -> list[SolutionRecord]:
    """All solutions reachable from sign changes of the RK4 endpoint map.

    Each bracket is bisected on the RK4 map, then re-solved on the discrete
    map and polished by Newton. Records with residual above ``tol`` are
    dropped; duplicates (sup distance < 1e-5 (1 + ‖u‖_∞)) are merged and the
    result is sorted by slope0.
    """
    lo, hi = map(float, slope_range)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ValueError("slope_range must be a finite interval")
    if scan_count < 2:
        raise ValueError("scan_count must be at least 2")

    def end(s):
        return shoot(params, f, s)[0]

    slopes = np.linspace(lo, hi, scan_count)
    ends = np.array([end(s) for s in slopes])
    guesses = []
    for i, s in enumerate(slopes):
        if ends[i] == 0.0:
            guesses.append((s, s, s))
    for i in range(scan_count - 1):
        ea, eb = ends[i], ends[i + 1]
        if ea == 0.0 or eb == 0.0 or np.isnan(ea) or np.isnan(eb):
            continue
        if np.sign(ea) != np.sign(eb):
            s_rk = _bisect(end, slopes[i], ea, slopes[i + 1], eb, 1e-13)
            guesses.append((slopes[i], slopes[i + 1], s_rk))

    records: list[SolutionRecord] = []
    for s_a, s_b, s_rk in guesses:
        s0 = _discrete_root(params, f, s_a, s_b, s_rk)
        if s0 is None:
            continue
        e, traj = march(params, f, s0)
        if traj is None:
            continue
        u = _newton_polish(traj, params, f)
        rec = _record(u, s0, params, f, "shooting")
        if rec.residual > tol:
            continue
        if any(np.max(np.abs(rec.u.values - r.u.values)) < 1e-5 * (1 + r.u.sup()) for r in records):
            continue
        records.append(rec)
    records.sort(key=lambda r: r.slope0)
    return records


# --- energy minimization ----------------------------------------------------------------

@dataclass(frozen=True)
class MinimizeBudget:
    max_iter: int = 500
    gtol: float = 1e-10


def orthogonalize_source(f: GridFunction, phi_p: GridFunction) -> GridFunction:
    """f minus its L² projection on φ_p, so that ⟨f, φ_p⟩ = 0 in quadrature."""
    return f - (pairing(f, phi_p) / lp_power(phi_p, 2)) * phi_p


def minimize_energy(params: Params, f: GridFunction, start: GridFunction,
                    budget: MinimizeBudget = MinimizeBudget(),
                    orthogonalize: bool | None = None) -> SolutionRecord:
    """Descent on the discrete energy with a banded Newton preconditioner.

    The search direction solves with the full tridiagonal Hessian when it is
    positive definite and with its gradient part (always positive definite)
    otherwise; steps are Armijo-backtracked. When α is the first eigenvalue
    and p > 2q the source is first projected orthogonally to φ_p, unless
    ``orthogonalize`` says otherwise.
    """
    grid = f.grid
    p, q = params.p, params.q
    if orthogonalize is None:
        orthogonalize = p > 2 * q and abs(params.alpha - first_eigenpair(p, grid).lam) <= 1e-9 * params.alpha
    if orthogonalize:
        f = orthogonalize_source(f, first_eigenpair(p, grid).phi)
    h = grid.h
    u = start
    E = energy(u, params, f).E
    for _ in range(budget.max_iter):
        g = energy_gradient(u, params, f).values
        if residual(u, params, f) <= budget.gtol:
            return _record(u, float(gradient(u)[0]), params, f, "minimization")
        floor = 1e-8 * (1.0 + float(np.max(np.abs(gradient(u)))))
        d = None
        for full in (True, False):
            diag, off = _jacobian_bands(u, params, floor, with_lower=full)
            ab = np.zeros((2, grid.n))
            ab[0, 1:], ab[1] = off, diag
            try:
                d = solveh_banded(ab, -g)
            except (LinAlgError, ValueError):
                continue
            if np.all(np.isfinite(d)) and np.dot(g, d) < 0:
                break
            d = None
        if d is None:
            d = -g
        res = residual(u, params, f)
        if res < 1e-6:
            # near convergence E changes sit at round-off; judge by the residual
            cand = u + d
            if residual(cand, params, f) < res:
                u, E = cand, energy(cand, params, f).E
                continue
        slope = h * float(np.dot(g, d))
        tau = 1.0
        while True:
            cand = u + tau * d
            E_new = energy(cand, params, f).E
            if E_new <= E + 1e-4 * tau * slope or tau < 1e-14:
                break
            tau *= 0.5
        if E_new > E:
            break
        if E_new == E and tau < 1e-14:
            break
        u, E = cand, E_new
    if residual(u, params, f) <= budget.gtol:
        return _record(u, float(gradient(u)[0]), params, f, "minimization")
    raise ConvergenceError(f"energy descent stopped at residual {residual(u, params, f):.3e}")


# --- scalar fibering analysis --------------------------------------------------------------

def q_eval(t: float, H: float, G: float, F: float, p: float, q: float) -> float:
    """Q(t) = t^p H + t^q G + t F."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return t ** p * H + t ** q * G + t * F


def q_prime(t: float, H: float, G: float, F: float, p: float, q: float) -> float:
    if t < 0:
        raise ValueError("t must be nonnegative")
    return p * t ** (p - 1) * H + q * t ** (q - 1) * G + F


@dataclass(frozen=True)
class TangencyParams:
    t_star: float
    G_tilde: float
    beta_tilde: float = math.nan


def tangency(H: float, F: float, p: float, q: float,
             grad_q: float | None = None, norm_q: float | None = None) -> TangencyParams:
    """(t*, G̃) making t* a double root of Q; β̃ too when ‖∇u‖_q^q and ‖u‖_q^q are given."""
    if not p > q > 1:
        raise ValueError(f"need p > q > 1, got p={p}, q={q}")
    if not (H > 0 and F > 0):
        raise DomainError("tangency needs H > 0 and F > 0")
    t = ((q - 1) / (p - q)) ** (1 / (p - 1)) * (F / H) ** (1 / (p - 1))
    G = -phi_coefficient(p, q) * H ** ((q - 1) / (p - 1)) * F ** ((p - q) / (p - 1))
    beta = math.nan
    if grad_q is not None and norm_q is not None:
        if not norm_q > 0:
            raise DomainError("‖u‖_q^q must be positive")
        beta = (grad_q - G) / norm_q
    return TangencyParams(t_star=t, G_tilde=G, beta_tilde=beta)


def tangency_for(u: GridFunction, params: Params, f: GridFunction) -> TangencyParams:
    """Tangency data for a certificate u (β̃ coincides with Φ_α^+(u))."""
    return tangency(H_alpha(u, params.p, params.alpha), pairing(f, u), params.p, params.q,
                    grad_power(u, params.q), lp_power(u, params.q))


def tangency_residuals(H: float, F: float, p: float, q: float) -> tuple[float, float]:
    """Relative |Q(t*)| and |Q'(t*)| for the closed-form tangency."""
    tp = tangency(H, F, p, q)
    t, G = tp.t_star, tp.G_tilde
    terms = (t ** p * H, t ** q * abs(G), t * F)
    dterms = (p * t ** (p - 1) * H, q * t ** (q - 1) * abs(G), F)
    return (abs(q_eval(t, H, G, F, p, q)) / max(terms),
            abs(q_prime(t, H, G, F, p, q)) / max(dterms))


# --- Picone inequalities ------------------------------------------------------------------

def _picone_ratio(u: GridFunction, v: GridFunction, k: float, m: float) -> GridFunction:
    """v^k / u^m at interior nodes for positive u and nonnegative v."""
    if np.min(u.values) <= 0:
        raise DomainError("Picone inequalities need u > 0 at interior nodes")
    if np.min(v.values) < 0:
        raise DomainError("Picone inequalities need v ≥ 0")
    return GridFunction(u.grid, v.values ** k / u.values ** m)


def picone_classical_gap(u: GridFunction, v: GridFunction, p: float) -> float:
    """∫|∇v|^p - ∫|∇u|^{p-2}∇u·∇(v^p/u^{p-1}), cell quadrature."""
    h = u.grid.h
    w = gradient(_picone_ratio(u, v, p, p - 1))
    return float(h * np.sum(np.abs(gradient(v)) ** p) - h * np.sum(spow(gradient(u), p - 1) * w))


def picone_generalized_gap(u: GridFunction, v: GridFunction, p: float, q: float) -> float:
    """∫|∇v|^{q-2}∇v·∇(v^{p-q+1}/u^{p-q}) - ∫|∇u|^{q-2}∇u·∇(v^p/u^{p-1})."""
    h = u.grid.h
    rhs = h * np.sum(spow(gradient(v), q - 1) * gradient(_picone_ratio(u, v, p - q + 1, p - q)))
    lhs = h * np.sum(spow(gradient(u), q - 1) * gradient(_picone_ratio(u, v, p, p - 1)))
    return float(rhs - lhs)


# --- sign theorems ------------------------------------------------------------------------------

@dataclass(frozen=True)
class TheoremCheck:
    alpha: float
    beta: float
    theorem: str
    solutions: int
    checked: int
    violations: int

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "theorem": self.theorem,
                "solutions": self.solutions, "checked": self.checked,
                "violations": self.violations, "passed": self.passed}


_POS = {SignClass.POSITIVE}
_NONNEG = {SignClass.POSITIVE, SignClass.NONNEGATIVE}


def _applicable(alpha, beta, ctx: CurvesContext, delta: float) -> list[str]:
    lam, names = ctx.lambda1_p, []
    if alpha <= lam and beta < ctx.beta_f_at(alpha):
        names.append("all_positive")
    if lam < alpha < lam + delta and beta < ctx.beta_f_at(lam):
        names.append("definite_sign_near_lambda1")
    if alpha >= lam and beta > ctx.ps_upper(alpha):
        names.append("no_nonneg_above_ps")
    if alpha > ctx.alpha_star and beta >= ctx.lambda1_q - ctx.epsilon:
        names.append("no_nonneg_above_alpha_star")
    if alpha > lam and beta < ctx.beta_f_at(alpha):
        names.append("negative_part_H_negative")
    if alpha > lam and beta > ctx.beta_sup_f_at(alpha):
        names.append("positive_part_H_positive")
    return names


def _holds(name: str, rec: SolutionRecord, params: Params) -> bool | None:
    """Predicate of one theorem on one solution; None if its premise is void."""
    if name == "all_positive":
        return rec.sign in _POS
    if name == "definite_sign_near_lambda1":
        return rec.sign in (SignClass.POSITIVE, SignClass.NEGATIVE)
    if name in ("no_nonneg_above_ps", "no_nonneg_above_alpha_star"):
        return rec.sign not in _NONNEG
    plus, minus = split_signs(rec.u)
    tol = 1e-8 * rec.u.sup()
    part = minus if name == "negative_part_H_negative" else plus
    if part.sup() <= tol:
        return None
    H = H_alpha(part, params.p, params.alpha)
    slack = H_TOL * grad_power(part, params.p)
    return H < slack if name == "negative_part_H_negative" else H > -slack


def verify_sign_theorems(params_grid, f: GridFunction, ctx: CurvesContext, *,
                         delta: float = 0.5, slope_range=(-60.0, 60.0),
                         scan_count: int = 241) -> list[TheoremCheck]:
    """Solve at every (α, β) and test each applicable theorem on every solution.

    ``delta`` is the width of the window above λ_1(p) in which the
    positive-or-negative dichotomy is checked. β_f and β^f enter through the
    sampled bounds held in ``ctx``.
    """
    if np.min(f.values) < 0 or not np.any(f.values > 0):
        raise DomainError("f must be nonnegative and nonzero")
    rows = []
    for alpha, beta in params_grid:
        names = _applicable(alpha, beta, ctx, delta)
        if not names:
            continue
        params = Params(ctx.p, ctx.q, alpha, beta)
        sols = find_solutions(params, f, slope_range, scan_count)
        for name in names:
            verdicts = [_holds(name, r, params) for r in sols]
            checked = [v for v in verdicts if v is not None]
            rows.append(TheoremCheck(float(alpha), float(beta), name, len(sols),
                                     len(checked), sum(1 for v in checked if not v)))
    return rows


def probe_epsilon(alpha: float, ctx: CurvesContext, f: GridFunction, *,
                  width: float = 2.0, steps: int = 12, slope_range=(-60.0, 60.0),
                  scan_count: int = 241) -> float:
    """Empirical ε(α): distance below λ_1(q) to the nearest β with a nonnegative solution.

    Bisects on β in [λ_1(q) - width, λ_1(q)] for the edge of the set of β
    where shooting finds a nonnegative solution; returns ``width`` when none
    is found in the window.
    """
    if not alpha > ctx.alpha_star:
        raise DomainError("ε(α) is only meaningful for α > α_*")

    def has_nonneg(beta):
        sols = find_solutions(Params(ctx.p, ctx.q, alpha, beta), f, slope_range, scan_count)
        return any(r.sign in _NONNEG for r in sols)

    top = ctx.lambda1_q
    lo = top - width
    if not has_nonneg(lo):
        return width
    hi = top
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if has_nonneg(mid):
            lo = mid
        else:
            hi = mid
    return top - hi
