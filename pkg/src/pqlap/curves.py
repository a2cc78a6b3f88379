"""Critical constants and curves of the (α, β)-plane.

The optimizers below work on the finite-dimensional admissible sets, so every
reported value is a one-sided bound backed by a certificate: β_f is an
infimum, so any admissible u gives an upper bound; β^f is a supremum, so any
admissible u gives a lower bound.
"""
from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .eigen import analytic_eigenfunction, first_eigenpair, mode_eigenpair
from .functionals import (
    DomainError,
    H_TOL,
    H_alpha,
    Params,
    hat_extended_values,
    phi_coefficient,
    phi_minus,
    phi_plus,
    r_laplacian,
    rayleigh,
    spow,
)
from .grid import Grid1D, GridFunction, grad_power, gradient, norm


class BoundKind(enum.Enum):
    UPPER = "UpperBound"
    LOWER = "LowerBound"
    EXACT = "Exact"


class RegionLabel(enum.Enum):
    ALL_POSITIVE = "AllPositive"
    NO_NONNEGATIVE = "NoNonnegative"
    EXISTENCE_UNKNOWN = "ExistenceUnknown"
    EXISTS_UNCLASSIFIED = "ExistsUnclassified"


@dataclass(frozen=True, eq=False)
class CurvePoint:
    alpha: float
    value: float
    certificate: GridFunction
    bound_kind: BoundKind


@dataclass(frozen=True)
class OptimBudget:
    """Knobs of the multi-start penalty optimizer behind β_f and β^f.

    Each start runs ``stages`` L-BFGS-B solves, multiplying the penalty
    weight by 10 and shrinking the smoothing of the fractional power by 10
    per stage, then a feasibility repair.
    """

    starts: int = 16
    stages: int = 5
    mu0: float = 1.0
    eta0: float = 1e-2
    maxiter: int = 3000
    seed: int = 0

    def __post_init__(self):
        if self.starts < 1 or self.stages < 1 or self.maxiter < 1:
            raise ValueError("starts, stages and maxiter must be positive")


# --- constants -----------------------------------------------------------------

def alpha_star(p: float, q: float, grid: Grid1D) -> float:
    """‖∇φ_q‖_p^p / ‖φ_q‖_p^p."""
    Params(p, q)
    return rayleigh(first_eigenpair(q, grid).phi, p)


def beta_star(p: float, q: float, grid: Grid1D) -> float:
    """‖∇φ_p‖_q^q / ‖φ_p‖_q^q."""
    Params(p, q)
    return rayleigh(first_eigenpair(p, grid).phi, q)


def beta_under_over(k: int, p: float, q: float, grid: Grid1D) -> tuple[float, float]:
    """q-Rayleigh quotient over the (one-dimensional) k-th eigenspace of -Δ_p.

    The discrete mode is used when its zeros fall on nodes, otherwise the
    sampled generalized sine.
    """
    if k < 1:
        raise ValueError("mode index starts at 1")
    Params(p, q)
    if (grid.n + 1) % k == 0:
        phi = mode_eigenpair(p, k, grid).phi
    else:
        phi = analytic_eigenfunction(p, k, grid).phi
    value = rayleigh(phi, q)
    return value, value


# --- multi-start optimizer for Φ^± -------------------------------------------------

def _check_source(f: GridFunction) -> None:
    if np.min(f.values) < 0 or not np.any(f.values > 0):
        raise DomainError("f must be nonnegative and nonzero")


def _default_starts(grid: Grid1D, p: float, q: float, count: int, seed: int) -> list[np.ndarray]:
    x = grid.x
    starts = [first_eigenpair(q, grid).phi.values, first_eigenpair(p, grid).phi.values,
              np.sin(np.pi * x) ** 4]
    for c in (0.25, 0.75, 0.5):
        starts.append(np.exp(-((x - c) / 0.12) ** 2) * x * (1 - x))
    rng = np.random.default_rng(seed)
    modes = np.sin(np.outer(np.arange(1, 5), np.pi * x))
    while len(starts) < count:
        coef = rng.normal(size=4) / np.arange(1, 5)
        starts.append(x * (1 - x) * np.exp(coef @ modes))
    return starts[:count]


class _Surrogate:
    """Smoothed, 0-homogeneous version of ±Φ^± with an exterior penalty.

    With s = ‖u‖_q^q, Hn = H/s^{p/q} and Fn = F/s^{1/q} one has
    ``H^a F^b / s = Hn^a Fn^b``, so the objective is
    ``σ R_q + c ((σHn)^+ + η)^a Fn^b + μ ((σHn)^-)^2 + (s - 1)^2``
    where σ = +1 for Φ^+ (minimized) and σ = -1 for Φ^- (minimized as -Φ^-);
    the last term only pins the scale.
    """

    def __init__(self, grid: Grid1D, params: Params, f: GridFunction, sign: int):
        self.h = grid.h
        self.p, self.q, self.alpha = params.p, params.q, params.alpha
        self.f = f.values
        self.sign = sign
        self.c = phi_coefficient(self.p, self.q)
        self.a = (self.q - 1) / (self.p - 1)
        self.b = (self.p - self.q) / (self.p - 1)

    def _lap(self, v, r):
        du = np.diff(np.concatenate(([0.0], v, [0.0]))) / self.h
        w = spow(du, r - 1)
        return -(w[1:] - w[:-1]) / self.h, du

    def __call__(self, v, mu, eta):
        p, q, h, sg = self.p, self.q, self.h, self.sign
        Lp, du = self._lap(v, p)
        Lq, _ = self._lap(v, q)
        s = h * np.sum(v ** q)
        if not s > 1e-300:
            return 1e30, np.zeros_like(v)
        Gq = h * np.sum(np.abs(du) ** q)
        H = h * np.sum(np.abs(du) ** p) - self.alpha * h * np.sum(v ** p)
        F = max(h * np.dot(self.f, v), 1e-300)
        ds = q * h * v ** (q - 1)
        dH = p * h * Lp - self.alpha * p * h * v ** (p - 1)
        sp = s ** (p / q)
        Hn = sg * H / sp
        dHn = sg * (dH / sp - H * (p / q) * ds / (sp * s))
        s1 = s ** (1 / q)
        Fn = F / s1
        dFn = h * self.f / s1 - F * ds / (q * s1 * s)

        val = sg * Gq / s
        grad = sg * (q * h * Lq / s - Gq * ds / s ** 2)
        Hp = max(Hn, 0.0)
        T = (Hp + eta) ** self.a - eta ** self.a
        val += self.c * T * Fn ** self.b
        grad = grad + self.c * T * self.b * Fn ** (self.b - 1) * dFn
        if Hn > 0:
            grad = grad + self.c * self.a * (Hp + eta) ** (self.a - 1) * Fn ** self.b * dHn
        else:
            val += mu * Hn ** 2
            grad = grad + 2 * mu * Hn * dHn
        val += (s - 1.0) ** 2
        grad = grad + 2 * (s - 1.0) * ds
        return val, grad


def _spike_repair(v: np.ndarray, grid: Grid1D, params: Params, f: GridFunction,
                  candidates: int = 15) -> np.ndarray | None:
    """Restore H_α ≥ 0 by raising one node; keep the cheapest node."""
    u = GridFunction(grid, v)
    if H_alpha(u, params.p, params.alpha) >= 0:
        return v
    best = None
    for i in np.unique(np.linspace(0, grid.n - 1, candidates).astype(int)):
        def H_of(t, i=i):
            w = v.copy()
            w[i] += t
            return H_alpha(GridFunction(grid, w), params.p, params.alpha)

        hi = 1e-3 * float(np.max(v)) + 1e-12
        while H_of(hi) < 0:
            hi *= 2.0
            if hi > 1e12:
                break
        else:
            t = brentq(H_of, 0.0, hi, xtol=1e-15)
            w = v.copy()
            w[i] += t * (1 + 1e-12)
            try:
                val = phi_plus(GridFunction(grid, w), params, f)
            except DomainError:
                continue
            if best is None or val < best[0]:
                best = (val, w)
    return None if best is None else best[1]


def _blend_repair(v: np.ndarray, grid: Grid1D, params: Params, phi_p: np.ndarray) -> np.ndarray | None:
    """Restore H_α ≤ 0 by blending toward φ_p (which lies in B^-(α) for α ≥ λ_1)."""
    def H_of(t):
        u = GridFunction(grid, (1 - t) * v + t * phi_p)
        # same slack as membership in B^-(α), halved to stay strictly inside
        return H_alpha(u, params.p, params.alpha) - 0.5 * H_TOL * grad_power(u, params.p)

    if H_of(0.0) <= 0:
        return v
    if H_of(1.0) > 0:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if H_of(mid) > 0:
            lo = mid
        else:
            hi = mid
    return (1 - hi) * v + hi * phi_p


def _optimize(sign: int, params: Params, f: GridFunction, grid: Grid1D,
              budget: OptimBudget, extra_starts=()) -> tuple[float, np.ndarray]:
    p, q = params.p, params.q
    surrogate = _Surrogate(grid, params, f, sign)
    exact = phi_plus if sign > 0 else phi_minus
    phi_p = first_eigenpair(p, grid).phi
    phi_p_vals = phi_p.values / norm(phi_p, q)
    starts = [np.abs(np.asarray(s, dtype=float)) for s in extra_starts]
    starts += _default_starts(grid, p, q, budget.starts, budget.seed)
    bounds = [(0.0, None)] * grid.n
    best_val, best_v = np.inf, None
    for v0 in starts:
        v = v0 / norm(GridFunction(grid, v0), q)
        for stage in range(budget.stages):
            mu = budget.mu0 * 10.0 ** stage
            eta = budget.eta0 / 10.0 ** stage
            res = minimize(surrogate, v, args=(mu, eta), jac=True, method="L-BFGS-B",
                           bounds=bounds,
                           options=dict(maxiter=budget.maxiter, ftol=1e-15, gtol=1e-10))
            if np.all(np.isfinite(res.x)) and np.any(res.x > 0):
                v = res.x
        if sign > 0:
            v = _spike_repair(v, grid, params, f)
        else:
            v = _blend_repair(v, grid, params, phi_p_vals)
        if v is None:
            continue
        u = GridFunction(grid, v)
        try:
            val = sign * exact(u, params, f)
        except DomainError:
            continue
        if val < best_val:
            best_val, best_v = val, v / norm(u, q)
    if best_v is None:
        raise DomainError("no admissible candidate survived the repair step")
    return sign * best_val, best_v


def beta_f(alpha: float, p: float, q: float, f: GridFunction, grid: Grid1D,
           budget: OptimBudget = OptimBudget(), extra_starts=()) -> CurvePoint:
    """Certified upper bound for β_f(α) = inf{Φ_α^+(u) : u ∈ B^+(α)}."""
    _check_source(f)
    params = Params(p, q, alpha)
    value, v = _optimize(+1, params, f, grid, budget, extra_starts)
    return CurvePoint(alpha, value, GridFunction(grid, v), BoundKind.UPPER)


def beta_sup_f(alpha: float, p: float, q: float, f: GridFunction, grid: Grid1D,
               budget: OptimBudget = OptimBudget(), extra_starts=()) -> CurvePoint:
    """Certified lower bound for β^f(α) = sup{Φ_α^-(u) : u ∈ B^-(α)}."""
    _check_source(f)
    pair = first_eigenpair(p, grid)
    if alpha < pair.lam * (1 - 1e-10):
        raise DomainError(f"B^-(α) is empty for α = {alpha} < λ_1(p) = {pair.lam}")
    params = Params(p, q, alpha)
    value, v = _optimize(-1, params, f, grid, budget, (pair.phi.values,) + tuple(extra_starts))
    return CurvePoint(alpha, value, GridFunction(grid, v), BoundKind.LOWER)


def _chain(fn, alphas, p, q, f, grid, budget):
    out = {}
    prev = ()
    for a in sorted(set(float(a) for a in alphas)):
        pt = fn(a, p, q, f, grid, budget, extra_starts=prev)
        out[a] = pt
        prev = (pt.certificate.values,)
    return [out[float(a)] for a in alphas]


def beta_f_curve(alphas, p, q, f, grid, budget: OptimBudget = OptimBudget()) -> list[CurvePoint]:
    """β_f at several α, warm-starting each sample from its left neighbour."""
    return _chain(beta_f, alphas, p, q, f, grid, budget)


def beta_sup_f_curve(alphas, p, q, f, grid, budget: OptimBudget = OptimBudget()) -> list[CurvePoint]:
    return _chain(beta_sup_f, alphas, p, q, f, grid, budget)


def dilated_bump(u: GridFunction, m: int) -> GridFunction:
    """u_m(x) = u(m x), supported in [0, 1/m]; needs m | n + 1."""
    grid = u.grid
    if m < 1 or (grid.n + 1) % m:
        raise ValueError(f"dilation {m} must divide n + 1 = {grid.n + 1}")
    full = u.full[::m]
    vals = np.zeros(grid.n)
    vals[:len(full) - 2] = full[1:-1]
    return GridFunction(grid, vals)


def dilation_growth(u: GridFunction, params: Params, f: GridFunction,
                    m: int) -> tuple[float, float, float]:
    """Dilated certificate for the growth of β^f: returns (α_m, Φ^-_{α_m}(u_m), m^q R_q(ũ)).

    ũ is u subsampled on the coarse grid of spacing m h, u_m(x) = ũ(m x) on the
    original grid. Since ‖∇u_m‖_p^p = m^{p-1}‖∇ũ‖_p^p and ‖u_m‖_p^p = ‖ũ‖_p^p / m,
    taking α_m = m^p max(α, R_p(ũ)) keeps u_m in B^-(α_m).
    """
    um = dilated_bump(u, m)
    coarse = GridFunction(Grid1D((u.grid.n + 1) // m - 1), u.full[::m][1:-1])
    alpha_m = m ** params.p * max(params.alpha, rayleigh(coarse, params.p))
    value = phi_minus(um, params.with_(alpha=alpha_m), f)
    return alpha_m, value, m ** params.q * rayleigh(coarse, params.q)


# --- β_ps ---------------------------------------------------------------------------

def _bifurcation_corrector(p: float, q: float, grid: Grid1D) -> tuple[np.ndarray, np.ndarray]:
    """φ_p and the corrector w with tφ_p + t^{q+1-p} w ≈ a positive solution near (λ_1, β_*).

    w solves the linearization of -Δ_p - λ_1|.|^{p-2}. at φ_p with right-hand side
    β_* φ_p^{q-1} + Δ_q φ_p, orthogonally to φ_p (the kernel direction).
    """
    pair = first_eigenpair(p, grid)
    phi = pair.phi
    b_star = rayleigh(phi, q)
    h, n = grid.h, grid.n
    a = (p - 1) * np.abs(gradient(phi)) ** (p - 2)
    J = np.zeros((n + 1, n + 1))
    i = np.arange(n)
    J[i, i] = (a[:-1] + a[1:]) / h ** 2 - pair.lam * (p - 1) * phi.values ** (p - 2)
    J[i[:-1], i[:-1] + 1] = -a[1:-1] / h ** 2
    J[i[1:], i[1:] - 1] = -a[1:-1] / h ** 2
    J[:n, n] = phi.values
    J[n, :n] = phi.values
    rhs = np.concatenate((b_star * spow(phi.values, q - 1) - r_laplacian(phi, q), [0.0]))
    w = np.linalg.solve(J, rhs)[:n]
    return phi.values, w


def default_ps_candidates(p: float, q: float, grid: Grid1D) -> list[GridFunction]:
    phi_q = first_eigenpair(q, grid).phi.values
    cands = [GridFunction(grid, c * phi_q) for c in np.logspace(-8, 0, 9)]
    phi, w = _bifurcation_corrector(p, q, grid)
    cands.append(GridFunction(grid, phi))
    for t in np.logspace(0, 5, 11):
        u = t * phi + t ** (q + 1 - p) * w
        if np.min(u) > 0:
            cands.append(GridFunction(grid, u))
    return cands


def beta_ps_bounds(alpha: float, p: float, q: float, grid: Grid1D,
                   candidates=None) -> tuple[float, float]:
    """Bracket for β_ps(α) = sup_{u>0} inf_{φ≥0} L_α(u; φ).

    The lower end maximizes, over the candidate list, the exact inner infimum
    (the minimum over nodal hat functions). The upper end is λ_1(q) when
    α ≥ α_*, where the value is known; otherwise it is +inf, meaning "no
    bound computed".
    """
    Params(p, q)
    lam_p = first_eigenpair(p, grid).lam
    if alpha < lam_p * (1 - 1e-10):
        raise DomainError(f"β_ps bounds need α ≥ λ_1(p) = {lam_p}")
    if candidates is None:
        candidates = default_ps_candidates(p, q, grid)
    params = Params(p, q, alpha)
    lower = -np.inf
    for u in candidates:
        if np.min(u.values) <= 0:
            continue
        lower = max(lower, float(np.min(hat_extended_values(u, params))))
    a_star = alpha_star(p, q, grid)
    upper = first_eigenpair(q, grid).lam if alpha >= a_star else np.inf
    return lower, upper


# --- region classifier -----------------------------------------------------------------

@dataclass(frozen=True)
class CurvesContext:
    """Everything classify_region needs, computed once per (p, q, f, grid)."""

    p: float
    q: float
    lambda1_p: float
    lambda1_q: float
    alpha_star: float
    beta_star: float
    beta_f_samples: tuple[tuple[float, float], ...] = ()
    beta_sup_f_samples: tuple[tuple[float, float], ...] = ()
    spectrum: tuple[tuple[float, float, float], ...] = ()
    sigma_tol: float = 1e-6
    epsilon: float = 0.0
    extra: dict = field(default_factory=dict, compare=False)

    def beta_f_at(self, alpha: float) -> float:
        """Sampled β_f at the nearest sample ≥ α.

        β_f is nonincreasing, so the right neighbour's value never exceeds the
        true value by monotonicity; the left tail reuses the first sample.
        """
        return _right_lookup(self.beta_f_samples, alpha)

    def beta_sup_f_at(self, alpha: float) -> float:
        """Sampled β^f at the nearest sample ≤ α (β^f is nondecreasing)."""
        if not self.beta_sup_f_samples:
            return np.nan
        xs = [a for a, _ in self.beta_sup_f_samples]
        i = bisect.bisect_right(xs, alpha) - 1
        if i < 0:
            return np.nan
        return self.beta_sup_f_samples[i][1]

    def ps_upper(self, alpha: float) -> float:
        return self.lambda1_q if alpha >= self.alpha_star else np.inf

    def to_dict(self) -> dict:
        return {
            "p": self.p, "q": self.q,
            "lambda1_p": self.lambda1_p, "lambda1_q": self.lambda1_q,
            "alpha_star": self.alpha_star, "beta_star": self.beta_star,
            "beta_f_samples": [list(s) for s in self.beta_f_samples],
            "beta_sup_f_samples": [list(s) for s in self.beta_sup_f_samples],
            "spectrum": [list(s) for s in self.spectrum],
            "sigma_tol": self.sigma_tol, "epsilon": self.epsilon,
        }


def _right_lookup(samples, alpha):
    if not samples:
        return np.nan
    xs = [a for a, _ in samples]
    i = bisect.bisect_left(xs, alpha)
    if i == len(xs):
        i -= 1
    return samples[i][1]


def build_context(p: float, q: float, f: GridFunction, grid: Grid1D, alphas=(),
                  budget: OptimBudget = OptimBudget(), k_max: int = 3,
                  sigma_tol: float = 1e-6, epsilon: float = 0.0) -> CurvesContext:
    """Precompute constants, β_f on ``alphas`` ∪ {λ_1(p)} and β^f on the part ≥ λ_1(p)."""
    lam_p = first_eigenpair(p, grid).lam
    lam_q = first_eigenpair(q, grid).lam
    a_star, b_star = alpha_star(p, q, grid), beta_star(p, q, grid)
    grid_alphas = sorted(set(float(a) for a in alphas) | {lam_p})
    if np.any(f.values):
        bf = [(pt.alpha, pt.value) for pt in beta_f_curve(grid_alphas, p, q, f, grid, budget)]
        upper_alphas = [a for a in grid_alphas if a >= lam_p]
        bsf = [(pt.alpha, pt.value) for pt in beta_sup_f_curve(upper_alphas, p, q, f, grid, budget)]
    else:
        # no source: Φ^+ is the q-Rayleigh quotient, so β_f ≡ λ_1(q); β^f is left unsampled
        bf, bsf = [(a, lam_q) for a in grid_alphas], []
    spectrum = []
    for k in range(1, k_max + 1):
        lam_k = lam_p if k == 1 else _discrete_lambda_k(p, k, grid)
        under, over = beta_under_over(k, p, q, grid)
        spectrum.append((lam_k, under, over))
    return CurvesContext(
        p=p, q=q, lambda1_p=lam_p, lambda1_q=lam_q, alpha_star=a_star, beta_star=b_star,
        beta_f_samples=tuple(bf),
        beta_sup_f_samples=tuple(bsf),
        spectrum=tuple(spectrum), sigma_tol=sigma_tol, epsilon=epsilon,
    )


def _discrete_lambda_k(p: float, k: int, grid: Grid1D) -> float:
    if (grid.n + 1) % k == 0:
        return mode_eigenpair(p, k, grid).lam
    return rayleigh(analytic_eigenfunction(p, k, grid).phi, p)


def classify_region(alpha: float, beta: float, ctx: CurvesContext) -> RegionLabel:
    """Label of (α, β) in the sign/existence diagram.

    Checked in order: the positivity region (α ≤ λ_1(p), β < β_f(α)); the
    nonexistence-of-nonnegative region (β above the known β_ps upper bound,
    or α > α_*, β ≥ λ_1(q) - ε); eigenvalue windows where β lies between
    the under/over critical values; everything else has a solution of
    undetermined sign.
    """
    if alpha <= ctx.lambda1_p and beta < ctx.beta_f_at(alpha):
        return RegionLabel.ALL_POSITIVE
    if alpha >= ctx.lambda1_p and beta > ctx.ps_upper(alpha):
        return RegionLabel.NO_NONNEGATIVE
    if alpha > ctx.alpha_star and beta >= ctx.lambda1_q - ctx.epsilon:
        return RegionLabel.NO_NONNEGATIVE
    for lam_k, under, over in ctx.spectrum:
        if abs(alpha - lam_k) <= ctx.sigma_tol * lam_k and under <= beta <= over:
            return RegionLabel.EXISTENCE_UNKNOWN
    return RegionLabel.EXISTS_UNCLASSIFIED
