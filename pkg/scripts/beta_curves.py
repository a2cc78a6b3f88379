"""Tabulate certified β_f upper bounds, β^f lower bounds and the β_ps bracket for f ≡ 1."""
import argparse
import math

import numpy as np

from pqlap.curves import (OptimBudget, alpha_star, beta_f_curve, beta_ps_bounds, beta_star,
                          beta_sup_f_curve)
from pqlap.eigen import first_eigenpair
from pqlap.grid import Grid1D


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=3.0)
    ap.add_argument("--q", type=float, default=2.0)
    ap.add_argument("--n", type=int, default=199)
    ap.add_argument("--alpha", type=float, nargs=3, default=[0.0, 40.0, 20], metavar=("LO", "HI", "COUNT"))
    ap.add_argument("--starts", type=int, default=8)
    args = ap.parse_args()

    grid = Grid1D(args.n)
    f = grid.constant(1.0)
    p, q = args.p, args.q
    lam_p, lam_q = first_eigenpair(p, grid).lam, first_eigenpair(q, grid).lam
    print(f"lambda1(p)={lam_p:.6f} lambda1(q)={lam_q:.6f} "
          f"alpha*={alpha_star(p, q, grid):.6f} beta*={beta_star(p, q, grid):.6f}")

    alphas = list(np.linspace(args.alpha[0], args.alpha[1], int(args.alpha[2])))
    budget = OptimBudget(starts=args.starts)
    bf = beta_f_curve(alphas, p, q, f, grid, budget)
    upper = [a for a in alphas if a >= lam_p]
    bsf = {pt.alpha: pt.value for pt in beta_sup_f_curve(upper, p, q, f, grid, budget)}
    print(f"{'alpha':>9} {'beta_f_ub':>11} {'beta^f_lb':>11} {'ps_lb':>9} {'ps_ub':>9}")
    for a, pt in zip(alphas, bf):
        lo, hi = beta_ps_bounds(a, p, q, grid) if a >= lam_p else (math.nan, math.nan)
        print(f"{a:9.4f} {pt.value:11.6f} {bsf.get(a, math.nan):11.6f} {lo:9.4f} {hi:9.4f}")


if __name__ == "__main__":
    main()
