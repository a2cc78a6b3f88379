"""Relative error of the discrete λ₁(r) against (r-1)π_r^r under grid refinement."""
import argparse

from pqlap.eigen import analytic_lambda_k, eigen_residual, first_eigenpair
from pqlap.grid import Grid1D


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r", type=float, nargs="+", default=[1.5, 2.0, 3.0, 4.0])
    ap.add_argument("--n", type=int, nargs="+", default=[49, 99, 199, 399, 799, 1599])
    args = ap.parse_args()
    print(f"{'r':>5} {'n':>6} {'lambda_1':>14} {'rel_error':>10} {'residual':>10} {'iters':>6}")
    for r in args.r:
        exact = analytic_lambda_k(r, 1)
        for n in args.n:
            pair = first_eigenpair(r, Grid1D(n))
            err = abs(pair.lam - exact) / exact
            print(f"{r:5.2f} {n:6d} {pair.lam:14.8f} {err:10.2e} {eigen_residual(pair):10.2e} {pair.iterations:6d}")


if __name__ == "__main__":
    main()
