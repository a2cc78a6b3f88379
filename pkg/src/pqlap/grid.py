"""Uniform 1D discretization of (0, 1) with homogeneous Dirichlet data.

Functions live on the ``n`` interior nodes ``x_i = i*h``; the boundary values
``u(0) = u(1) = 0`` are implicit. Gradients live on the ``n + 1`` cells.
Node quantities are integrated with the trapezoidal rule (which, with zero
end values, reduces to ``h * sum``), cell quantities with the midpoint rule.
"""
from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from typing import Callable

import numpy as np


class GridMismatchError(ValueError):
    """Two grid functions defined on different grids were combined."""


@dataclass(frozen=True)
class Grid1D:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs n >= 3 interior nodes, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def x(self) -> np.ndarray:
        """Interior node coordinates."""
        return np.arange(1, self.n + 1) * self.h

    @property
    def x_full(self) -> np.ndarray:
        """Node coordinates including both boundary points."""
        return np.arange(self.n + 2) * self.h

    @property
    def x_cells(self) -> np.ndarray:
        """Cell midpoints."""
        return (np.arange(self.n + 1) + 0.5) * self.h

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "GridFunction":
        return GridFunction(self, np.asarray(func(self.x), dtype=float) * np.ones(self.n))

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n))

    def constant(self, c: float) -> "GridFunction":
        return GridFunction(self, np.full(self.n, float(c)))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values at interior nodes; zero boundary values are implied."""

    grid: Grid1D
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.shape[0] != self.grid.n:
            raise ValueError(f"expected {self.grid.n} values, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def full(self) -> np.ndarray:
        """Node values with the two boundary zeros attached."""
        return np.concatenate(([0.0], self.values, [0.0]))

    def _other(self, other):
        if isinstance(other, GridFunction):
            check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return GridFunction(self.grid, self.values / c)

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values))

    def __len__(self):
        return self.grid.n

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    # serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"n": self.grid.n, "values": self.values.tolist()}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "GridFunction":
        data = json.loads(text)
        values = data["values"]
        if len(values) != data["n"]:
            raise ValueError(f"n={data['n']} but {len(values)} values given")
        return cls(Grid1D(data["n"]), np.asarray(values, dtype=float))

    def to_csv(self) -> str:
        """Two columns (x, u), boundary points included."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "u"])
        for x, u in zip(self.grid.x_full, self.full):
            writer.writerow([repr(float(x)), repr(float(u))])
        return buf.getvalue()


class SignClass(enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    NONNEGATIVE = "Nonnegative"
    NONPOSITIVE = "Nonpositive"
    SIGN_CHANGING = "SignChanging"
    ZERO = "Zero"


def check_same_grid(a: GridFunction, b: GridFunction) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"grid mismatch: n={a.grid.n} vs n={b.grid.n}")


def integrate(g: GridFunction) -> float:
    return g.grid.h * float(np.sum(g.values))


def gradient(u: GridFunction) -> np.ndarray:
    """Forward differences on the n + 1 cells, boundary zeros included."""
    return np.diff(u.full) / u.grid.h


def _check_exponent(r: float) -> None:
    if not r > 1:
        raise ValueError(f"exponent must exceed 1, got {r}")


def norm(u: GridFunction, r: float) -> float:
    _check_exponent(r)
    return integrate(GridFunction(u.grid, np.abs(u.values) ** r)) ** (1.0 / r)


def seminorm(u: GridFunction, r: float) -> float:
    _check_exponent(r)
    return (u.grid.h * float(np.sum(np.abs(gradient(u)) ** r))) ** (1.0 / r)


def lp_power(u: GridFunction, r: float) -> float:
    """``norm(u, r) ** r`` without the round trip through the root."""
    return u.grid.h * float(np.sum(np.abs(u.values) ** r))


def grad_power(u: GridFunction, r: float) -> float:
    """``seminorm(u, r) ** r``."""
    return u.grid.h * float(np.sum(np.abs(gradient(u)) ** r))


def pairing(f: GridFunction, u: GridFunction) -> float:
    check_same_grid(f, u)
    return u.grid.h * float(np.dot(f.values, u.values))


def split_signs(u: GridFunction) -> tuple[GridFunction, GridFunction]:
    return (GridFunction(u.grid, np.maximum(u.values, 0.0)),
            GridFunction(u.grid, np.minimum(u.values, 0.0)))


def default_sign_tol(u: GridFunction) -> float:
    return 1e-8 * u.sup()


def classify_sign(u: GridFunction, tol: float | None = None) -> SignClass:
    if tol is None:
        tol = default_sign_tol(u)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    v = u.values
    if np.max(np.abs(v)) <= tol:
        return SignClass.ZERO
    if np.all(v > tol):
        return SignClass.POSITIVE
    if np.all(v < -tol):
        return SignClass.NEGATIVE
    if np.min(v) >= -tol:
        return SignClass.NONNEGATIVE
    if np.max(v) <= tol:
        return SignClass.NONPOSITIVE
    return SignClass.SIGN_CHANGING
