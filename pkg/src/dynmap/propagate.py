"""Time-ordered propagation from time-local generators.

Implements the matrix exponential, the first-order time-splitting product

    Phi(t1, t0) ~ prod_{j=n-1..0} exp(L(t'_j) * dt),

its explicit inverse (the same factors negated and reversed, so the
round-trip cancels factor by factor), and a quadrature check of the
determinant identity

    det Phi(t, t0) = det Phi(s, t0) * exp(int_s^t tr L(u) du).

Later times always act on the left (time ordering).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .superop import SingularMapError, _as_complex_matrix, _square_side

EXPM_NORM_LIMIT = 1e8
_EXPM_TAYLOR_ORDER = 12
_EXPM_SCALE_TARGET = 0.5


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of [t0, t1] into n steps (n + 1 points)."""

    t0: float
    t1: float
    n: int

    def __post_init__(self):
        if not (self.t1 > self.t0):
            raise ValueError(f"need t1 > t0, got [{self.t0}, {self.t1}]")
        if self.n < 1:
            raise ValueError(f"need at least one step, got n={self.n}")

    @property
    def spacing(self) -> float:
        return (self.t1 - self.t0) / self.n

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.t0, self.t1, self.n + 1)


@dataclass(frozen=True)
class Propagator:
    """Result of a time-splitting product over a grid."""

    mat: np.ndarray = field(repr=False)
    grid: TimeGrid
    direction: str  # "forward" | "inverse"


def expm(m) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Taylor kernel.

    The argument is halved until its induced 1-norm is <= 0.5, the kernel is
    an order-12 Taylor polynomial (remainder < 1e-13 at that norm), and the
    result is squared back. exp(0) is exactly the identity.
    """
    a = _as_complex_matrix(m)
    n = _square_side(a)
    norm1 = float(np.linalg.norm(a, 1))
    if norm1 > EXPM_NORM_LIMIT:
        raise OverflowError(f"matrix 1-norm {norm1:.3e} exceeds expm guard {EXPM_NORM_LIMIT:.0e}")
    squarings = 0
    if norm1 > _EXPM_SCALE_TARGET:
        squarings = int(np.ceil(np.log2(norm1 / _EXPM_SCALE_TARGET)))
        a = a / (2.0 ** squarings)
    eye = np.eye(n, dtype=complex)
    out = eye.copy()
    for k in range(_EXPM_TAYLOR_ORDER, 0, -1):
        out = eye + (a @ out) / k
    for _ in range(squarings):
        out = out @ out
    return out


def time_split_forward(lsrc: Callable[[float], np.ndarray], grid: TimeGrid) -> Propagator:
    """Ordered product of exp(L(t'_j) dt) over the grid, latest factor leftmost.

    ``lsrc`` maps a time to the generator matrix at that time; the factors
    sample the left endpoint of each step.
    """
    dt = grid.spacing
    pts = grid.points
    out = None
    for j in range(grid.n):
        factor = expm(np.asarray(lsrc(float(pts[j])), dtype=complex) * dt)
        out = factor if out is None else factor @ out
    return Propagator(mat=out, grid=grid, direction="forward")


def time_split_inverse(lsrc: Callable[[float], np.ndarray], grid: TimeGrid) -> Propagator:
    """Reversed product of exp(-L(t'_j) dt); inverts the forward product.

    Composing with :func:`time_split_forward` on the same grid cancels
    factor by factor, leaving only roundoff.
    """
    dt = grid.spacing
    pts = grid.points
    out = None
    for j in range(grid.n):
        factor = expm(-np.asarray(lsrc(float(pts[j])), dtype=complex) * dt)
        out = factor if out is None else out @ factor
    return Propagator(mat=out, grid=grid, direction="inverse")


def simpson(values: np.ndarray, dx: float) -> float:
    """Composite Simpson rule over uniformly spaced samples.

    The sample count must be odd (even interval count); callers pad the
    grid when needed.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 3 or values.size % 2 == 0:
        raise ValueError(f"Simpson rule needs an odd number of samples >= 3, got {values.size}")
    weights = np.ones(values.size)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(np.dot(weights, values) * dx / 3.0)


def ajl_check(
    process: Callable[[float], np.ndarray],
    lsrc: Callable[[float], np.ndarray],
    t: float,
    s: float,
    n_quad: int = 256,
) -> float:
    """Relative residual of the determinant identity between times s <= t.

    Computes |det A(t) - det A(s) * exp(int_s^t tr L(u) du)| / |det A(t)|
    with the integral evaluated by composite Simpson on ``n_quad`` steps
    (padded to an even count). Raises :class:`SingularMapError` when
    det A(t) vanishes and the relative residual is undefined.
    """
    if s > t:
        raise ValueError(f"need s <= t, got s={s}, t={t}")
    det_t = complex(np.linalg.det(np.asarray(process(t), dtype=complex)))
    if abs(det_t) == 0.0:
        raise SingularMapError(0.0, 0.0)
    if s == t:
        return 0.0
    n = max(2, int(n_quad))
    if n % 2 == 1:
        n += 1
    pts = np.linspace(s, t, n + 1)
    traces = np.array(
        [np.trace(np.asarray(lsrc(float(u)), dtype=complex)).real for u in pts]
    )
    integral = simpson(traces, (t - s) / n)
    det_s = complex(np.linalg.det(np.asarray(process(s), dtype=complex)))
    return abs(det_t - det_s * np.exp(integral)) / abs(det_t)
