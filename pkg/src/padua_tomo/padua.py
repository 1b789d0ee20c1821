"""Padua points, bivariate Chebyshev interpolation and its evaluation.

The interpolant of total degree ``n`` is stored in the product basis
``T_a(x/L) T_b(y/L)`` with ``a + b <= n`` on the square ``[-L, L]^2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from numpy.polynomial import chebyshev

DEFAULT_L = 3.0
FUNCTION_TAGS = ("husimi_q", "wigner")


@dataclass(frozen=True, eq=False)
class PhaseGrid:
    """Sampling points in phase space, ``points[:, 0] = Re alpha``.

    ``kind`` is ``"padua"`` (with ``n``), ``"equidistant"`` (with ``rows``
    and ``cols``) or ``"custom"``.
    """

    kind: str
    L: float
    points: np.ndarray
    n: Optional[int] = None
    rows: Optional[int] = None
    cols: Optional[int] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        if self.kind not in ("padua", "equidistant", "custom"):
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if not self.L > 0:
            raise ValueError("domain half-width L must be positive")
        if np.any(np.abs(pts) > self.L * (1 + 1e-12)):
            raise ValueError("grid points must lie in [-L, L]^2")
        if self.kind == "padua" and len(pts) != (self.n + 1) * (self.n + 2) // 2:
            raise ValueError(f"a degree-{self.n} Padua grid has {(self.n + 1) * (self.n + 2) // 2} points, got {len(pts)}")
        if self.kind == "equidistant" and len(pts) != self.rows * self.cols:
            raise ValueError("equidistant grid size does not match rows*cols")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def alphas(self) -> np.ndarray:
        return self.points[:, 0] + 1j * self.points[:, 1]

    def describe(self) -> dict:
        """Grid header as stored in measurement-record files."""
        d = {"kind": self.kind, "L": self.L}
        if self.kind == "padua":
            d["n"] = self.n
        elif self.kind == "equidistant":
            d.update(rows=self.rows, cols=self.cols)
        return d


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    grid: PhaseGrid
    values: np.ndarray
    noise_sigma: float = 0.0
    function_tag: str = "husimi_q"
    nonzero_count: Optional[int] = field(default=None, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if len(v) != len(self.grid):
            raise ValueError(f"{len(v)} values for {len(self.grid)} grid points")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.function_tag not in FUNCTION_TAGS:
            raise ValueError(f"function_tag must be one of {FUNCTION_TAGS}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def with_values(self, values, **changes) -> "MeasurementRecord":
        return MeasurementRecord(
            grid=changes.get("grid", self.grid),
            values=values,
            noise_sigma=changes.get("noise_sigma", self.noise_sigma),
            function_tag=changes.get("function_tag", self.function_tag),
            nonzero_count=changes.get("nonzero_count"),
        )


class EvalResult(NamedTuple):
    value: float
    extrapolated: bool


@dataclass(frozen=True, eq=False)
class ChebCoeffs:
    """Coefficients ``c[a, b]`` of ``sum T_a(x/L) T_b(y/L)``, zero for ``a + b > order``."""

    order: int
    L: float
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.order + 1, self.order + 1):
            raise ValueError(f"coefficient matrix must be {(self.order + 1,) * 2}, got {c.shape}")
        c[_above_antidiagonal(self.order)] = 0.0
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __call__(self, x, y):
        """Vectorized evaluation (Clenshaw recurrence along each axis)."""
        x = np.asarray(x, dtype=float) / self.L
        y = np.asarray(y, dtype=float) / self.L
        return chebyshev.chebval2d(x, y, self.coeffs)


def _above_antidiagonal(n: int) -> np.ndarray:
    a = np.arange(n + 1)
    return a[:, None] + a[None, :] > n


# ---------------------------------------------------------------------------
# grids


def padua_points(n: int, L: float = DEFAULT_L) -> PhaseGrid:
    """First-family Padua points ``(L cos(j pi/n), L cos(k pi/(n+1)))``, ``j + k`` even.

    Points come out in lexicographic ``(j, k)`` order.
    """
    if n < 1:
        raise ValueError("Padua points need n >= 1 (n = 0 is degenerate)")
    j, k = _padua_indices(n)
    pts = np.column_stack([L * np.cos(j * np.pi / n), L * np.cos(k * np.pi / (n + 1))])
    return PhaseGrid("padua", float(L), pts, n=n)


def _padua_indices(n: int):
    jj, kk = np.meshgrid(np.arange(n + 1), np.arange(n + 2), indexing="ij")
    keep = (jj + kk) % 2 == 0
    return jj[keep], kk[keep]


def equidistant_grid(rows: int, cols: int, L: float = DEFAULT_L) -> PhaseGrid:
    """Uniform ``rows x cols`` grid over ``[-L, L]^2`` including the edges.

    Rows run along ``x`` and are the outer loop (row-major).
    """
    if rows < 2 or cols < 2:
        raise ValueError("equidistant grid needs rows, cols >= 2")
    xs = np.linspace(-L, L, rows)
    ys = np.linspace(-L, L, cols)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    return PhaseGrid("equidistant", float(L), np.column_stack([xx.ravel(), yy.ravel()]), rows=rows, cols=cols)


# ---------------------------------------------------------------------------
# interpolation


def _locate_padua(grid: PhaseGrid):
    """Recover the ``(j, k)`` generating indices of every point of a Padua grid.

    Works for any ordering of the points, so shuffled records interpolate to
    the same coefficients.
    """
    n, L = grid.n, grid.L
    x = np.clip(grid.points[:, 0] / L, -1.0, 1.0)
    y = np.clip(grid.points[:, 1] / L, -1.0, 1.0)
    j = np.rint(np.arccos(x) * n / np.pi).astype(int)
    k = np.rint(np.arccos(y) * (n + 1) / np.pi).astype(int)
    ok = (
        np.allclose(np.cos(j * np.pi / n), x, atol=1e-9)
        and np.allclose(np.cos(k * np.pi / (n + 1)), y, atol=1e-9)
        and np.all((j + k) % 2 == 0)
        and len(set(zip(j.tolist(), k.tolist()))) == len(j)
    )
    if not ok:
        raise ValueError(f"grid points are not the degree-{n} Padua points on [-{L}, {L}]^2")
    return j, k


def _padua_transform(n: int, j: np.ndarray, k: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Cubature-weighted transform from Padua samples to Chebyshev coefficients.

    ``values`` has shape ``(N,)`` or ``(N, B)``; the result is ``(n+1, n+1)``
    or ``(B, n+1, n+1)``.  Cost is two Chebyshev-Vandermonde products.
    """
    v = np.asarray(values, dtype=float)
    batch = v.ndim == 2
    if not batch:
        v = v[:, None]
    # cubature weights: 2/(n(n+1)) inside, halved on each boundary line
    w = np.full(len(j), 2.0 / (n * (n + 1)))
    w[(j == 0) | (j == n)] *= 0.5
    w[(k == 0) | (k == n + 1)] *= 0.5
    g = np.zeros((n + 1, n + 2, v.shape[1]))
    g[j, k, :] = w[:, None] * v

    scale = np.full(n + 1, np.sqrt(2.0))
    scale[0] = 1.0
    deg = np.arange(n + 1)
    t1 = np.cos(np.outer(deg, np.arange(n + 1) * np.pi / n)) * scale[:, None]
    t2 = np.cos(np.outer(deg, np.arange(n + 2) * np.pi / (n + 1))) * scale[:, None]
    c = np.einsum("aj,jkB,bk->Bab", t1, g, t2)
    c[:, _above_antidiagonal(n)] = 0.0
    c[:, n, 0] *= 0.5
    # orthonormal -> plain Chebyshev basis
    c *= scale[None, :, None] * scale[None, None, :]
    return c if batch else c[0]


def interpolate_padua(record: MeasurementRecord) -> ChebCoeffs:
    """Lagrange interpolant of total degree ``n`` through the Padua samples."""
    grid = record.grid
    if grid.kind != "padua":
        raise ValueError(f"interpolate_padua needs a Padua grid, got {grid.kind!r} (use interpolate_tensor)")
    if not np.all(np.isfinite(record.values)):
        raise ValueError("record contains non-finite values")
    j, k = _locate_padua(grid)
    return ChebCoeffs(grid.n, grid.L, _padua_transform(grid.n, j, k, record.values))


def padua_operator(grid: PhaseGrid) -> np.ndarray:
    """Matrix mapping sample vectors to flattened coefficients, shape ``((n+1)^2, N)``."""
    j, k = _locate_padua(grid)
    n = grid.n
    c = _padua_transform(n, j, k, np.eye(len(j)))
    return c.reshape(len(j), -1).T


def _cheb_vandermonde(grid: PhaseGrid, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a, b = np.nonzero(~_above_antidiagonal(n))
    tx = chebyshev.chebvander(grid.points[:, 0] / grid.L, n)
    ty = chebyshev.chebvander(grid.points[:, 1] / grid.L, n)
    return tx[:, a] * ty[:, b], a, b


def interpolate_tensor(record: MeasurementRecord) -> ChebCoeffs:
    """Least-squares fit of total degree ``rows - 1`` on a square equidistant grid.

    This is plain polynomial fitting with no rational preprocessing; it is the
    baseline the Padua scheme is compared against.
    """
    grid = record.grid
    if grid.kind != "equidistant":
        raise ValueError(f"interpolate_tensor needs an equidistant grid, got {grid.kind!r}")
    if grid.rows != grid.cols:
        raise ValueError(f"interpolate_tensor needs rows == cols, got {grid.rows}x{grid.cols}")
    n = grid.rows - 1
    vander, a, b = _cheb_vandermonde(grid, n)
    sol, *_ = np.linalg.lstsq(vander, record.values, rcond=None)
    c = np.zeros((n + 1, n + 1))
    c[a, b] = sol
    return ChebCoeffs(n, grid.L, c)


def interpolate(record: MeasurementRecord) -> ChebCoeffs:
    if record.grid.kind == "padua":
        return interpolate_padua(record)
    return interpolate_tensor(record)


# ---------------------------------------------------------------------------
# evaluation


def eval_cheb(coeffs: ChebCoeffs, point) -> EvalResult:
    """Value of the expansion at one point; flags evaluation outside ``[-L, L]^2``."""
    if hasattr(point, "re"):
        x, y = point.re, point.im
    elif isinstance(point, complex):
        x, y = point.real, point.imag
    else:
        x, y = point
    outside = max(abs(x), abs(y)) > coeffs.L * (1 + 1e-12)
    return EvalResult(float(coeffs(x, y)), bool(outside))


@dataclass(frozen=True)
class DenseGrid:
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    def rows(self):
        """``(x, y, value)`` triples in row-major order."""
        return zip(self.x.ravel().tolist(), self.y.ravel().tolist(), self.values.ravel().tolist())


def eval_grid(coeffs: ChebCoeffs, resolution: int) -> DenseGrid:
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    s = np.linspace(-coeffs.L, coeffs.L, resolution)
    xx, yy = np.meshgrid(s, s, indexing="ij")
    vals = chebyshev.chebgrid2d(s / coeffs.L, s / coeffs.L, coeffs.coeffs)
    return DenseGrid(xx, yy, vals)


def lebesgue_estimate(n: int, probe_resolution: int = 200) -> float:
    """Max over a uniform probe grid of ``sum_k |l_k(x, y)|`` for the Padua family.

    The fundamental polynomials ``l_k`` are the interpolants of the unit
    vectors.  Probe grids with resolutions ``r`` and ``r'`` are nested when
    ``(r - 1)`` divides ``(r' - 1)``, and along such chains the estimate can
    only grow.
    """
    if probe_resolution < 4 * n:
        warnings.warn(
            f"probe_resolution {probe_resolution} < 4n = {4 * n}; the maximum may be under-resolved",
            stacklevel=2,
        )
    grid = padua_points(n, 1.0)
    j, k = _locate_padua(grid)
    basis = _padua_transform(n, j, k, np.eye(len(j)))  # (N, n+1, n+1)
    s = np.linspace(-1.0, 1.0, probe_resolution)
    tv = chebyshev.chebvander(s, n)  # (R, n+1)
    total = np.zeros((probe_resolution, probe_resolution))
    for start in range(0, len(basis), 64):
        lk = np.einsum("pa,Kab,qb->Kpq", tv, basis[start : start + 64], tv, optimize=True)
        total += np.abs(lk).sum(axis=0)
    return float(total.max())
