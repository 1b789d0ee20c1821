"""Polar form ``sum c[m, p] r^m e^{i p theta}`` of the Chebyshev interpolant.

Only the low-order part (``m <= q_max``) is needed downstream, and those
coefficients are Taylor coefficients at the origin.  Getting them from a
degree-35 Chebyshev expansion means contracting against the integer
Chebyshev-to-monomial table, whose entries reach ~1e13 with alternating signs,
so the contraction is done in exact rational arithmetic: every double is a
dyadic rational, the table is integral, and the only rounding happens when
the finished polar coefficients are converted back to floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .padua import ChebCoeffs, MeasurementRecord, interpolate_padua

CONVENTION = "alpha = x + i*y, x horizontal; theta measured from the +x axis"


@dataclass(frozen=True, eq=False)
class PolarPoly:
    """``coeffs[m, p + order]`` holds ``c[m, p]`` for ``0 <= m <= q_max``, ``|p| <= order``."""

    order: int
    q_max: int
    L: float
    coeffs: np.ndarray

    def c(self, m: int, p: int) -> complex:
        if not 0 <= m <= self.q_max:
            raise IndexError(f"radial order {m} outside 0..{self.q_max}")
        if abs(p) > self.order:
            return 0j
        return complex(self.coeffs[m, p + self.order])

    def scaled(self, factor: complex) -> "PolarPoly":
        return PolarPoly(self.order, self.q_max, self.L, self.coeffs * factor)

    def to_dict(self, tol: float = 1e-14) -> dict:
        entries = []
        for m in range(self.q_max + 1):
            for p in range(-self.order, self.order + 1):
                z = self.c(m, p)
                if abs(z) > tol:
                    entries.append({"m": m, "p": p, "re": z.real, "im": z.imag})
        return {"n": self.order, "q_max": self.q_max, "L": self.L, "convention": CONVENTION, "c": entries}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    def __call__(self, r, theta):
        """Evaluate the truncated polar series."""
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        out = np.zeros(np.broadcast(r, theta).shape, dtype=complex)
        for m in range(self.q_max + 1):
            for p in range(-m, m + 1):
                z = self.coeffs[m, p + self.order]
                if z != 0:
                    out += z * r**m * np.exp(1j * p * theta)
        return out


@lru_cache(maxsize=None)
def cheb_to_monomial_table(n: int) -> tuple:
    """Exact integers ``t[a][i]``: coefficient of ``x^i`` in ``T_a(x)``."""
    t = [[0] * (n + 1) for _ in range(n + 1)]
    t[0][0] = 1
    if n >= 1:
        t[1][1] = 1
    for a in range(2, n + 1):
        for i in range(n + 1):
            t[a][i] = (2 * t[a - 1][i - 1] if i else 0) - t[a - 2][i]
    return tuple(tuple(row) for row in t)


def _dyadic_matrix(c: np.ndarray) -> tuple[np.ndarray, int]:
    """Write ``c`` exactly as ``M / 2**K`` with an integer object array ``M``."""
    ratios = [float(v).as_integer_ratio() for v in c.ravel()]
    K = max(den.bit_length() - 1 for _, den in ratios)
    ints = [num << (K - (den.bit_length() - 1)) for num, den in ratios]
    return np.array(ints, dtype=object).reshape(c.shape), K


def _monomial_exact(coeffs: ChebCoeffs, q_max: int) -> dict[tuple[int, int], Fraction]:
    n = coeffs.order
    if q_max > n:
        raise ValueError(f"q_max = {q_max} exceeds the interpolation order {n}")
    if q_max < 0:
        raise ValueError("q_max must be non-negative")
    t = np.array(cheb_to_monomial_table(n), dtype=object)[:, : q_max + 1]
    ints, K = _dyadic_matrix(coeffs.coeffs)
    u = t.T.dot(ints).dot(t)  # u[i, j] = sum_ab t[a, i] c[a, b] t[b, j]
    L = Fraction(coeffs.L)
    den = 1 << K
    return {
        (i, j): Fraction(u[i, j], den) / L ** (i + j)
        for i in range(q_max + 1)
        for j in range(q_max + 1 - i)
    }


def cheb_to_monomial_truncated(coeffs: ChebCoeffs, q_max: int) -> np.ndarray:
    """Monomial coefficients ``m[i, j]`` of ``x^i y^j`` (physical units), ``i + j <= q_max``.

    Equivalently ``m[i, j] = d^i_x d^j_y L_n[f](0, 0) / (i! j!)``.
    Entries with ``i + j > q_max`` are zero.
    """
    exact = _monomial_exact(coeffs, q_max)
    out = np.zeros((q_max + 1, q_max + 1))
    for (i, j), v in exact.items():
        out[i, j] = float(v)
    return out


@lru_cache(maxsize=None)
def _polar_terms(i: int, j: int) -> tuple:
    """Expansion of ``cos^i sin^j`` as ``sum_p w_p e^{i p theta}``; weights as (re, im) Fractions.

    Uses ``cos = (e + 1/e)/2`` and ``sin = (e - 1/e)/(2i)``.
    """
    # 1/(2i)^j = (-i)^j / 2^j
    unit = [(1, 0), (0, -1), (-1, 0), (0, 1)][j % 4]
    acc: dict[int, Fraction] = {}
    for u in range(i + 1):
        for v in range(j + 1):
            p = (2 * u - i) + (2 * v - j)
            acc[p] = acc.get(p, Fraction(0)) + comb(i, u) * comb(j, v) * (-1) ** (j - v)
    scale = Fraction(1, 2 ** (i + j))
    return tuple((p, w * scale * unit[0], w * scale * unit[1]) for p, w in sorted(acc.items()))


def _polar_exact(monomials: dict[tuple[int, int], Fraction], q_max: int) -> dict[tuple[int, int], tuple]:
    acc: dict[tuple[int, int], list] = {}
    for (i, j), mval in monomials.items():
        if mval == 0:
            continue
        for p, wre, wim in _polar_terms(i, j):
            slot = acc.setdefault((i + j, p), [Fraction(0), Fraction(0)])
            slot[0] += mval * wre
            slot[1] += mval * wim
    return acc


def _to_polarpoly(acc, order: int, q_max: int, L: float) -> PolarPoly:
    c = np.zeros((q_max + 1, 2 * order + 1), dtype=complex)
    for (m, p), (re, im) in acc.items():
        c[m, p + order] = complex(float(re), float(im))
    return PolarPoly(order, q_max, float(L), c)


def monomial_to_polar(monomials, q_max: int, order: int | None = None, L: float = 1.0) -> PolarPoly:
    """Rewrite ``sum m[i, j] x^i y^j`` as ``sum c[m, p] r^m e^{i p theta}``.

    ``monomials`` is an array indexed ``[i, j]`` or a dict keyed ``(i, j)``.
    """
    if isinstance(monomials, dict):
        items = {k: Fraction(float(v)) if not isinstance(v, Fraction) else v for k, v in monomials.items()}
    else:
        arr = np.asarray(monomials, dtype=float)
        items = {
            (i, j): Fraction(float(arr[i, j]))
            for i in range(min(arr.shape[0], q_max + 1))
            for j in range(min(arr.shape[1], q_max + 1 - i))
        }
    items = {k: v for k, v in items.items() if sum(k) <= q_max}
    order = q_max if order is None else order
    return _to_polarpoly(_polar_exact(items, q_max), order, q_max, L)


def polar_from_cheb(coeffs: ChebCoeffs, q_max: int) -> PolarPoly:
    """Exact path: the monomial coefficients never get rounded."""
    acc = _polar_exact(_monomial_exact(coeffs, q_max), q_max)
    return _to_polarpoly(acc, coeffs.order, q_max, coeffs.L)


def polar_from_record(record: MeasurementRecord, q_max: int) -> PolarPoly:
    """Padua interpolation followed by the polar rewrite; the estimator's entry point."""
    return polar_from_cheb(interpolate_padua(record), q_max)
