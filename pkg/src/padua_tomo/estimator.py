"""Density-matrix elements from the polar Q-function coefficients, with error bounds.

With ``Q(r, theta) = sum c[m, p] r^m e^{i p theta}`` built from raw Q samples
(which carry the ``1/pi`` of the Husimi function), the element
``rho_jk = <j|rho|k>`` is

    rho_jk = 2 pi C[k, j] sum_q q! w[q, j+k] c[q, k-j]

where ``C[k, j] = sqrt(k! j!) / (2 (k+j)!)`` and ``w[q, s]`` is the
Leibniz weight of ``d^s/dr^s (e^{r^2} g)`` at ``r = 0`` on ``g^{(q)}(0)``,
i.e. ``binom(s, q)`` times the ``(s-q)``-th derivative of ``e^{r^2}`` at 0.
The factor ``2 pi`` is ``pi`` from the P-function overlap times ``2 pi``
from the angular integral; the angular index is ``k - j`` because the
coherent overlap carries ``conj(alpha)^n``.

The signed constants ``d[q, s] = (-1)^(s-q) binom(s, q) H_{s-q}(0)`` are also
provided (:func:`d_coeff`); they differ from the Leibniz weights by the
factor ``(-1)^((s-q)/2)``.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial, sqrt
from typing import Optional, Union

import numpy as np

from .padua import MeasurementRecord
from .polar import PolarPoly, polar_from_record
from .states import DensityMatrix, FockState, as_density_matrix, q_function

CONVERGENCE_ADVICE = (
    "no oracle supplied: increase the number of Padua points until the estimate "
    "converges to within sigma_bound; the reconstruction error can then be neglected"
)


def _check_qs(q: int, s: int) -> None:
    if q < 0 or s < 0 or q > s:
        raise ValueError(f"need 0 <= q <= s, got q={q}, s={s}")


@lru_cache(maxsize=None)
def hermite_at_zero(n: int) -> int:
    """``H_n(0)`` for physicists' Hermite polynomials, via ``H_{n+1} = 2x H_n - 2n H_{n-1}``."""
    h_prev, h = 1, 0  # H_0(0), H_1(0)
    if n == 0:
        return 1
    for m in range(1, n):
        h_prev, h = h, -2 * m * h_prev
    return h


@lru_cache(maxsize=None)
def d_coeff(q: int, s: int) -> int:
    """Closed form ``(-1)^((s-q)/2) s! / (q! ((s-q)/2)!)`` for even ``s - q``, else 0."""
    _check_qs(q, s)
    if (s - q) % 2:
        return 0
    h = (s - q) // 2
    return (-1) ** h * factorial(s) // (factorial(q) * factorial(h))


def d_coeff_hermite(q: int, s: int) -> int:
    """``(-1)^(s-q) binom(s, q) H_{s-q}(0)``, the same constants from the Hermite recurrence."""
    _check_qs(q, s)
    return (-1) ** (s - q) * comb(s, q) * hermite_at_zero(s - q)


@lru_cache(maxsize=None)
def leibniz_coeff(q: int, s: int) -> int:
    """Weight of ``g^{(q)}(0)`` in ``d^s/dr^s [e^{r^2} g(r)]`` at ``r = 0``."""
    _check_qs(q, s)
    if (s - q) % 2:
        return 0
    h = (s - q) // 2
    # d^{2h}/dr^{2h} e^{r^2} at 0 equals (2h)!/h!
    return comb(s, q) * factorial(2 * h) // factorial(h)


def comb_factor(j: int, k: int) -> float:
    """``C[k, j] = sqrt(k! j!) / (2 (k+j)!)``."""
    if j < 0 or k < 0:
        raise ValueError("Fock indices must be non-negative")
    return sqrt(factorial(j) * factorial(k)) / (2 * factorial(j + k))


@dataclass(frozen=True)
class DmConstants:
    """State-independent tables up to ``d_max``; built once and shared read-only."""

    d_max: int
    d: np.ndarray = field(repr=False)  # d[q, s], signed
    leibniz: np.ndarray = field(repr=False)  # w[q, s]
    C: np.ndarray = field(repr=False)  # C[k, j]


@lru_cache(maxsize=None)
def dm_constants(d_max: int) -> DmConstants:
    s_max = 2 * d_max
    d = np.zeros((s_max + 1, s_max + 1))
    w = np.zeros((s_max + 1, s_max + 1))
    for s in range(s_max + 1):
        for q in range(s + 1):
            d[q, s] = d_coeff(q, s)
            w[q, s] = leibniz_coeff(q, s)
    C = np.array([[comb_factor(j, k) for j in range(d_max + 1)] for k in range(d_max + 1)])
    for arr in (d, w, C):
        arr.setflags(write=False)
    return DmConstants(d_max, d, w, C)


def _element_weights(j: int, k: int) -> list[tuple[int, float]]:
    """``(q, 2 pi C[k,j] q! w[q, j+k])`` for the nonzero terms of the sum."""
    s = j + k
    pref = 2 * np.pi * comb_factor(j, k)
    return [(q, pref * factorial(q) * leibniz_coeff(q, s)) for q in range(s % 2, s + 1, 2)]


def rho_element(poly: PolarPoly, j: int, k: int) -> complex:
    """Estimate of ``<j|rho|k>`` from the polar coefficients of a Q-function interpolant."""
    if j < 0 or k < 0:
        raise ValueError("Fock indices must be non-negative")
    if j + k > poly.q_max:
        raise ValueError(f"rho_{j}{k} needs radial order {j + k}, polynomial only has q_max = {poly.q_max}")
    if abs(j - k) > poly.order:
        raise ValueError(f"|j - k| = {abs(j - k)} exceeds the interpolation order {poly.order}")
    p = k - j
    return complex(sum(wt * poly.c(q, p) for q, wt in _element_weights(j, k)))


def rho_matrix(poly: PolarPoly, d_max: int) -> np.ndarray:
    """All ``rho_jk`` with ``j, k <= d_max``; no trace or positivity is imposed."""
    if poly.q_max < 2 * d_max:
        raise ValueError(f"d_max = {d_max} needs q_max >= {2 * d_max}, got {poly.q_max}")
    out = np.empty((d_max + 1, d_max + 1), dtype=complex)
    for j in range(d_max + 1):
        for k in range(d_max + 1):
            out[j, k] = rho_element(poly, j, k)
    return out


def sigma_bracket(j: int, k: int) -> float:
    """``sqrt(k! j!)/2 * sum_{q: j+k-q even} 1/((j+k-q)/2)!``."""
    s = j + k
    total = sum(1.0 / factorial((s - q) // 2) for q in range(s % 2, s + 1, 2))
    return sqrt(factorial(j) * factorial(k)) / 2 * total


def sigma_bound(j: int, k: int, K: float, epsilon: float) -> float:
    """Noise bound on ``rho_jk`` when every polar coefficient carries error ``K * epsilon``.

    Equals ``2 pi K epsilon sigma_bracket(j, k)``; the ``2 pi`` is the same
    normalization that :func:`rho_element` applies to the coefficients.
    Reported as a 1-sigma-equivalent bar.
    """
    if K < 0 or epsilon < 0:
        raise ValueError("K and epsilon must be non-negative")
    return 2 * np.pi * K * epsilon * sigma_bracket(j, k)


def nearest_psd(matrix: np.ndarray) -> np.ndarray:
    """Optional post-processing: nearest Hermitian PSD matrix in Frobenius norm.

    Not part of the estimator proper, which deliberately returns the raw
    linear estimate; trace is not renormalized.
    """
    h = (matrix + matrix.conj().T) / 2
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.clip(vals, 0, None)) @ vecs.conj().T


@dataclass(frozen=True)
class EstimateResult:
    j: int
    k: int
    value: complex
    sigma_bound: float
    recon_bound: Optional[float]
    n_used: int
    N_used: int
    epsilon: float
    K_used: float

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "k": self.k,
            "re": self.value.real,
            "im": self.value.imag,
            "sigma_bound": self.sigma_bound,
            "recon_bound": self.recon_bound,
            "n": self.n_used,
            "N": self.N_used,
            "epsilon": self.epsilon,
            "K": self.K_used,
        }


@dataclass(frozen=True)
class Estimate:
    """Grid of :class:`EstimateResult` plus run metadata."""

    results: list
    d_max: int
    metadata: dict

    def __getitem__(self, jk) -> EstimateResult:
        j, k = jk
        return self.results[j * (self.d_max + 1) + k]

    def matrix(self) -> np.ndarray:
        return np.array([r.value for r in self.results]).reshape(self.d_max + 1, self.d_max + 1)

    def to_json(self) -> str:
        return json.dumps([r.to_dict() for r in self.results], indent=1)

    def table(self) -> str:
        lines = [f"{'j':>2} {'k':>2} {'Re rho':>12} {'Im rho':>12} {'sigma':>10} {'recon':>10}"]
        for r in self.results:
            recon = "n/a" if r.recon_bound is None else f"{r.recon_bound:.3e}"
            lines.append(
                f"{r.j:>2} {r.k:>2} {r.value.real:>12.6f} {r.value.imag:>12.6f} {r.sigma_bound:>10.3e} {recon:>10}"
            )
        return "\n".join(lines)


def estimate_with_errors(
    record: MeasurementRecord,
    oracle: Union[DensityMatrix, FockState, None] = None,
    d_max: int = 4,
    K: float = 1.0,
) -> Estimate:
    """Estimate ``rho_jk`` for ``j, k <= d_max`` together with both error terms.

    ``sigma_bound`` uses the record's noise level.  ``recon_bound`` is
    ``|rho_ideal - rho[N, 0]|`` from a noiseless re-run on the same grid when
    an oracle state is given; otherwise it is ``None`` and the metadata
    carries the iterate-until-converged recommendation.
    """
    if K <= 0:
        raise ValueError("K must be positive")
    if record.function_tag != "husimi_q":
        raise ValueError("density-matrix estimation needs Husimi Q samples")
    grid = record.grid
    poly = polar_from_record(record, 2 * d_max)
    est = rho_matrix(poly, d_max)

    recon = None
    if oracle is not None:
        rho_ideal = as_density_matrix(oracle).entries
        clean = record.with_values(q_function(oracle, grid.alphas), noise_sigma=0.0)
        est0 = rho_matrix(polar_from_record(clean, 2 * d_max), d_max)
        ideal = np.zeros_like(est0)
        m = min(rho_ideal.shape[0], d_max + 1)
        ideal[:m, :m] = rho_ideal[:m, :m]
        recon = np.abs(ideal - est0)

    eps = record.noise_sigma
    results = []
    noisy = []
    for j in range(d_max + 1):
        for k in range(d_max + 1):
            sb = sigma_bound(j, k, K, eps)
            if sb > 0 and sb > abs(est[j, k]):
                noisy.append((j, k))
            results.append(
                EstimateResult(
                    j, k, complex(est[j, k]), sb,
                    None if recon is None else float(recon[j, k]),
                    grid.n, len(grid), eps, K,
                )
            )
    if noisy:
        warnings.warn(f"sigma_bound exceeds |estimate| (noise-dominated) for elements {noisy}", stacklevel=2)
    meta = {
        "n": grid.n,
        "N": len(grid),
        "L": grid.L,
        "epsilon": eps,
        "K": K,
        "sigma_convention": "1-sigma-equivalent bound",
    }
    if recon is None:
        meta["recon_bound"] = CONVERGENCE_ADVICE
    return Estimate(results, d_max, meta)
