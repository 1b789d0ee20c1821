"""Seeded batch studies: convergence, noise propagation, thresholding, equidistant baseline.

Random draws come from a generator keyed by ``(seed, trial)``; within a trial
the ``i``-th normal belongs to grid point ``i``.  The noise level is not part
of the key, so the same trial uses the same standard normals at every
``epsilon`` and results are reproducible regardless of evaluation order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .estimator import rho_matrix, sigma_bound
from .padua import (
    DEFAULT_L,
    ChebCoeffs,
    MeasurementRecord,
    PhaseGrid,
    equidistant_grid,
    interpolate_padua,
    interpolate_tensor,
    padua_operator,
    padua_points,
)
from .polar import polar_from_cheb, polar_from_record
from .states import DensityMatrix, FockState, as_density_matrix, q_function, state_from_spec, state_to_spec, test_state, wigner_function

log = logging.getLogger(__name__)

CSV_COLUMNS = ("n", "N", "epsilon", "j", "k", "mean_re", "mean_im", "sigma", "delta_rel")
ZERO_TOL = 1e-12
SIGMA_REFERENCE = "sigma is the RMS deviation from the noiseless reconstruction rho[N, 0]"


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(trial)])))


def trial_normals(seed: int, trial: int, size: int) -> np.ndarray:
    return trial_rng(seed, trial).standard_normal(size)


def _oracle(function_tag: str):
    if function_tag == "husimi_q":
        return q_function
    if function_tag == "wigner":
        return wigner_function
    raise ValueError(f"unknown function tag {function_tag!r}")


def sample_state(
    rho: Union[DensityMatrix, FockState],
    grid: PhaseGrid,
    function_tag: str = "husimi_q",
    epsilon: float = 0.0,
    seed: int = 0,
    trial: int = 0,
) -> MeasurementRecord:
    """Exact quasi-probability values on ``grid`` plus i.i.d. ``N(0, epsilon^2)`` noise."""
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    values = np.asarray(_oracle(function_tag)(rho, grid.alphas), dtype=float)
    if epsilon > 0:
        values = values + epsilon * trial_normals(seed, trial, len(grid))
    return MeasurementRecord(grid, values, noise_sigma=float(epsilon), function_tag=function_tag)


# ---------------------------------------------------------------------------
# thresholding


def threshold_padua(record: MeasurementRecord, threshold: float) -> MeasurementRecord:
    """Zero every sample with ``|v| < threshold``; the grid is kept so interpolation still applies."""
    if record.grid.kind != "padua":
        raise ValueError("threshold_padua needs a Padua record")
    v = np.array(record.values)
    v[np.abs(v) < threshold] = 0.0
    return record.with_values(v, nonzero_count=int(np.count_nonzero(v)))


def threshold_equidistant(record: MeasurementRecord, keep: int) -> MeasurementRecord:
    """Keep the ``keep`` largest-magnitude samples and zero the rest (ties go to grid order)."""
    if record.grid.kind != "equidistant":
        raise ValueError("threshold_equidistant needs an equidistant record")
    if not 0 <= keep <= len(record.values):
        raise ValueError(f"keep must be in [0, {len(record.values)}]")
    order = np.argsort(-np.abs(record.values), kind="stable")
    v = np.zeros_like(record.values)
    v[order[:keep]] = record.values[order[:keep]]
    return record.with_values(v, nonzero_count=int(np.count_nonzero(v)))


# ---------------------------------------------------------------------------
# configuration and results


@dataclass
class StudyConfig:
    state: Union[FockState, DensityMatrix] = field(default_factory=test_state)
    n_values: tuple = tuple(range(11, 36))
    epsilons: tuple = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)
    trials: int = 10_000
    seed: int = 0
    L: float = DEFAULT_L
    d_max: int = 4
    K: float = 1.0
    threshold: float = 1e-2
    equidistant_rows: int = 16
    method: str = "linear"

    def __post_init__(self):
        self.n_values = tuple(int(n) for n in self.n_values)
        self.epsilons = tuple(float(e) for e in self.epsilons)
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.n_values:
            raise ValueError("n range is empty")
        if min(self.n_values) < 2 * self.d_max:
            raise ValueError(f"every n must be >= 2*d_max = {2 * self.d_max}")
        if any(e < 0 for e in self.epsilons):
            raise ValueError("noise levels must be non-negative")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.method not in ("linear", "direct"):
            raise ValueError("method must be 'linear' or 'direct'")

    @classmethod
    def from_dict(cls, d: dict) -> "StudyConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__) | {"n_range"}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "n_range" in d:
            lo, hi = d.pop("n_range")
            d["n_values"] = tuple(range(int(lo), int(hi) + 1))
        if "state" in d:
            d["state"] = state_from_spec(d["state"]) if isinstance(d["state"], dict) else d["state"]
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["state"] = state_to_spec(self.state)
        d["n_values"] = list(self.n_values)
        d["epsilons"] = list(self.epsilons)
        return d


@dataclass
class StudyResult:
    kind: str
    config: dict
    rows: list
    fits: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "config": self.config, "rows": self.rows, "fits": self.fits, "summary": self.summary},
            indent=1,
            sort_keys=True,
        )

    def to_csv(self) -> str:
        extra = sorted({key for row in self.rows for key in row} - set(CSV_COLUMNS))
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(CSV_COLUMNS) + extra, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in w.fieldnames})
        return buf.getvalue()

    def select(self, **match) -> list:
        return [r for r in self.rows if all(r.get(k) == v for k, v in match.items())]

    def series(self, j: int, k: int, key: str = "delta_rel", **match) -> tuple[np.ndarray, np.ndarray]:
        rows = sorted(self.select(j=j, k=k, **match), key=lambda r: r["N"])
        return np.array([r["n"] for r in rows]), np.array([r[key] for r in rows], dtype=float)


def _ideal(rho: DensityMatrix, d_max: int) -> np.ndarray:
    out = np.zeros((d_max + 1, d_max + 1), dtype=complex)
    m = min(rho.cutoff, d_max) + 1
    out[:m, :m] = rho.entries[:m, :m]
    return out


def _error_rows(n: int, N: int, est: np.ndarray, ideal: np.ndarray, **extra) -> list:
    rows = []
    d = est.shape[0]
    for j in range(d):
        for k in range(d):
            err = abs(ideal[j, k] - est[j, k])
            zero = bool(abs(ideal[j, k]) <= ZERO_TOL)
            rows.append(
                {
                    "n": n,
                    "N": N,
                    "epsilon": 0.0,
                    "j": j,
                    "k": k,
                    "mean_re": est[j, k].real,
                    "mean_im": est[j, k].imag,
                    "sigma": 0.0,
                    "delta_rel": err if zero else err / abs(ideal[j, k]),
                    "absolute_error_flag": zero,
                    **extra,
                }
            )
    return rows


def _loglinear_slope(x, y) -> float:
    return float(np.polyfit(np.asarray(x, float), np.log10(np.asarray(y, float)), 1)[0])


def _decay_fits(rows: list, d_max: int, **match) -> list:
    fits = []
    for j in range(d_max + 1):
        for k in range(d_max + 1):
            sel = sorted((r for r in rows if r["j"] == j and r["k"] == k and not r["absolute_error_flag"]
                          and all(r.get(a) == b for a, b in match.items())), key=lambda r: r["n"])
            if len(sel) < 2:
                continue
            ns = [r["n"] for r in sel]
            ds = [max(r["delta_rel"], 1e-300) for r in sel]
            fits.append({"j": j, "k": k, "slope_log10_delta_vs_n": _loglinear_slope(ns, ds), **match})
    return fits


def _padua_estimate(rho: DensityMatrix, n: int, L: float, d_max: int) -> np.ndarray:
    rec = sample_state(rho, padua_points(n, L))
    return rho_matrix(polar_from_record(rec, 2 * d_max), d_max)


def _tensor_estimate(rho: DensityMatrix, rows: int, L: float, d_max: int) -> np.ndarray:
    rec = sample_state(rho, equidistant_grid(rows, rows, L))
    return rho_matrix(polar_from_cheb(interpolate_tensor(rec), 2 * d_max), d_max)


# ---------------------------------------------------------------------------
# studies


def convergence_study(config: StudyConfig) -> StudyResult:
    """Noiseless relative reconstruction error for every ``n`` and element.

    Elements whose ideal value is zero get the absolute error instead and are
    flagged with ``absolute_error_flag``.
    """
    rho = as_density_matrix(config.state)
    ideal = _ideal(rho, config.d_max)
    rows = []
    for n in config.n_values:
        est = _padua_estimate(rho, n, config.L, config.d_max)
        rows += _error_rows(n, (n + 1) * (n + 2) // 2, est, ideal)
    return StudyResult("convergence", config.to_dict(), rows, _decay_fits(rows, config.d_max))


def _response_matrix(grid: PhaseGrid, d_max: int) -> np.ndarray:
    """Linear map from sample vectors to the flattened ``rho`` estimate, shape ``(E, N)``."""
    n = grid.n
    coeff_op = padua_operator(grid)  # ((n+1)^2, N)
    cols = []
    for col in coeff_op.T:
        poly = polar_from_cheb(ChebCoeffs(n, grid.L, col.reshape(n + 1, n + 1)), 2 * d_max)
        cols.append(rho_matrix(poly, d_max).ravel())
    return np.array(cols).T


def _noise_cell(clean: MeasurementRecord, est0: np.ndarray, eps: float, config: StudyConfig, response=None):
    """Mean and RMS deviation (about ``est0``) of the estimate over all trials."""
    d_max = config.d_max
    N = len(clean.grid)
    total = np.zeros(est0.size, dtype=complex)
    sq = np.zeros(est0.size)
    chunk = 512
    for start in range(0, config.trials, chunk):
        stop = min(start + chunk, config.trials)
        z = np.stack([trial_normals(config.seed, t, N) for t in range(start, stop)])
        if response is not None:
            dev = (eps * z) @ response.T
        else:
            dev = []
            for zt in z:
                rec = clean.with_values(clean.values + eps * zt, noise_sigma=eps)
                dev.append(rho_matrix(polar_from_record(rec, 2 * d_max), d_max).ravel() - est0.ravel())
            dev = np.array(dev)
        total += dev.sum(axis=0)
        sq += (np.abs(dev) ** 2).sum(axis=0)
    mean = est0.ravel() + total / config.trials
    sigma = np.sqrt(sq / config.trials)
    return mean.reshape(est0.shape), sigma.reshape(est0.shape)


def noise_study(config: StudyConfig) -> StudyResult:
    """Standard deviation of every estimate versus noise level, with power-law fits.

    For each ``(n, j, k)`` the fit ``log10 sigma = p log10 eps + log10 A`` is
    ordinary least squares.  The per-element constant is
    ``K_jk = max_eps sigma / sigma_bound(j, k, 1, eps)``, the smallest ``K``
    for which :func:`~padua_tomo.estimator.sigma_bound` covers every measured
    cell; ``K_emp`` is its maximum over elements at that ``n``.
    """
    rho = as_density_matrix(config.state)
    ideal = _ideal(rho, config.d_max)
    d = config.d_max + 1
    eps_pos = [e for e in config.epsilons if e > 0]
    rows, fits, kemp = [], [], {}
    for n in config.n_values:
        grid = padua_points(n, config.L)
        N = len(grid)
        clean = sample_state(rho, grid)
        est0 = rho_matrix(polar_from_record(clean, 2 * config.d_max), config.d_max)
        response = _response_matrix(grid, config.d_max) if config.method == "linear" else None
        sig = {}
        for eps in config.epsilons:
            mean, sigma = _noise_cell(clean, est0, eps, config, response)
            sig[eps] = sigma
            for j in range(d):
                for k in range(d):
                    zero = bool(abs(ideal[j, k]) <= ZERO_TOL)
                    err = abs(ideal[j, k] - est0[j, k])
                    rows.append({
                        "n": n, "N": N, "epsilon": eps, "j": j, "k": k,
                        "mean_re": mean[j, k].real, "mean_im": mean[j, k].imag,
                        "sigma": float(sigma[j, k]),
                        "delta_rel": err if zero else err / abs(ideal[j, k]),
                        "absolute_error_flag": zero,
                    })
        k_by_elem = {}
        for j in range(d):
            for k in range(d):
                s = np.array([sig[e][j, k] for e in eps_pos])
                unit = np.array([sigma_bound(j, k, 1.0, e) for e in eps_pos])
                k_jk = float(np.max(s / unit)) if eps_pos else float("nan")
                k_by_elem[(j, k)] = k_jk
                fit = {"n": n, "N": N, "j": j, "k": k, "K_jk": k_jk}
                if len(eps_pos) >= 2 and np.all(s > 0):
                    x, y = np.log10(eps_pos), np.log10(s)
                    p, logA = np.polyfit(x, y, 1)
                    resid = y - (p * x + logA)
                    ss = float(np.sum((y - y.mean()) ** 2))
                    r2 = 1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0
                    fit.update(p=float(p), A=float(10**logA), r2=r2)
                    if r2 < 0.99:
                        warnings.warn(f"power-law fit for rho_{j}{k} at n={n} has R^2 = {r2:.4f} < 0.99", stacklevel=2)
                fits.append(fit)
        kemp[n] = max(k_by_elem.values())
        log.info("noise study n=%d N=%d K_emp=%.3g", n, N, kemp[n])
    summary = {"K_emp": {str(n): v for n, v in kemp.items()}, "sigma_reference": SIGMA_REFERENCE}
    return StudyResult("noise", config.to_dict(), rows, fits, summary)


def threshold_study(config: StudyConfig, probe_resolution: int = 100) -> StudyResult:
    """Padua thresholding versus keeping the same number of largest equidistant samples.

    Errors are max-abs over a ``probe_resolution``-square grid on ``[-L, L]^2``.
    """
    rho = as_density_matrix(config.state)
    s = np.linspace(-config.L, config.L, probe_resolution)
    xx, yy = np.meshgrid(s, s, indexing="ij")
    exact = q_function(rho, xx + 1j * yy)
    rows = []
    summary = {}
    eq = sample_state(rho, equidistant_grid(config.equidistant_rows, config.equidistant_rows, config.L))
    for n in config.n_values:
        rec = sample_state(rho, padua_points(n, config.L))
        full = interpolate_padua(rec)(xx, yy)
        thr = threshold_padua(rec, config.threshold)
        cut = interpolate_padua(thr)(xx, yy)
        eq_thr = threshold_equidistant(eq, thr.nonzero_count)
        eq_cut = interpolate_tensor(eq_thr)(xx, yy)
        row = {
            "n": n,
            "N": len(rec.grid),
            "threshold": config.threshold,
            "surviving_padua": thr.nonzero_count,
            "padua_full_vs_exact": float(np.abs(full - exact).max()),
            "padua_thresholded_vs_full": float(np.abs(cut - full).max()),
            "padua_thresholded_vs_exact": float(np.abs(cut - exact).max()),
            "equidistant_rows": config.equidistant_rows,
            "equidistant_kept": eq_thr.nonzero_count,
            "equidistant_thresholded_vs_exact": float(np.abs(eq_cut - exact).max()),
        }
        rows.append(row)
        summary[str(n)] = row["surviving_padua"]
    return StudyResult("threshold", config.to_dict(), rows, [], {"surviving_padua": summary})


def matched_rows(N: int) -> int:
    """Side of the square equidistant grid whose size is closest to ``N`` (ties: smaller)."""
    r = int(np.floor(np.sqrt(N)))
    return r if N - r * r <= (r + 1) ** 2 - N else r + 1


def equidistant_comparison_study(config: StudyConfig) -> StudyResult:
    """Relative error versus point count for Padua and matched square equidistant grids.

    The equidistant pipeline fits total degree ``rows - 1`` by least squares;
    rows carry ``pipeline`` = ``"padua"`` or ``"equidistant"``.
    """
    rho = as_density_matrix(config.state)
    ideal = _ideal(rho, config.d_max)
    rows = []
    done = set()
    for n in config.n_values:
        N = (n + 1) * (n + 2) // 2
        rows += _error_rows(n, N, _padua_estimate(rho, n, config.L, config.d_max), ideal, pipeline="padua")
        r = matched_rows(N)
        if r - 1 < 2 * config.d_max or r in done:
            continue
        done.add(r)
        rows += _error_rows(r - 1, r * r, _tensor_estimate(rho, r, config.L, config.d_max), ideal,
                            pipeline="equidistant", matched_padua_n=n)
    fits = _decay_fits(rows, config.d_max, pipeline="padua") + _decay_fits(rows, config.d_max, pipeline="equidistant")
    return StudyResult(
        "equidistant",
        config.to_dict(),
        rows,
        fits,
        {"equidistant_method": "least-squares product-Chebyshev fit of total degree rows-1 (no rational preprocessing)"},
    )


STUDIES = {
    "convergence": convergence_study,
    "noise": noise_study,
    "threshold": threshold_study,
    "equidistant": equidistant_comparison_study,
}
