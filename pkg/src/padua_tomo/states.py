"""Truncated-Fock-space states and their exact quasi-probability functions.

These are the ground-truth oracles for every experiment: a state is sampled
through :func:`q_function` or :func:`wigner_function` to simulate a
measurement record.

Conventions: ``alpha = x + i*y`` with ``x`` the horizontal axis, and the
coherent-state overlap is ``<alpha|n> = exp(-|alpha|^2/2) conj(alpha)^n / sqrt(n!)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln

HERMITIAN_ATOL = 1e-12
NORM_ATOL = 1e-12


@dataclass(frozen=True)
class PhasePoint:
    """A point of phase space, ``alpha = re + i*im``."""

    re: float
    im: float

    @property
    def alpha(self) -> complex:
        return complex(self.re, self.im)

    @property
    def r(self) -> float:
        return abs(self.alpha)

    @property
    def theta(self) -> float:
        return float(np.angle(self.alpha))


def _as_alpha(alpha) -> np.ndarray:
    if isinstance(alpha, PhasePoint):
        return np.asarray(alpha.alpha)
    return np.asarray(alpha, dtype=complex)


@dataclass(frozen=True, eq=False)
class FockState:
    """Pure state ``sum_n a_n |n>`` truncated at photon number ``cutoff``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size == 0:
            raise ValueError("a state needs at least one amplitude")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValueError(f"amplitudes are not normalized (sum |a|^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def cutoff(self) -> int:
        return self.amplitudes.size - 1

    @classmethod
    def normalized(cls, amplitudes) -> "FockState":
        amps = np.asarray(amplitudes, dtype=complex)
        return cls(amps / np.sqrt(np.sum(np.abs(amps) ** 2)))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix in the Fock basis ``|0>, ..., |cutoff>``.

    Hermiticity is checked on construction; unit trace is only checked when
    ``physical=True`` because reconstructed estimates need not have it.
    """

    entries: np.ndarray
    physical: bool = True

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"density matrix must be square, got shape {m.shape}")
        if not np.allclose(m, m.conj().T, rtol=0.0, atol=HERMITIAN_ATOL):
            raise ValueError("density matrix is not Hermitian")
        if self.physical and abs(np.trace(m) - 1.0) > NORM_ATOL:
            raise ValueError(f"trace is {np.trace(m).real!r}, expected 1")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def cutoff(self) -> int:
        return self.entries.shape[0] - 1


def test_state() -> FockState:
    """Binomial-code superposition ``((|0> + |4>)/sqrt 2 + i|2>)/sqrt 2``."""
    amps = np.zeros(5, dtype=complex)
    amps[0] = 0.5
    amps[2] = 1j / np.sqrt(2.0)
    amps[4] = 0.5
    return FockState(amps)


# pytest would otherwise try to collect test_state as a test when imported
test_state.__test__ = False


def fock_state(n: int, cutoff: int | None = None) -> FockState:
    cutoff = n if cutoff is None else cutoff
    if not 0 <= n <= cutoff:
        raise ValueError(f"need 0 <= n <= cutoff, got n={n}, cutoff={cutoff}")
    amps = np.zeros(cutoff + 1, dtype=complex)
    amps[n] = 1.0
    return FockState(amps)


def coherent_state(beta: complex, cutoff: int = 30) -> FockState:
    """Coherent state ``|beta>`` truncated at ``cutoff`` and renormalized."""
    amps = [np.conj(coherent_overlap(n, beta)) for n in range(cutoff + 1)]
    return FockState.normalized(amps)


def to_density_matrix(state: FockState) -> DensityMatrix:
    a = state.amplitudes
    return DensityMatrix(np.outer(a, a.conj()))


def as_density_matrix(state: Union[FockState, DensityMatrix]) -> DensityMatrix:
    if isinstance(state, FockState):
        return to_density_matrix(state)
    return state


def coherent_overlap(n, alpha) -> np.ndarray:
    """``<alpha|n>``, vectorized over ``alpha``; factorials go through log-gamma."""
    n = int(n)
    if n < 0:
        raise ValueError("photon number must be non-negative")
    a = _as_alpha(alpha)
    r = np.abs(a)
    if n == 0:
        return np.exp(-(r**2) / 2).astype(complex)
    with np.errstate(divide="ignore"):
        mag = np.exp(-(r**2) / 2 + n * np.log(r) - 0.5 * gammaln(n + 1))
    return mag * np.exp(-1j * n * np.angle(a))


def _overlaps(cutoff: int, alpha) -> np.ndarray:
    a = _as_alpha(alpha)
    return np.stack([coherent_overlap(n, a) for n in range(cutoff + 1)], axis=-1)


def q_function(rho: Union[DensityMatrix, FockState], alpha) -> np.ndarray:
    """Husimi function ``<alpha|rho|alpha> / pi`` at one or many points."""
    rho = as_density_matrix(rho)
    ov = _overlaps(rho.cutoff, alpha)  # <alpha|n>
    val = np.einsum("...j,jk,...k->...", ov, rho.entries, ov.conj()).real / np.pi
    return val if val.ndim else float(val)


def displacement_matrix(beta: complex, cutoff: int) -> np.ndarray:
    """Matrix elements ``<m|D(beta)|n>`` for ``m, n <= cutoff``.

    Built column by column from ``D a^dagger = (a^dagger - conj(beta)) D``,
    starting from the coherent-state column ``<m|D(beta)|0>``; no truncation
    of the operator itself is involved, so every element is exact.
    """
    d = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    d[:, 0] = np.conj(coherent_overlap_column(beta, cutoff))
    sq = np.sqrt(np.arange(cutoff + 1))
    for n in range(cutoff):
        col = -np.conj(beta) * d[:, n]
        col[1:] += sq[1:] * d[:-1, n]
        d[:, n + 1] = col / np.sqrt(n + 1)
    return d


def coherent_overlap_column(beta: complex, cutoff: int) -> np.ndarray:
    return np.array([coherent_overlap(m, beta) for m in range(cutoff + 1)], dtype=complex)


def wigner_function(rho: Union[DensityMatrix, FockState], alpha) -> np.ndarray:
    """Wigner function ``Tr[Pi D(-alpha) rho D(alpha)] / pi``.

    Uses ``D(alpha) Pi D(-alpha) = D(2 alpha) Pi``, so only the finite block
    ``<n|D(2 alpha)|m>`` with ``m, n <= cutoff`` is needed.
    """
    rho = as_density_matrix(rho)
    a = _as_alpha(alpha)
    parity = (-1.0) ** np.arange(rho.cutoff + 1)
    out = np.empty(a.shape, dtype=float)
    for idx, val in np.ndenumerate(a):
        d = displacement_matrix(2 * val, rho.cutoff)
        out[idx] = np.sum(rho.entries * (d.T * parity[:, None])).real / np.pi
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# state-spec JSON


def state_from_spec(spec: dict) -> Union[FockState, DensityMatrix]:
    """Parse ``{"type": "pure", "amplitudes": [[re, im], ...]}`` or ``"mixed"``."""
    kind = spec.get("type")
    if kind == "pure":
        amps = [complex(re, im) for re, im in spec["amplitudes"]]
        return FockState(np.array(amps))
    if kind == "mixed":
        rows = [[complex(re, im) for re, im in row] for row in spec["matrix"]]
        return DensityMatrix(np.array(rows))
    raise ValueError(f"unknown state type {kind!r}")


def state_to_spec(state: Union[FockState, DensityMatrix]) -> dict:
    if isinstance(state, FockState):
        return {"type": "pure", "amplitudes": [[a.real, a.imag] for a in state.amplitudes.tolist()]}
    return {
        "type": "mixed",
        "matrix": [[[z.real, z.imag] for z in row] for row in state.entries.tolist()],
    }
