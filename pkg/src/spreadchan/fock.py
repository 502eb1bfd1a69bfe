"""Truncated Fock-space numerics.

Everything downstream works in the number basis {|0>, ..., |dim-1>} of a
harmonic oscillator truncated at ``dim`` levels.  The annihilation operator
acts as a|n> = sqrt(n)|n-1>, so as a matrix a[n-1, n] = sqrt(n); creation is
its conjugate transpose.  Truncation is only trustworthy while the top of
the ladder stays unpopulated, so states carry a leakage diagnostic: the
population of the top two levels.

The special functions used by the closed-form expressions (modified Bessel
I0, Laguerre polynomials, Hermite position amplitudes) are implemented here
with plain series/recurrences rather than pulled from a library, so the
package carries its own oracle layer for the physics formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as la

from .errors import DimensionError, DomainError, NumericError, ShapeError

# Population of the top two Fock levels counts as leakage.
LEAKAGE_LEVELS = 2

# build_state refuses states that park more than this above the truncation edge
LEAKAGE_HARD_LIMIT = 1e-6

# target used by automatic dimension selection
LEAKAGE_TARGET = 1e-10


def check_dim(dim) -> int:
    """Validate a Fock-space dimension (integer, at least 2)."""
    if not isinstance(dim, (int, np.integer)) or isinstance(dim, bool):
        raise DimensionError(f"dimension must be an integer, got {dim!r}")
    if dim < 2:
        raise DimensionError(f"dimension must be >= 2, got {dim}")
    return int(dim)


@lru_cache(maxsize=32)
def make_ladder(dim: int):
    """Annihilation/creation pair (a, adag) for the truncated space.

    a[n-1, n] = sqrt(n); [a, adag] = I exactly on levels 0..dim-2 and fails
    only in the last diagonal entry, which is the price of truncation.
    """
    dim = check_dim(dim)
    a = np.zeros((dim, dim), dtype=np.complex128)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    adag = a.conj().T
    a.setflags(write=False)
    adag.setflags(write=False)
    return a, adag


@lru_cache(maxsize=32)
def number_op(dim: int) -> np.ndarray:
    """Diagonal number operator n = adag a."""
    dim = check_dim(dim)
    n = np.diag(np.arange(dim, dtype=np.complex128))
    n.setflags(write=False)
    return n


def _leakage_from_populations(populations: np.ndarray) -> float:
    return float(np.real(np.sum(populations[-LEAKAGE_LEVELS:])))


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state in the truncated number basis.

    amplitudes are stored read-only; ``leakage`` is the population of the
    top two levels and should stay tiny for any result to be meaningful.
    """

    amplitudes: np.ndarray
    leakage: float = field(default=0.0)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1:
            raise ShapeError(f"state vector must be 1-d, got shape {amps.shape}")
        check_dim(amps.shape[0])
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or norm == 0.0:
            raise NumericError("state vector has zero or non-finite norm")
        amps = amps / norm
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "leakage", _leakage_from_populations(np.abs(amps) ** 2))

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive (up to -1e-10) operator."""

    matrix: np.ndarray
    leakage: float = field(default=0.0)

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=np.complex128)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ShapeError(f"density operator must be square, got shape {rho.shape}")
        check_dim(rho.shape[0])
        if not np.all(np.isfinite(rho)):
            raise NumericError("density operator has non-finite entries")
        herm = np.linalg.norm(rho - rho.conj().T) / max(1.0, np.linalg.norm(rho))
        if herm > 1e-10:
            raise DomainError(f"density operator is not Hermitian (defect {herm:.2e})")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-8:
            raise DomainError(f"density operator trace is {tr}, expected 1")
        rho = rho / tr
        lam_min = float(np.linalg.eigvalsh(rho)[0])
        if lam_min < -1e-10:
            raise DomainError(f"density operator has negative eigenvalue {lam_min:.2e}")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)
        object.__setattr__(self, "leakage", _leakage_from_populations(np.diag(rho).real))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def populations(self) -> np.ndarray:
        return np.diag(self.matrix).real


def overlap(psi: StateVector, chi: StateVector) -> complex:
    """Inner product <psi|chi> (complex)."""
    if psi.dim != chi.dim:
        raise ShapeError(f"dimension mismatch {psi.dim} vs {chi.dim}")
    return complex(np.vdot(psi.amplitudes, chi.amplitudes))


def fidelity_pure(psi: StateVector, chi: StateVector) -> float:
    """|<psi|chi>|^2."""
    return abs(overlap(psi, chi)) ** 2


def expectation(op: np.ndarray, psi: StateVector) -> complex:
    """<psi|op|psi>."""
    if op.shape != (psi.dim, psi.dim):
        raise ShapeError(f"operator shape {op.shape} does not match state dim {psi.dim}")
    return complex(np.vdot(psi.amplitudes, op @ psi.amplitudes))


def mat_exp(op: np.ndarray) -> np.ndarray:
    """Matrix exponential of a dense operator.

    Thin wrapper around scaling-and-squaring; validates the result is
    finite.  Unitarity of exp(iH) for Hermitian H is checked by the tests,
    not here, because general inputs need not be anti-Hermitian.
    """
    op = np.asarray(op, dtype=np.complex128)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ShapeError(f"matrix exponential needs a square matrix, got {op.shape}")
    out = la.expm(op)
    if not np.all(np.isfinite(out)):
        raise NumericError("matrix exponential produced non-finite entries")
    return out


# ----------------------------------------------------------------------
# special functions
# ----------------------------------------------------------------------

# Above the switch point the direct power series needs many terms and the
# asymptotic series is already converged to machine precision.
_I0_SERIES_MAX = 40.0


def _i0_series(x: float) -> float:
    # sum_k (x/2)^{2k} / (k!)^2 ; all terms positive, no cancellation
    q = 0.25 * x * x
    term = 1.0
    total = 1.0
    k = 0
    while term > 1e-18 * total:
        k += 1
        term *= q / (k * k)
        total += term
        if k > 1000:  # pragma: no cover - series converges long before this
            raise NumericError("I0 series failed to converge")
    return total


def _i0e_asymptotic(x: float) -> float:
    # e^{-x} I0(x) ~ (2 pi x)^{-1/2} sum_k ((2k-1)!!)^2 / (k! (8x)^k)
    total = 1.0
    term = 1.0
    for k in range(1, 60):
        term *= (2 * k - 1) ** 2 / (8.0 * x * k)
        total += term
        if term < 1e-17 * total:
            break
    return total / math.sqrt(2.0 * math.pi * x)


def bessel_I0(x: float) -> float:
    """Modified Bessel function of the first kind, order zero, x >= 0.

    Power series below x=40, asymptotic expansion above; relative error is
    below 1e-12 throughout the representable range.  Overflows to inf near
    x ~ 713 like e^x does.
    """
    x = float(x)
    if x < 0:
        raise DomainError(f"bessel_I0 requires x >= 0, got {x}")
    if x <= _I0_SERIES_MAX:
        return _i0_series(x)
    scaled = _i0e_asymptotic(x)
    if x > 709.0:
        # e^x alone overflows; keep the float semantics explicit
        return math.inf
    return scaled * math.exp(x)


def bessel_I0e(x: float) -> float:
    """Exponentially scaled Bessel: e^{-x} I0(x).  Never overflows."""
    x = float(x)
    if x < 0:
        raise DomainError(f"bessel_I0e requires x >= 0, got {x}")
    if x <= _I0_SERIES_MAX:
        return _i0_series(x) * math.exp(-x)
    return _i0e_asymptotic(x)


def laguerre(n: int, x):
    """Laguerre polynomial L_n(x) by the three-term recurrence.

    (k+1) L_{k+1}(x) = (2k+1-x) L_k(x) - k L_{k-1}(x), L_0 = 1, L_1 = 1-x.
    Accepts scalars or arrays in x.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 0:
        raise DomainError(f"laguerre order must be a non-negative integer, got {n!r}")
    x = np.asarray(x, dtype=np.float64)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return cur if cur.ndim else float(cur)


def hermite_position_amplitude(n: int, x):
    """Position amplitude <x|n> of the n-th number state.

    psi_0(x) = pi^{-1/4} e^{-x^2/2} and
    psi_n(x) = x sqrt(2/n) psi_{n-1}(x) - sqrt((n-1)/n) psi_{n-2}(x),
    in the convention x = (a + adag)/sqrt(2).  The recurrence is carried in
    the normalized functions, which keeps it stable for the level range
    used here.  Accepts scalars or arrays in x.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 0:
        raise DomainError(f"hermite level must be a non-negative integer, got {n!r}")
    x = np.asarray(x, dtype=np.float64)
    psi_prev = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n == 0:
        return psi_prev if psi_prev.ndim else float(psi_prev)
    psi_cur = math.sqrt(2.0) * x * psi_prev
    for k in range(2, n + 1):
        psi_prev, psi_cur = psi_cur, x * math.sqrt(2.0 / k) * psi_cur - math.sqrt((k - 1) / k) * psi_prev
    return psi_cur if psi_cur.ndim else float(psi_cur)


def position_amplitude(psi: StateVector, x) -> np.ndarray:
    """Wavefunction <x|psi> = sum_n c_n psi_n(x), accumulated level by level.

    Runs the same stable recurrence as hermite_position_amplitude once for
    all levels instead of per level.
    """
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    amps = psi.amplitudes
    psi_prev = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    acc = amps[0] * psi_prev.astype(np.complex128)
    if psi.dim == 1:  # pragma: no cover - dim >= 2 enforced upstream
        return acc
    psi_cur = math.sqrt(2.0) * x * psi_prev
    acc += amps[1] * psi_cur
    for k in range(2, psi.dim):
        psi_prev, psi_cur = psi_cur, x * math.sqrt(2.0 / k) * psi_cur - math.sqrt((k - 1) / k) * psi_prev
        if amps[k] != 0.0:
            acc += amps[k] * psi_cur
    return acc
