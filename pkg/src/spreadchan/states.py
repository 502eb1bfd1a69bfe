"""Probe state construction.

Builds the probe families used throughout: vacuum, Fock, coherent, squeezed
vacuum, phase-symmetric cat superpositions, and the thermal mixture.  All
builders return amplitudes in the truncated number basis together with a
leakage diagnostic; ``build_state`` refuses silently unrepresentable states.

A spec string names a state compactly, e.g. ``sq:r=1.2,theta=0`` or
``cat:k=10,nbar=10``.  ``parse`` turns such a string into a StateSpec and
``label`` inverts it for output files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, ParseError, TruncationError
from .fock import (
    LEAKAGE_HARD_LIMIT,
    LEAKAGE_TARGET,
    DensityOperator,
    StateVector,
    check_dim,
)

_KINDS = ("vacuum", "fock", "coherent", "squeezed", "cat", "thermal")

# hard ceiling for automatic dimension growth
DIM_CAP = 4096


@dataclass(frozen=True)
class StateSpec:
    """Declarative description of a probe state.

    kind      one of vacuum|fock|coherent|squeezed|cat|thermal
    n         Fock level (fock)
    beta      complex amplitude (coherent)
    r, theta  squeezing magnitude and phase (squeezed)
    components, nbar, theta   cat: number of coherent components, target
              mean energy, and global phase offset of the component ring
    nbar      mean occupation (thermal, cat)
    """

    kind: str
    n: int = 0
    beta: complex = 0j
    r: float = 0.0
    theta: float = 0.0
    components: int = 2
    nbar: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown state kind {self.kind!r}")
        if self.kind == "fock" and (self.n < 0 or not isinstance(self.n, int)):
            raise DomainError(f"fock level must be a non-negative integer, got {self.n!r}")
        if self.kind == "squeezed" and self.r < 0:
            raise DomainError(f"squeezing magnitude must be >= 0, got {self.r}")
        if self.kind == "cat" and self.components < 1:
            raise DomainError(f"cat needs >= 1 components, got {self.components}")
        if self.kind in ("thermal", "cat") and self.nbar < 0:
            raise DomainError(f"mean occupation must be >= 0, got {self.nbar}")

    @classmethod
    def vacuum(cls) -> "StateSpec":
        return cls(kind="vacuum")

    @classmethod
    def fock(cls, n: int) -> "StateSpec":
        return cls(kind="fock", n=int(n))

    @classmethod
    def coherent(cls, beta: complex) -> "StateSpec":
        return cls(kind="coherent", beta=complex(beta))

    @classmethod
    def squeezed(cls, r: float, theta: float = 0.0) -> "StateSpec":
        return cls(kind="squeezed", r=float(r), theta=float(theta))

    @classmethod
    def cat(cls, components: int, nbar: float, theta: float = 0.0) -> "StateSpec":
        return cls(kind="cat", components=int(components), nbar=float(nbar), theta=float(theta))

    @classmethod
    def thermal(cls, nbar: float) -> "StateSpec":
        return cls(kind="thermal", nbar=float(nbar))

    def label(self) -> str:
        if self.kind == "vacuum":
            return "vacuum"
        if self.kind == "fock":
            return f"fock:n={self.n}"
        if self.kind == "coherent":
            b = self.beta
            return f"coh:beta={b.real:g}{b.imag:+g}i"
        if self.kind == "squeezed":
            return f"sq:r={self.r:g},theta={self.theta:g}"
        if self.kind == "cat":
            return f"cat:k={self.components},nbar={self.nbar:g},theta={self.theta:g}"
        return f"thermal:nbar={self.nbar:g}"

    @property
    def is_mixed(self) -> bool:
        return self.kind == "thermal"


def _parse_fields(body: str, allowed: dict) -> dict:
    out = {}
    for item in body.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ParseError(f"expected key=value, got {item!r}")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in allowed:
            raise ParseError(f"unknown field {key!r} (allowed: {sorted(allowed)})")
        conv = allowed[key]
        try:
            out[key] = conv(raw.strip())
        except ValueError as exc:
            raise ParseError(f"bad value for {key!r}: {raw.strip()!r}") from exc
    return out


def _parse_complex(raw: str) -> complex:
    # accept 1+2i as well as 1+2j
    return complex(raw.replace("i", "j").replace(" ", ""))


def parse(text: str) -> StateSpec:
    """Parse a state spec string.

    Forms: ``vacuum``; ``fock:n=5``; ``coh:beta=1+0i``; ``sq:r=1.0,theta=0``;
    ``cat:k=10,nbar=10,theta=0`` (or ``beta=`` instead of ``nbar=``);
    ``thermal:nbar=5``.  Any malformed or out-of-range field raises
    ParseError, including range violations the constructors would flag.
    """
    try:
        return _parse_spec(text)
    except DomainError as exc:
        raise ParseError(str(exc)) from exc


def _parse_spec(text: str) -> StateSpec:
    text = text.strip()
    head, _, body = text.partition(":")
    head = head.strip().lower()
    if head == "vacuum":
        if body.strip():
            raise ParseError("vacuum takes no fields")
        return StateSpec.vacuum()
    if head == "fock":
        fields = _parse_fields(body, {"n": int})
        if "n" not in fields:
            raise ParseError("fock requires n=")
        return StateSpec.fock(fields["n"])
    if head in ("coh", "coherent"):
        fields = _parse_fields(body, {"beta": _parse_complex})
        if "beta" not in fields:
            raise ParseError("coherent requires beta=")
        return StateSpec.coherent(fields["beta"])
    if head in ("sq", "squeezed"):
        fields = _parse_fields(body, {"r": float, "theta": float})
        if "r" not in fields:
            raise ParseError("squeezed requires r=")
        return StateSpec.squeezed(fields["r"], fields.get("theta", 0.0))
    if head == "cat":
        fields = _parse_fields(body, {"k": int, "nbar": float, "beta": float, "theta": float})
        if "k" not in fields:
            raise ParseError("cat requires k=")
        if "beta" in fields and "nbar" in fields:
            raise ParseError("cat takes nbar= or beta=, not both")
        if "beta" in fields:
            nbar = float(fields["beta"]) ** 2  # exact only for k=1; resolved in build
            return StateSpec(kind="cat", components=fields["k"], nbar=nbar,
                             theta=fields.get("theta", 0.0))
        if "nbar" not in fields:
            raise ParseError("cat requires nbar= (or beta=)")
        return StateSpec.cat(fields["k"], fields["nbar"], fields.get("theta", 0.0))
    if head == "thermal":
        fields = _parse_fields(body, {"nbar": float})
        if "nbar" not in fields:
            raise ParseError("thermal requires nbar=")
        return StateSpec.thermal(fields["nbar"])
    raise ParseError(f"unknown state kind {head!r}")


# ----------------------------------------------------------------------
# amplitude builders
# ----------------------------------------------------------------------

def _coherent_amplitudes(beta: complex, dim: int) -> np.ndarray:
    # c_n = e^{-|b|^2/2} b^n / sqrt(n!), by the stable ratio recurrence
    amps = np.zeros(dim, dtype=np.complex128)
    amps[0] = math.exp(-0.5 * abs(beta) ** 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * beta / math.sqrt(n)
    return amps


def _squeezed_amplitudes(r: float, theta: float, dim: int) -> np.ndarray:
    # even levels only: c_2m = c_{2m-2} (-e^{i theta} tanh r) sqrt((2m-1)/(2m))
    amps = np.zeros(dim, dtype=np.complex128)
    amps[0] = 1.0 / math.sqrt(math.cosh(r))
    step = -np.exp(1j * theta) * math.tanh(r)
    for m in range(1, (dim - 1) // 2 + 1):
        amps[2 * m] = amps[2 * m - 2] * step * math.sqrt((2 * m - 1) / (2 * m))
    return amps


def _cat_amplitudes(components: int, beta_mag: float, theta: float, dim: int) -> np.ndarray:
    # normalized sum of k coherent states at phases 2 pi j / k + theta
    acc = np.zeros(dim, dtype=np.complex128)
    for j in range(1, components + 1):
        phase = 2.0 * math.pi * j / components + theta
        acc += _coherent_amplitudes(beta_mag * np.exp(1j * phase), dim)
    norm = np.linalg.norm(acc)
    if norm == 0.0:  # pragma: no cover - cannot happen for beta_mag > 0
        raise DomainError("cat amplitudes vanished")
    return acc / norm


def _cat_mean_energy(components: int, beta_mag: float, dim: int) -> float:
    amps = _cat_amplitudes(components, beta_mag, 0.0, dim)
    ns = np.arange(dim)
    return float(np.sum(ns * np.abs(amps) ** 2))


def cat_amplitude_for_energy(components: int, nbar: float, dim: Optional[int] = None) -> float:
    """Component amplitude |beta| giving the cat mean energy ``nbar``.

    The cat energy |beta|^2 (1 + interference term) is strictly increasing
    in |beta|, so plain bisection converges; for k=1 it is exactly
    sqrt(nbar).
    """
    if nbar < 0:
        raise DomainError(f"mean occupation must be >= 0, got {nbar}")
    if nbar == 0.0:
        return 0.0
    if components == 1:
        return math.sqrt(nbar)
    if dim is None:
        dim = max(64, int(math.ceil(4 * (nbar + 3 * math.sqrt(nbar + 1)) + 20)))
    lo, hi = 0.0, math.sqrt(nbar) + 1.0
    while _cat_mean_energy(components, hi, dim) < nbar:
        hi *= 2.0
        if hi > 1e4:  # pragma: no cover
            raise DomainError("cat energy bracketing failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _cat_mean_energy(components, mid, dim) < nbar:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def mean_energy(spec: StateSpec) -> float:
    """Mean occupation <n> of the specified state (exact, no truncation)."""
    if spec.kind == "vacuum":
        return 0.0
    if spec.kind == "fock":
        return float(spec.n)
    if spec.kind == "coherent":
        return abs(spec.beta) ** 2
    if spec.kind == "squeezed":
        return math.sinh(spec.r) ** 2
    # cat and thermal both carry their energy directly
    return float(spec.nbar)


def auto_dim(spec: StateSpec, alpha_max: float = 0.0) -> int:
    """Pick a truncation dimension for a state and displacement range.

    Starts from a floor that scales with the total energy budget and grows
    it geometrically until the built state parks less than 1e-10 of its
    population in the top two levels.  Squeezed tails decay slowly
    (populations ~ tanh(r)^{2m}), so the growth loop does real work there.
    """
    nbar = mean_energy(spec)
    budget = nbar + alpha_max ** 2
    dim = int(math.ceil(4.0 * (budget + 3.0 * math.sqrt(budget + 1.0)) + 20.0))
    dim = max(dim, 16)
    while dim <= DIM_CAP:
        sv = build_state(spec, dim, on_leakage="ignore")
        if sv.leakage < LEAKAGE_TARGET:
            return dim
        dim = int(math.ceil(dim * 1.4))
    raise TruncationError(
        f"state {spec.label()} still leaks above {LEAKAGE_TARGET} at dim {DIM_CAP}")


def build_state(spec: StateSpec, dim: int, on_leakage: str = "raise"):
    """Materialize a StateSpec at a given truncation dimension.

    Returns a StateVector for pure kinds and a DensityOperator for thermal.
    With on_leakage="raise" (default), refuses states whose top-two-level
    population exceeds 1e-6; "ignore" returns them anyway so callers can
    probe convergence.
    """
    dim = check_dim(dim)
    if on_leakage not in ("raise", "ignore"):
        raise DomainError(f"on_leakage must be 'raise' or 'ignore', got {on_leakage!r}")

    if spec.kind == "vacuum":
        amps = np.zeros(dim, dtype=np.complex128)
        amps[0] = 1.0
        state = StateVector(amps)
    elif spec.kind == "fock":
        if spec.n >= dim:
            raise TruncationError(f"fock level {spec.n} does not fit in dim {dim}")
        amps = np.zeros(dim, dtype=np.complex128)
        amps[spec.n] = 1.0
        state = StateVector(amps)
    elif spec.kind == "coherent":
        state = StateVector(_coherent_amplitudes(spec.beta, dim))
    elif spec.kind == "squeezed":
        state = StateVector(_squeezed_amplitudes(spec.r, spec.theta, dim))
    elif spec.kind == "cat":
        beta_mag = cat_amplitude_for_energy(spec.components, spec.nbar, dim)
        if beta_mag == 0.0:
            amps = np.zeros(dim, dtype=np.complex128)
            amps[0] = 1.0
            state = StateVector(amps)
        else:
            state = StateVector(_cat_amplitudes(spec.components, beta_mag, spec.theta, dim))
    else:  # thermal
        ns = np.arange(dim, dtype=np.float64)
        if spec.nbar == 0.0:
            probs = np.zeros(dim)
            probs[0] = 1.0
        else:
            # geometric weights, renormalized over the kept levels
            log_p = ns * math.log(spec.nbar) - (ns + 1.0) * math.log(1.0 + spec.nbar)
            probs = np.exp(log_p - log_p.max())
            probs /= probs.sum()
        state = DensityOperator(np.diag(probs.astype(np.complex128)))

    if on_leakage == "raise" and state.leakage > LEAKAGE_HARD_LIMIT:
        raise TruncationError(
            f"state {spec.label()} leaks {state.leakage:.3e} at dim {dim}; "
            f"increase the dimension")
    return state
