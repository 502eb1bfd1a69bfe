"""Measurement models: probe survival probability and homodyne readout.

The primary detector answers one binary question per shot: did the probe
survive the channel unchanged?  Outcome 0 ("yes") fires with probability

    p0(alpha) = E_phi[ |<psi| D(alpha, phi) |psi>|^2 ],

the phase-averaged survival probability of the probe.  For the standard
probe families this average has closed forms, which the numeric route must
reproduce; both are kept and cross-checked in the tests.

Dark noise replaces each shot's outcome with a fair coin toss with
probability eps, so p0 maps to (1 - eps) p0 + eps/2.

The quadrature model instead measures position x after the channel; its
density is a phase-averaged mixture of shifted probe densities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .channel import PhaseDistribution, displaced_overlaps
from .errors import DomainError, QuadratureError, ShapeError
from .fock import StateVector, bessel_I0e, laguerre, position_amplitude
from .states import StateSpec, auto_dim, build_state, mean_energy


@dataclass(frozen=True)
class MeasurementModel:
    """Detector description: which readout runs, on what, with how much noise.

    kind "self_projection" is the binary does-the-probe-survive question
    and wants the probe spec; kind "quadrature" is the position readout and
    wants an x grid.  eps is the dark-noise rate in either case.
    """

    kind: str = "self_projection"
    probe: Optional[StateSpec] = None
    x_grid: Optional[np.ndarray] = None
    eps: float = 0.0

    def __post_init__(self):
        if self.kind not in ("self_projection", "quadrature"):
            raise DomainError(f"unknown measurement kind {self.kind!r}")
        if not 0.0 <= self.eps <= 1.0:
            raise DomainError(f"dark-noise rate must lie in [0, 1], got {self.eps}")


def apply_dark_noise(p0, eps: float):
    """With probability eps the detector reports a fair coin instead of the
    true outcome.  Returns the pair (p0', p1') with p0' = (1-eps) p0 + eps/2
    and p1' = 1 - p0'; accepts a scalar or an array."""
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"dark-noise rate must lie in [0, 1], got {eps}")
    p0 = np.asarray(p0, dtype=np.float64)
    out = (1.0 - eps) * p0 + 0.5 * eps
    if out.ndim:
        return out, 1.0 - out
    return float(out), float(1.0 - out)


# ----------------------------------------------------------------------
# survival probability, numeric route
# ----------------------------------------------------------------------

def _resolve_pure(probe, alpha_max: float) -> StateVector:
    # accept a prebuilt vector as-is; a spec picks its own truncation from
    # the largest displacement it must survive, and the build refuses to
    # hand back a leaking state
    if isinstance(probe, StateVector):
        return probe
    if isinstance(probe, StateSpec):
        psi = build_state(probe, auto_dim(probe, alpha_max))
        if not isinstance(psi, StateVector):
            raise DomainError("this readout needs a pure probe")
        return psi
    raise ShapeError(f"expected a StateVector or StateSpec, got {type(probe)!r}")


def p0_numeric(probe, alphas, phases: PhaseDistribution,
               nodes: Optional[int] = None) -> np.ndarray:
    """Phase-averaged survival probability from the overlap table.

    ``probe`` may be a StateVector or a StateSpec.  Exact for any probe
    once the node count exceeds the trigonometric bandwidth of
    |<psi|D|psi>|^2, hence the 2*dim + margin default.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    psi = _resolve_pure(probe, float(alphas.max()) if alphas.size else 0.0)
    if nodes is None:
        nodes = max(64, 2 * psi.dim + 129)
    phis, ws = phases.nodes_and_weights(nodes)
    table = displaced_overlaps(psi, alphas, phis)
    return np.abs(table) ** 2 @ ws


def p0_fixed_phase_numeric(probe, alphas, phi: float) -> np.ndarray:
    """Survival probability at a single known displacement direction."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    psi = _resolve_pure(probe, float(alphas.max()) if alphas.size else 0.0)
    table = displaced_overlaps(psi, alphas, np.array([phi]))
    return np.abs(table[:, 0]) ** 2


# ----------------------------------------------------------------------
# survival probability, closed forms
# ----------------------------------------------------------------------

def p0_vacuum_closed(alphas) -> np.ndarray:
    """Vacuum (and any coherent) probe: p0 = e^{-alpha^2}, any phase law."""
    alphas = np.asarray(alphas, dtype=np.float64)
    return np.exp(-alphas ** 2)


def p0_fock_closed(alphas, n: int) -> np.ndarray:
    """Fock probe |n>: p0 = e^{-alpha^2} L_n(alpha^2)^2, any phase law."""
    alphas = np.asarray(alphas, dtype=np.float64)
    q = alphas ** 2
    return np.exp(-q) * laguerre(n, q) ** 2


def p0_squeezed_closed(alphas, r: float) -> np.ndarray:
    """Squeezed vacuum under the uniform phase law:
    p0 = e^{-alpha^2 cosh 2r} I0(alpha^2 sinh 2r).

    Evaluated as I0e(q sinh 2r) * exp(-q e^{-2r}) with q = alpha^2, which
    survives arguments far beyond the overflow point of I0 itself.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    q = alphas ** 2
    s = math.sinh(2.0 * r)
    decay = math.exp(-2.0 * r)
    return np.array([bessel_I0e(qi * s) * math.exp(-qi * decay) for qi in q])


def p0_squeezed_fixed_phase_closed(alphas, r: float, theta: float, phi: float) -> np.ndarray:
    """Squeezed vacuum probed along a single direction phi:
    p0 = exp(-alpha^2 (cosh 2r + sinh 2r cos(2 phi - theta)))."""
    alphas = np.asarray(alphas, dtype=np.float64)
    gamma = math.cosh(2.0 * r) + math.sinh(2.0 * r) * math.cos(2.0 * phi - theta)
    return np.exp(-alphas ** 2 * gamma)


def p0_function(spec: StateSpec, phases: PhaseDistribution,
                dim: Optional[int] = None,
                fixed_phi: Optional[float] = None) -> Tuple[Callable, dict]:
    """Survival-probability curve for a probe spec.

    Returns (f, meta) where f maps an array of alphas to p0 values and meta
    records which route was taken and whether the curve is strictly
    decreasing in alpha (needed by the monotone estimator).  Closed forms
    are preferred; probes without one fall back to the numeric overlap
    table, which then requires ``dim``.
    """
    if fixed_phi is not None:
        if spec.kind in ("vacuum", "coherent"):
            return p0_vacuum_closed, {"route": "closed", "monotone": True}
        if spec.kind == "fock":
            return (lambda al: p0_fock_closed(al, spec.n)), {"route": "closed", "monotone": spec.n == 0}
        if spec.kind == "squeezed":
            r, theta, phi = spec.r, spec.theta, fixed_phi
            return (lambda al: p0_squeezed_fixed_phase_closed(al, r, theta, phi)), \
                {"route": "closed", "monotone": True}
        if dim is None:
            raise DomainError(f"no closed survival curve for {spec.label()}; pass dim")
        psi = build_state(spec, dim)
        if not isinstance(psi, StateVector):
            raise DomainError("survival readout needs a pure probe")
        phi = fixed_phi
        return (lambda al: p0_fixed_phase_numeric(psi, al, phi)), \
            {"route": "numeric", "monotone": False}

    # displacement phase symmetry: a coherent/vacuum/fock probe sees every
    # direction identically, so the phase law drops out
    if spec.kind in ("vacuum", "coherent"):
        return p0_vacuum_closed, {"route": "closed", "monotone": True}
    if spec.kind == "fock":
        return (lambda al: p0_fock_closed(al, spec.n)), {"route": "closed", "monotone": spec.n == 0}
    if spec.kind == "squeezed" and phases.kind == "uniform":
        r = spec.r
        return (lambda al: p0_squeezed_closed(al, r)), {"route": "closed", "monotone": True}
    if spec.kind == "squeezed":
        # mixture of the fixed-direction exponentials over the phase law;
        # every component decreases in alpha, so the mixture does too
        phis, ws = phases.nodes_and_weights(512)
        gammas = (math.cosh(2.0 * spec.r)
                  + math.sinh(2.0 * spec.r) * np.cos(2.0 * phis - spec.theta))

        def mixture(al, gammas=gammas, ws=ws):
            al = np.atleast_1d(np.asarray(al, dtype=np.float64))
            return np.exp(-np.outer(al ** 2, gammas)) @ ws

        return mixture, {"route": "closed-mixture", "monotone": True}
    if dim is None:
        raise DomainError(f"no closed survival curve for {spec.label()} under "
                          f"{phases.label()}; pass dim")
    psi = build_state(spec, dim)
    if not isinstance(psi, StateVector):
        raise DomainError("survival readout needs a pure probe")
    # any fixed-direction squeezed curve is exp(-gamma(phi) alpha^2) with
    # gamma > 0, so every mixture over phi stays strictly decreasing
    monotone = spec.kind == "squeezed"
    return (lambda al: p0_numeric(psi, al, phases)), {"route": "numeric", "monotone": monotone}


# ----------------------------------------------------------------------
# homodyne (position quadrature) readout
# ----------------------------------------------------------------------

def default_x_grid(spec: StateSpec, alpha_max: float = 0.0,
                   points: int = 4001) -> np.ndarray:
    """Uniform position grid wide enough for the displaced probe.

    Half-width covers the probe's own spread (e^r for a squeezed probe's
    anti-squeezed axis, sqrt(2 nbar + 1) otherwise) plus the shift
    sqrt(2) alpha, with generous margin; the density decays like a
    Gaussian beyond, so trapezoid sums on this grid are spectrally
    accurate.
    """
    if spec.kind == "squeezed":
        spread = math.exp(spec.r)
    else:
        spread = math.sqrt(2.0 * mean_energy(spec) + 1.0)
    half = 8.0 * max(1.0, spread) + math.sqrt(2.0) * alpha_max
    return np.linspace(-half, half, points)


def quadrature_density(probe, alpha: float, phases: PhaseDistribution,
                       xs: Optional[np.ndarray] = None, nodes: int = 256) -> np.ndarray:
    """Position density after the channel.

    ``probe`` may be a StateVector or a StateSpec; a spec with no grid gets
    the default one.  The exact x marginal after D(alpha, phi) is
    f(x - sqrt(2) alpha cos phi) with f the probe's own density (the
    momentum kick of the displacement drops out of the marginal), so the
    channel output density is the phase average of shifted copies.  The
    result must integrate to one on the grid; a drift beyond 1e-6 means
    the grid is too narrow or too coarse and raises.
    """
    if alpha < 0:
        raise DomainError(f"displacement magnitude must be >= 0, got {alpha}")
    if xs is None:
        if not isinstance(probe, StateSpec):
            raise DomainError("pass an x grid (default_x_grid builds one)")
        xs = default_x_grid(probe, alpha)
    psi = _resolve_pure(probe, alpha)
    xs = np.asarray(xs, dtype=np.float64)
    phis, ws = phases.nodes_and_weights(nodes)
    shifts = math.sqrt(2.0) * alpha * np.cos(phis)
    # one flattened recurrence over all (node, x) pairs beats a per-node loop
    grid = xs[None, :] - shifts[:, None]
    amp = position_amplitude(psi, grid.ravel()).reshape(grid.shape)
    dens = ws @ (np.abs(amp) ** 2)
    total = float(np.trapezoid(dens, xs))
    if abs(total - 1.0) > 1e-6:
        raise QuadratureError(
            f"position density integrates to {total:.8f}; "
            "the x grid is too narrow or too coarse")
    return dens


@dataclass(frozen=True)
class QuadratureMoments:
    """Moments of the squared readout A = x^2 mapped to an alpha estimate:
    mean_a and var_a are the statistic's mean and its expected conditional
    (per-direction) variance; var_estimate is the resulting single-shot
    variance of the alpha estimate obtained by subtracting the known probe
    variance and dividing through the sensitivity (meaningless at
    alpha = 0, hence None)."""

    mean_a: float
    var_a: float
    var_estimate: Optional[float]


def quadrature_moments_closed(r: float, alpha: float) -> QuadratureMoments:
    """Closed moments of A = x^2 for a squeezed probe (theta = 0).

    With sigma^2 = e^{-2r}/2 the conditional mean at direction phi is
    2 alpha^2 cos^2 phi + sigma^2; averaging gives mean A = alpha^2 +
    sigma^2 and conditional variance E_phi[Var(A|phi)] =
    2 sigma^2 (2 alpha^2 + sigma^2) = e^{-2r}(2 alpha^2 + e^{-2r}/2).
    The alpha^2 estimator A - sigma^2 then carries variance var_a, and the
    alpha estimate inherits var_estimate = var_a / (2 alpha)^2.  The
    spread of the conditional mean across directions (alpha^4/2) is left
    out on purpose: it is the phase-mixture contribution, not readout
    noise, and the known-direction error floor is the quantity of
    interest.
    """
    if r < 0:
        raise DomainError(f"squeezing magnitude must be >= 0, got {r}")
    if alpha < 0:
        raise DomainError(f"displacement magnitude must be >= 0, got {alpha}")
    sigma2 = 0.5 * math.exp(-2.0 * r)
    mean_a = alpha ** 2 + sigma2
    var_a = 2.0 * sigma2 * (2.0 * alpha ** 2 + sigma2)
    if alpha == 0.0:
        return QuadratureMoments(mean_a=mean_a, var_a=var_a, var_estimate=None)
    var_estimate = var_a / (4.0 * alpha ** 2)
    return QuadratureMoments(mean_a=mean_a, var_a=var_a, var_estimate=var_estimate)
