"""Quantum and classical Fisher information for the magnitude parameter.

Conventions.  For a pure probe displaced along a known direction phi the
family |psi_alpha> = exp(i alpha G(phi)) |psi> has quantum Fisher
information F = 4 Var_psi G(phi); when the direction is random the relevant
benchmark is the phase-averaged F, which for any probe is bounded by
8 (nbar + 1/2) and attains the bound whenever <a> = 0.

Mixed families (the channel output itself, thermal probes) go through the
symmetric logarithmic derivative: F = 2 sum |<j|d rho|k>|^2 / (l_j + l_k)
over eigenpairs with l_j + l_k above a cutoff.

Classical Fisher information of a detection scheme uses the same central
difference in alpha applied to the outcome distribution.  Every route
returns a FisherReport carrying the value plus the knobs that produced it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .channel import PhaseDistribution
from .errors import DegenerateFamilyError, DomainError, QuadratureError, ShapeError
from .fock import DensityOperator, StateVector, expectation, make_ladder
from .measurement import (apply_dark_noise, default_x_grid, p0_function,
                          quadrature_density)
from .states import StateSpec, auto_dim, build_state


@dataclass(frozen=True)
class FisherReport:
    """Numeric Fisher estimate plus the settings that produced it.

    method says which engine ran; povm names the measurement for the
    classical routes; the remaining fields record the derivative step, the
    SLD spectrum cutoff with the number of eigenpairs it dropped, and the
    truncation leakage of the state the value was computed from, whenever
    those apply.
    """

    value: float
    method: str
    derivative_step: Optional[float] = None
    sld_spectrum_cutoff: Optional[float] = None
    excluded_terms: int = 0
    leakage: Optional[float] = None
    povm: Optional[str] = None


def qfi_bound(nbar: float) -> float:
    """Energy ceiling 8 (nbar + 1/2) on the phase-averaged information."""
    if nbar < 0:
        raise DomainError(f"mean occupation must be >= 0, got {nbar}")
    return 8.0 * (nbar + 0.5)


def qfi_pure(psi: StateVector, G: np.ndarray) -> FisherReport:
    """4 Var_psi(G) for the pure family exp(i alpha G)|psi>.

    G must be Hermitian; <G^2> is taken as ||G psi||^2 so a single product
    suffices.
    """
    if not isinstance(psi, StateVector):
        raise ShapeError("pure-state information needs a StateVector probe")
    G = np.asarray(G, dtype=np.complex128)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ShapeError(f"generator must be square, got shape {G.shape}")
    if G.shape[0] != psi.dim:
        raise ShapeError(f"generator dim {G.shape[0]} != state dim {psi.dim}")
    scale = max(1.0, float(np.max(np.abs(G))))
    if float(np.max(np.abs(G - G.conj().T))) > 1e-10 * scale:
        raise DomainError("generator must be Hermitian")
    w = G @ psi.amplitudes
    g1 = float(np.real(np.vdot(psi.amplitudes, w)))
    g2 = float(np.real(np.vdot(w, w)))
    return FisherReport(value=4.0 * (g2 - g1 * g1), method="pure_variance",
                        leakage=psi.leakage)


def _moment_variance(psi: StateVector, phi):
    # Var G(phi) = -2 Re(e^{2 i phi} <adag^2>) + 2 <n> + 1
    #              - 4 Im(e^{i phi} <adag>)^2
    a, adag = make_ladder(psi.dim)
    a1 = expectation(adag, psi)
    a2 = expectation(adag @ adag, psi)
    nbar = expectation(adag @ a, psi).real
    phi = np.asarray(phi, dtype=np.float64)
    var = (-2.0 * np.real(np.exp(2j * phi) * a2) + 2.0 * nbar + 1.0
           - 4.0 * np.imag(np.exp(1j * phi) * a1) ** 2)
    return var, a1, nbar


def avg_qfi(psi: StateVector, alpha: float, phases: PhaseDistribution,
            nodes: int = 512) -> FisherReport:
    """Phase-averaged quantum Fisher information E_phi[4 Var G(phi)].

    The displacement leaves the variance of its own generator untouched,
    so the value does not depend on alpha; the argument is kept for
    signature symmetry with the mixed-state route and only validated.
    Needs just three moments of the probe.  Under the uniform law the
    oscillating moments average out exactly and the result collapses to
    8 (nbar + 1/2) - 8 |<a>|^2.
    """
    if not isinstance(psi, StateVector):
        raise ShapeError("phase-averaged information is defined here for pure probes")
    if alpha < 0:
        raise DomainError(f"magnitude must be >= 0, got {alpha}")
    if phases.kind == "uniform":
        _, a1, nbar = _moment_variance(psi, 0.0)
        value = 8.0 * (nbar + 0.5) - 8.0 * abs(a1) ** 2
    else:
        phis, ws = phases.nodes_and_weights(nodes)
        var, _, _ = _moment_variance(psi, phis)
        value = float(4.0 * np.dot(ws, var))
    return FisherReport(value=value, method="pure_variance", leakage=psi.leakage)


def _default_step(alpha: float) -> float:
    # relative step with an absolute floor, clipped so alpha - h stays
    # well inside the domain
    return min(max(1e-6, 1e-3 * alpha), 0.5 * alpha)


def _check_alpha_step(alpha: float, step: Optional[float]) -> float:
    if alpha < 0:
        raise DomainError(f"magnitude must be >= 0, got {alpha}")
    if alpha == 0.0:
        raise DegenerateFamilyError(
            "information about the magnitude vanishes at alpha = 0; "
            "evaluate at alpha > 0")
    h = _default_step(alpha) if step is None else float(step)
    if h <= 0 or h > alpha:
        raise DomainError(f"derivative step must lie in (0, alpha], got {h}")
    return h


def _derivative(f: Callable[[float], np.ndarray], alpha: float, h: float,
                richardson: bool) -> np.ndarray:
    d = (f(alpha + h) - f(alpha - h)) / (2.0 * h)
    if richardson:
        d2 = (f(alpha + 0.5 * h) - f(alpha - 0.5 * h)) / h
        d = (4.0 * d2 - d) / 3.0
    return d


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityOperator):
        return rho.matrix
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {rho.shape}")
    return rho


def qfi_mixed(rho_fn: Callable[[float], "DensityOperator"], alpha: float,
              step: Optional[float] = None, cutoff: float = 1e-12,
              richardson: bool = False) -> FisherReport:
    """Quantum Fisher information of a mixed family alpha -> rho(alpha).

    Central-difference derivative plus the symmetric logarithmic
    derivative sum over eigenpairs of rho(alpha); pairs whose combined
    eigenvalue falls below ``cutoff`` are excluded and counted.  The family
    is treated as defined for alpha >= 0 only, and alpha = 0 is refused:
    the right limit is the meaningful quantity there, so evaluate at a
    small positive alpha instead.  richardson=True spends two extra family
    evaluations to cancel the leading O(h^2) derivative error.
    """
    h = _check_alpha_step(alpha, step)
    rho0 = rho_fn(alpha)
    leakage = rho0.leakage if isinstance(rho0, DensityOperator) else None
    rho0 = _as_matrix(rho0)
    drho = _derivative(lambda a: _as_matrix(rho_fn(a)), alpha, h, richardson)
    lam, U = np.linalg.eigh(rho0)
    mat = U.conj().T @ drho @ U
    denom = lam[:, None] + lam[None, :]
    keep = denom > cutoff
    excluded = int(keep.size - np.count_nonzero(keep))
    if not np.any(keep):
        raise DegenerateFamilyError("every eigenpair fell below the SLD cutoff")
    value = float(2.0 * np.sum(np.abs(mat[keep]) ** 2 / denom[keep]))
    return FisherReport(value=value, method="sld_eigen", derivative_step=h,
                        sld_spectrum_cutoff=cutoff, excluded_terms=excluded,
                        leakage=leakage)


def cfi_discrete(p_fn: Callable[[float], np.ndarray], alpha: float,
                 step: Optional[float] = None, floor: float = 1e-14,
                 richardson: bool = False, povm: str = "discrete") -> FisherReport:
    """Classical Fisher information of a discrete outcome distribution.

    F = sum_i (d p_i / d alpha)^2 / p_i with a central difference;
    outcomes with p_i below ``floor`` are dropped from the sum and counted
    in the report.
    """
    h = _check_alpha_step(alpha, step)
    p0 = np.atleast_1d(np.asarray(p_fn(alpha), dtype=np.float64))

    def probs(a: float) -> np.ndarray:
        return np.atleast_1d(np.asarray(p_fn(a), dtype=np.float64))

    dp = _derivative(probs, alpha, h, richardson)
    keep = p0 > floor
    excluded = int(keep.size - np.count_nonzero(keep))
    value = float(np.sum(dp[keep] ** 2 / p0[keep]))
    return FisherReport(value=value, method="discrete_cfi", derivative_step=h,
                        excluded_terms=excluded, povm=povm)


def noisy_cfi(p0_fn: Callable, eps: float, alpha: float,
              step: Optional[float] = None, richardson: bool = False,
              povm: str = "binary") -> FisherReport:
    """CFI of the yes/no survival readout through dark noise.

    The noisy success probability is q = (1 - eps) p0 + eps/2, so
    F = (1 - eps)^2 (d p0)^2 / (q (1 - q)).  Once eps dominates the signal
    p1(alpha) the numerator keeps its alpha dependence but q(1 - q) pins
    near 1/4 at finite slope, and the value collapses.
    """
    if not 0.0 <= eps <= 1.0:
        raise DomainError(f"dark-noise rate must lie in [0, 1], got {eps}")

    def dist(al: float) -> np.ndarray:
        p = float(np.ravel(np.asarray(p0_fn(al), dtype=np.float64))[0])
        q0, q1 = apply_dark_noise(p, eps)
        return np.array([q0, q1])

    return cfi_discrete(dist, alpha, step=step, richardson=richardson, povm=povm)


def cfi_self_projection(spec: StateSpec, phases: PhaseDistribution, alpha: float,
                        eps: float = 0.0, dim: Optional[int] = None,
                        fixed_phi: Optional[float] = None,
                        step: Optional[float] = None) -> FisherReport:
    """CFI of projecting the channel output back onto the probe itself."""
    f, _ = p0_function(spec, phases, dim=dim, fixed_phi=fixed_phi)
    return noisy_cfi(f, eps, alpha, step=step, povm="self_projection")


def cfi_quadrature(probe, alpha: float, phases: PhaseDistribution,
                   x_grid: Optional[np.ndarray] = None, nodes: int = 256,
                   step: Optional[float] = None, floor: float = 1e-30,
                   check: bool = True) -> FisherReport:
    """CFI of the position readout after the channel.

    ``probe`` may be a StateVector (then pass x_grid) or a StateSpec (the
    default grid is built from it).  Integrates (d_alpha p(x))^2 / p(x) on
    the grid.  With check=True the phase-node count is doubled once and
    the two values compared; a relative drift above 1e-3 raises, since it
    means the phase average had not converged.
    """
    if alpha < 0:
        raise DomainError(f"magnitude must be >= 0, got {alpha}")
    if alpha == 0.0:
        raise DegenerateFamilyError(
            "information about the magnitude vanishes at alpha = 0; "
            "evaluate at alpha > 0")
    if isinstance(probe, StateSpec):
        if x_grid is None:
            x_grid = default_x_grid(probe, alpha)
        psi = build_state(probe, auto_dim(probe, alpha))
        if not isinstance(psi, StateVector):
            raise DomainError("position readout needs a pure probe")
    else:
        psi = probe
        if x_grid is None:
            raise DomainError("pass an x grid (default_x_grid builds one)")
    xs = np.asarray(x_grid, dtype=np.float64)
    h = _check_alpha_step(alpha, step)

    def value_at(node_count: int) -> float:
        p0 = quadrature_density(psi, alpha, phases, xs, nodes=node_count)
        pp = quadrature_density(psi, alpha + h, phases, xs, nodes=node_count)
        pm = quadrature_density(psi, alpha - h, phases, xs, nodes=node_count)
        dp = (pp - pm) / (2.0 * h)
        integrand = np.where(p0 > floor, dp ** 2 / np.maximum(p0, floor), 0.0)
        return float(np.trapezoid(integrand, xs))

    value = value_at(nodes)
    if check:
        refined = value_at(2 * nodes)
        if abs(refined - value) > 1e-3 * max(abs(refined), 1e-12):
            raise QuadratureError(
                f"position CFI not converged in the phase average: "
                f"{value:.6g} vs {refined:.6g} after doubling nodes")
        value = refined
    return FisherReport(value=value, method="quadrature_cfi", derivative_step=h,
                        leakage=psi.leakage, povm="homodyne_x")
