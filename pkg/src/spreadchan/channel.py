"""Phase-randomized displacement channel.

The channel displaces the probe by a fixed magnitude alpha along a random
phase-space direction phi drawn from a known distribution, then discards
which direction was used:

    rho_out = E_phi[ D(alpha, phi) rho D(alpha, phi)^dag ],
    D(alpha, phi) = exp(alpha (e^{i phi} adag - e^{-i phi} a)).

Phase structure does the heavy lifting here.  With U_phi = diag(e^{-i phi n})
one has D(alpha, phi) = U_phi^dag D(alpha, 0) U_phi, so a single Hermitian
eigendecomposition of the alpha=0 generator serves every (alpha, phi) pair.
That keeps the displacement exactly unitary at any magnitude, which matrix
Taylor schemes cannot promise at large alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, ParseError, QuadratureError, ShapeError
from .fock import DensityOperator, StateVector, bessel_I0, check_dim, make_ladder


@dataclass(frozen=True)
class PhaseDistribution:
    """Distribution of the displacement direction phi on [0, 2 pi).

    kind      "uniform", "vonmises", or "discrete"
    mu, kappa von Mises location and concentration
    atoms     (phase, weight) pairs for the discrete kind; weights are
              normalized at construction
    """

    kind: str = "uniform"
    mu: float = 0.0
    kappa: float = 0.0
    atoms: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "vonmises", "discrete"):
            raise DomainError(f"unknown phase distribution {self.kind!r}")
        if self.kind == "vonmises" and self.kappa < 0:
            raise DomainError(f"concentration must be >= 0, got {self.kappa}")
        if self.kind == "discrete":
            if not self.atoms:
                raise DomainError("discrete phase distribution needs at least one atom")
            total = sum(w for _, w in self.atoms)
            if total <= 0 or any(w < 0 for _, w in self.atoms):
                raise DomainError("discrete weights must be non-negative with positive sum")
            atoms = tuple((float(p) % (2.0 * math.pi), float(w) / total) for p, w in self.atoms)
            object.__setattr__(self, "atoms", atoms)

    @classmethod
    def uniform(cls) -> "PhaseDistribution":
        return cls(kind="uniform")

    @classmethod
    def von_mises(cls, mu: float, kappa: float) -> "PhaseDistribution":
        return cls(kind="vonmises", mu=float(mu), kappa=float(kappa))

    @classmethod
    def discrete(cls, atoms: Sequence[Tuple[float, float]]) -> "PhaseDistribution":
        return cls(kind="discrete", atoms=tuple((float(p), float(w)) for p, w in atoms))

    @classmethod
    def parse(cls, text: str) -> "PhaseDistribution":
        """Forms: ``uniform``; ``vonmises:mu=0,kappa=5``;
        ``discrete:0@0.5,3.14159@0.5`` (phase@weight pairs)."""
        text = text.strip()
        head, _, body = text.partition(":")
        head = head.strip().lower()
        if head == "uniform":
            if body.strip():
                raise ParseError("uniform takes no fields")
            return cls.uniform()
        if head in ("vonmises", "von_mises"):
            fields = {}
            for item in body.split(","):
                item = item.strip()
                if not item:
                    continue
                key, _, raw = item.partition("=")
                key = key.strip()
                if key not in ("mu", "kappa"):
                    raise ParseError(f"unknown field {key!r} for vonmises")
                try:
                    fields[key] = float(raw)
                except ValueError as exc:
                    raise ParseError(f"bad value for {key!r}: {raw!r}") from exc
            if "kappa" not in fields:
                raise ParseError("vonmises requires kappa=")
            return cls.von_mises(fields.get("mu", 0.0), fields["kappa"])
        if head == "discrete":
            atoms = []
            for item in body.split(","):
                item = item.strip()
                if not item:
                    continue
                if "@" not in item:
                    raise ParseError(f"discrete atoms are phase@weight, got {item!r}")
                p_raw, _, w_raw = item.partition("@")
                try:
                    atoms.append((float(p_raw), float(w_raw)))
                except ValueError as exc:
                    raise ParseError(f"bad atom {item!r}") from exc
            if not atoms:
                raise ParseError("discrete requires at least one phase@weight atom")
            return cls.discrete(atoms)
        raise ParseError(f"unknown phase distribution {head!r}")

    def label(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        if self.kind == "vonmises":
            return f"vonmises:mu={self.mu:g},kappa={self.kappa:g}"
        return "discrete:" + ",".join(f"{p:g}@{w:g}" for p, w in self.atoms)

    def density(self, phi) -> np.ndarray:
        """Probability density on [0, 2 pi) (uniform and von Mises only)."""
        phi = np.asarray(phi, dtype=np.float64)
        if self.kind == "uniform":
            return np.full_like(phi, 1.0 / (2.0 * math.pi))
        if self.kind == "vonmises":
            norm = 2.0 * math.pi * bessel_I0(self.kappa)
            return np.exp(self.kappa * np.cos(phi - self.mu)) / norm
        raise DomainError("discrete phase distribution has no density")

    def nodes_and_weights(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes/weights for averaging over phi.

        Uniform nodes with equal weights integrate trigonometric
        polynomials exactly once count exceeds the bandwidth, which is what
        the channel average is; von Mises reuses the same grid with density
        weights renormalized to sum to one; discrete returns the atoms.
        """
        if self.kind == "discrete":
            phis = np.array([p for p, _ in self.atoms])
            ws = np.array([w for _, w in self.atoms])
            return phis, ws
        if count < 1:
            raise DomainError(f"need at least one node, got {count}")
        phis = 2.0 * math.pi * np.arange(count) / count
        if self.kind == "uniform":
            ws = np.full(count, 1.0 / count)
        else:
            ws = self.density(phis)
            ws = ws / ws.sum()
        return phis, ws

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(0.0, 2.0 * math.pi, size=size)
        if self.kind == "vonmises":
            return np.mod(rng.vonmises(self.mu, self.kappa, size=size), 2.0 * math.pi)
        phis = np.array([p for p, _ in self.atoms])
        ws = np.array([w for _, w in self.atoms])
        return rng.choice(phis, size=size, p=ws)


@dataclass(frozen=True)
class ChannelSpec:
    """Magnitude plus phase law of the randomized displacement.

    quadrature_nodes optionally pins the node count of the phase average;
    None defers to the caller or to default_node_count.
    """

    alpha: float
    phases: PhaseDistribution = field(default_factory=PhaseDistribution.uniform)
    quadrature_nodes: Optional[int] = None

    def __post_init__(self):
        if self.alpha < 0:
            raise DomainError(f"displacement magnitude must be >= 0, got {self.alpha}")
        if self.quadrature_nodes is not None and self.quadrature_nodes < 1:
            raise DomainError(
                f"node count must be positive, got {self.quadrature_nodes}")


# ----------------------------------------------------------------------
# displacement operators, spectral route
# ----------------------------------------------------------------------

@lru_cache(maxsize=16)
def _disp_eig(dim: int):
    # G = -i (adag - a) is Hermitian and D(alpha, 0) = exp(i alpha G)
    a, adag = make_ladder(dim)
    G = -1j * (adag - a)
    lam, V = np.linalg.eigh(G)
    lam.setflags(write=False)
    V.setflags(write=False)
    return lam, V


def displacement(alpha: float, phi: float, dim: int) -> np.ndarray:
    """Displacement matrix D(alpha, phi) = exp(alpha (e^{i phi} adag - e^{-i phi} a)).

    Built from the cached spectral factorization of the phi=0 generator and
    the number-basis phase rotation, so it is unitary to rounding at any
    magnitude.
    """
    dim = check_dim(dim)
    lam, V = _disp_eig(dim)
    core = (V * np.exp(1j * alpha * lam)) @ V.conj().T
    if phi == 0.0:
        return core
    rot = np.exp(-1j * phi * np.arange(dim))
    # U_phi^dag core U_phi with diagonal U_phi
    return rot.conj()[:, None] * core * rot[None, :]


def displacement_generator(phi: float, dim: int) -> np.ndarray:
    """Hermitian generator G(phi) with D(alpha, phi) = exp(i alpha G(phi))."""
    dim = check_dim(dim)
    a, adag = make_ladder(dim)
    return -1j * (np.exp(1j * phi) * adag - np.exp(-1j * phi) * a)


def default_node_count(dim: int) -> int:
    # matrix elements of D have bandwidth dim-1 in phi; 2(dim-1)+1 uniform
    # nodes already integrate them exactly, 4*dim adds slack
    return max(64, 4 * dim)


def apply_channel(state, channel: ChannelSpec, nodes: Optional[int] = None,
                  check_convergence: bool = False) -> DensityOperator:
    """Push a state through the phase-randomized displacement channel.

    Accepts a StateVector or DensityOperator; returns the output
    DensityOperator.  The phi average runs over quadrature nodes of the
    phase distribution; with check_convergence=True the node count is
    doubled once and the two outputs compared, raising if they disagree.
    """
    if isinstance(state, StateVector):
        rho = np.outer(state.amplitudes, state.amplitudes.conj())
        dim = state.dim
    elif isinstance(state, DensityOperator):
        rho = state.matrix
        dim = state.dim
    else:
        raise ShapeError(f"expected StateVector or DensityOperator, got {type(state)!r}")

    if nodes is None:
        nodes = channel.quadrature_nodes
    if nodes is None:
        nodes = default_node_count(dim)
    if channel.phases.kind != "discrete" and nodes < 8:
        raise DomainError(
            f"continuous phase average needs at least 8 nodes, got {nodes}")
    out = _channel_average(rho, channel, dim, nodes)
    if check_convergence and channel.phases.kind != "discrete":
        out2 = _channel_average(rho, channel, dim, 2 * nodes)
        drift = np.max(np.abs(out - out2))
        if drift > 1e-10:
            raise QuadratureError(
                f"channel average not converged: doubling nodes moved entries by {drift:.2e}")
        out = out2
    return DensityOperator(out)


def _channel_average(rho: np.ndarray, channel: ChannelSpec, dim: int, nodes: int) -> np.ndarray:
    lam, V = _disp_eig(dim)
    core = (V * np.exp(1j * channel.alpha * lam)) @ V.conj().T
    phis, ws = channel.phases.nodes_and_weights(nodes)
    ns = np.arange(dim)
    out = np.zeros((dim, dim), dtype=np.complex128)
    for phi, w in zip(phis, ws):
        rot = np.exp(-1j * phi * ns)
        rho_rot = rot[:, None] * rho * rot.conj()[None, :]
        drd = core @ rho_rot @ core.conj().T
        out += w * (rot.conj()[:, None] * drd * rot[None, :])
    # enforce exact Hermiticity lost to rounding
    return 0.5 * (out + out.conj().T)


def displaced_overlaps(psi: StateVector, alphas, phis) -> np.ndarray:
    """Table of survival amplitudes <psi| D(alpha, phi) |psi>.

    Returns a complex array of shape (len(alphas), len(phis)).  Uses the
    spectral factorization: with w = V^dag (e^{-i phi n} psi) one has
    <psi|D|psi> = sum_j e^{i alpha lam_j} |w_j|^2, so the whole table is a
    single matrix product per phi grid.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=np.float64))
    phis = np.atleast_1d(np.asarray(phis, dtype=np.float64))
    lam, V = _disp_eig(psi.dim)
    ns = np.arange(psi.dim)
    rotated = np.exp(-1j * np.outer(phis, ns)) * psi.amplitudes[None, :]
    w = rotated @ V.conj()  # (phi, eigenvector) coefficients
    weights = np.abs(w) ** 2  # (n_phi, dim)
    phase_table = np.exp(1j * np.outer(alphas, lam))  # (n_alpha, dim)
    return phase_table @ weights.T
