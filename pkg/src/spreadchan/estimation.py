"""Monte-Carlo experiments and maximum-likelihood magnitude estimation.

An experiment repeats the channel M times with a fresh random direction per
shot, records how often the probe survives the self-projection check, and
inverts the survival curve to estimate the magnitude.  Everything is driven
by a counter-based generator keyed by (seed, trial): trial streams are
independent by construction, so sweeps are reproducible shot for shot no
matter how they are scheduled.

Draw order inside a trial is fixed and part of the output contract:
directions first, then (if enabled) the probe-rotation angles, then the
Bernoulli uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .channel import PhaseDistribution, displaced_overlaps
from .errors import DomainError
from .fisher import noisy_cfi
from .fock import StateVector, laguerre
from .measurement import apply_dark_noise, p0_function
from .states import StateSpec, auto_dim, build_state

# inversion window: survival is numerically exhausted well before this
ALPHA_MAX_DEFAULT = 3.0

# chunk size for per-shot overlap tables (keeps memory flat at large M)
_CHUNK = 8192


def shot_rng(seed: int, trial: int = 0) -> np.random.Generator:
    """Counter-based stream for one trial: key = seed, counter = trial."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, trial]))


@dataclass(frozen=True)
class ExperimentConfig:
    """One survival experiment: probe, phase law, truth, and bookkeeping."""

    probe: StateSpec
    alpha_true: float
    shots: int
    seed: int
    phases: PhaseDistribution = field(default_factory=PhaseDistribution.uniform)
    eps: float = 0.0
    randomize_rotation: bool = False
    dim: Optional[int] = None

    def __post_init__(self):
        if self.alpha_true < 0:
            raise DomainError(f"true magnitude must be >= 0, got {self.alpha_true}")
        if self.shots < 1:
            raise DomainError(f"need at least one shot, got {self.shots}")
        if not 0.0 <= self.eps <= 1.0:
            raise DomainError(f"dark-noise rate must lie in [0, 1], got {self.eps}")
        if self.probe.is_mixed:
            raise DomainError("survival experiments need a pure probe")


@dataclass(frozen=True)
class MLEEstimate:
    """Inverted magnitude plus the flags the inversion can raise."""

    alpha_hat: float
    at_boundary: bool = False
    ambiguous: bool = False


@dataclass(frozen=True)
class ExperimentResult:
    """Counts, estimate, and the matching single-experiment CR bound."""

    m0: int
    m1: int
    alpha_hat: float
    crb_sigma: float
    at_boundary: bool = False
    ambiguous: bool = False
    phi_draws: Optional[np.ndarray] = None

    @property
    def shots(self) -> int:
        return self.m0 + self.m1


def _per_shot_survival(probe: StateSpec, alpha: float, phis: np.ndarray,
                       dim: Optional[int]) -> np.ndarray:
    """Survival probability of each shot given its drawn direction."""
    if probe.kind in ("vacuum", "coherent"):
        return np.full(phis.shape, math.exp(-alpha ** 2))
    if probe.kind == "fock":
        q = alpha ** 2
        return np.full(phis.shape, math.exp(-q) * laguerre(probe.n, q) ** 2)
    if probe.kind == "squeezed":
        gam = (math.cosh(2.0 * probe.r)
               + math.sinh(2.0 * probe.r) * np.cos(2.0 * phis - probe.theta))
        return np.exp(-alpha ** 2 * gam)
    # cat: overlap table, chunked over shots
    if dim is None:
        dim = auto_dim(probe, alpha_max=alpha)
    psi = build_state(probe, dim)
    assert isinstance(psi, StateVector)
    out = np.empty(phis.shape, dtype=np.float64)
    for start in range(0, phis.size, _CHUNK):
        block = phis[start:start + _CHUNK]
        out[start:start + _CHUNK] = np.abs(displaced_overlaps(psi, [alpha], block)[0]) ** 2
    return out


def _averaged_p0(probe: StateSpec, phases: PhaseDistribution, dim: Optional[int],
                 alpha_max: float):
    if probe.kind == "cat" and dim is None:
        dim = auto_dim(probe, alpha_max=alpha_max)
    return p0_function(probe, phases, dim=dim)


def mle_from_counts(m0: int, m1: int, probe: StateSpec, phases: PhaseDistribution,
                    eps: float = 0.0, dim: Optional[int] = None,
                    alpha_max: float = ALPHA_MAX_DEFAULT) -> MLEEstimate:
    """Maximum-likelihood magnitude from survival counts.

    Monotone survival curves (vacuum, coherent, squeezed under any phase
    law) invert the mean survival rate directly.  Non-monotone curves
    (Fock above the ground level, cats) maximize the binomial likelihood
    on a grid with local refinement; when several well-separated maxima
    sit within 0.5 log-likelihood of the best, the smallest one is
    returned and the estimate is marked ambiguous rather than silently
    picked.
    """
    if m0 < 0 or m1 < 0 or m0 + m1 < 1:
        raise DomainError(f"counts must be non-negative with m0 + m1 >= 1, got {m0}, {m1}")
    shots = m0 + m1
    target = m0 / shots
    f, meta = _averaged_p0(probe, phases, dim, alpha_max)

    def q(al: float) -> float:
        return apply_dark_noise(float(np.atleast_1d(f(np.array([al])))[0]), eps)[0]

    if meta["monotone"]:
        q_lo, q_hi = q(alpha_max), q(0.0)
        if target >= q_hi:
            return MLEEstimate(alpha_hat=0.0, at_boundary=True)
        if target <= q_lo:
            return MLEEstimate(alpha_hat=alpha_max, at_boundary=True)
        root = brentq(lambda al: q(al) - target, 0.0, alpha_max, xtol=1e-12)
        return MLEEstimate(alpha_hat=float(root))

    # grid + refine over the binomial log-likelihood
    def neg_loglik(al: float) -> float:
        qa = min(max(q(al), 1e-300), 1.0 - 1e-15)
        ll = 0.0
        if m0:
            ll += m0 * math.log(qa)
        if m1:
            ll += m1 * math.log1p(-qa)
        return -ll

    grid = np.linspace(0.0, alpha_max, 1201)
    vals = np.array([-neg_loglik(al) for al in grid])
    peaks = [i for i in range(len(grid))
             if (i == 0 or vals[i] >= vals[i - 1]) and (i == len(grid) - 1 or vals[i] > vals[i + 1])]
    candidates = []
    for i in peaks:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
        if lo == hi:
            candidates.append((float(grid[i]), float(vals[i])))
            continue
        res = minimize_scalar(neg_loglik, bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        candidates.append((float(res.x), float(-res.fun)))
    best_ll = max(ll for _, ll in candidates)
    near = sorted(al for al, ll in candidates if ll >= best_ll - 0.5)
    # count well-separated near-optimal solutions
    clusters = []
    for al in near:
        if not clusters or al - clusters[-1] > 0.02:
            clusters.append(al)
    alpha_hat = clusters[0]
    ambiguous = len(clusters) >= 2
    at_boundary = alpha_hat <= grid[1] or alpha_hat >= alpha_max - (grid[1] - grid[0])
    return MLEEstimate(alpha_hat=alpha_hat, at_boundary=at_boundary, ambiguous=ambiguous)


def crb_sigma(probe: StateSpec, phases: PhaseDistribution, alpha: float, shots: int,
              eps: float = 0.0, dim: Optional[int] = None) -> float:
    """Cramer-Rao floor 1 / sqrt(M F_C) for the survival readout."""
    if alpha == 0.0:
        return math.inf
    f, _ = _averaged_p0(probe, phases, dim, max(ALPHA_MAX_DEFAULT, alpha))
    rep = noisy_cfi(f, eps, alpha)
    if rep.value <= 0.0:
        return math.inf
    return 1.0 / math.sqrt(shots * rep.value)


def simulate(config: ExperimentConfig, trial: int = 0,
             keep_draws: bool = False) -> ExperimentResult:
    """Run one experiment: M direction draws, M Bernoulli outcomes, MLE."""
    rng = shot_rng(config.seed, trial)
    phis = config.phases.sample(rng, config.shots)
    if config.randomize_rotation:
        thetas = rng.uniform(0.0, 2.0 * math.pi, size=config.shots)
        phis = np.mod(phis + thetas, 2.0 * math.pi)
    p_shot = _per_shot_survival(config.probe, config.alpha_true, phis, config.dim)
    q_shot, _ = apply_dark_noise(p_shot, config.eps)
    hits = rng.uniform(size=config.shots) < q_shot
    m0 = int(np.count_nonzero(hits))
    m1 = config.shots - m0
    # the inversion sees the phase law the shots were actually drawn from
    eff_phases = PhaseDistribution.uniform() if config.randomize_rotation else config.phases
    est = mle_from_counts(m0, m1, config.probe, eff_phases, eps=config.eps,
                          dim=config.dim)
    sigma = crb_sigma(config.probe, eff_phases, config.alpha_true, config.shots,
                      eps=config.eps, dim=config.dim)
    return ExperimentResult(m0=m0, m1=m1, alpha_hat=est.alpha_hat, crb_sigma=sigma,
                            at_boundary=est.at_boundary, ambiguous=est.ambiguous,
                            phi_draws=phis if keep_draws else None)


@dataclass(frozen=True)
class SweepRow:
    """One line of an error sweep: truth, sample size, spread, floor."""

    alpha: float
    shots: int
    trials: int
    rmse: float
    crb: float
    mean_estimate: float
    n_boundary: int
    n_ambiguous: int

    @property
    def ratio(self) -> float:
        return self.rmse / self.crb if self.crb > 0 and math.isfinite(self.crb) else math.nan


def rmse_sweep(probe: StateSpec, alphas: Sequence[float], shots: int, trials: int,
               seed: int, phases: Optional[PhaseDistribution] = None,
               eps: float = 0.0, dim: Optional[int] = None,
               collect_estimates: bool = False):
    """Empirical estimator error against the Cramer-Rao floor.

    Runs ``trials`` independent experiments per alpha (trial index keys the
    stream, alpha indexes shift it) and reports the root-mean-square error
    of the estimate next to 1/sqrt(M F_C).  Returns the rows, plus the raw
    per-trial estimates when collect_estimates is set.
    """
    if trials < 1:
        raise DomainError(f"need at least one trial, got {trials}")
    if phases is None:
        phases = PhaseDistribution.uniform()
    rows = []
    estimates_out = {}
    for k, alpha in enumerate(alphas):
        cfg = ExperimentConfig(probe=probe, alpha_true=float(alpha), shots=shots,
                               seed=seed, phases=phases, eps=eps, dim=dim)
        estimates = np.empty(trials)
        n_boundary = 0
        n_ambiguous = 0
        for t in range(trials):
            res = simulate(cfg, trial=k * trials + t)
            estimates[t] = res.alpha_hat
            n_boundary += int(res.at_boundary)
            n_ambiguous += int(res.ambiguous)
        rmse = float(np.sqrt(np.mean((estimates - alpha) ** 2)))
        crb = crb_sigma(probe, phases, float(alpha), shots, eps=eps, dim=dim)
        rows.append(SweepRow(alpha=float(alpha), shots=shots, trials=trials,
                             rmse=rmse, crb=crb, mean_estimate=float(np.mean(estimates)),
                             n_boundary=n_boundary, n_ambiguous=n_ambiguous))
        if collect_estimates:
            estimates_out[float(alpha)] = estimates
    if collect_estimates:
        return rows, estimates_out
    return rows


@dataclass(frozen=True)
class RotationStatistics:
    """Monte-Carlo survival estimate under a randomized probe rotation."""

    p0_estimate: float
    std_error: float
    draws: int


def randomized_rotation_statistics(probe: StateSpec, alpha: float,
                                   phases: PhaseDistribution, draws: int,
                                   seed: int = 0,
                                   dim: Optional[int] = None) -> RotationStatistics:
    """Survival statistics when the probe is spun uniformly before each shot.

    A uniform rotation theta folded onto any direction law gives a uniform
    effective direction, so the estimate converges to the uniform-law
    survival probability no matter what ``phases`` is.  Returned std_error
    is the Monte-Carlo standard error of the mean (zero for probes that
    cannot see the direction at all).
    """
    if probe.is_mixed:
        raise DomainError("rotation statistics need a pure probe")
    if draws < 2:
        raise DomainError(f"need at least two draws, got {draws}")
    rng = shot_rng(seed, 0)
    phis = phases.sample(rng, draws)
    thetas = rng.uniform(0.0, 2.0 * math.pi, size=draws)
    fids = _per_shot_survival(probe, alpha, np.mod(phis + thetas, 2.0 * math.pi), dim)
    mean = float(np.mean(fids))
    sem = float(np.std(fids, ddof=1) / math.sqrt(draws))
    return RotationStatistics(p0_estimate=mean, std_error=sem, draws=draws)


@dataclass(frozen=True)
class OverlapRow:
    """Sampled survival-amplitude spread at one magnitude."""

    alpha: float
    mean_overlap: float
    rms: float


def overlap_fluctuations(probe: StateSpec, alphas: Sequence[float], draws: int,
                         seed: int, phases: Optional[PhaseDistribution] = None,
                         dim: Optional[int] = None):
    """Mean and spread of |<psi|D(alpha, phi)|psi>| over sampled directions.

    Probes that cannot see the direction (vacuum, coherent, Fock) get their
    constant overlap with spread exactly zero; phase-sensitive probes are
    sampled, one stream per table row.
    """
    if probe.is_mixed:
        raise DomainError("overlap statistics need a pure probe")
    if draws < 2:
        raise DomainError(f"need at least two draws, got {draws}")
    if phases is None:
        phases = PhaseDistribution.uniform()
    insensitive = probe.kind in ("vacuum", "coherent", "fock")
    rows = []
    for k, alpha in enumerate(alphas):
        alpha = float(alpha)
        if insensitive:
            const = math.sqrt(float(_per_shot_survival(probe, alpha,
                                                       np.zeros(1), dim)[0]))
            rows.append(OverlapRow(alpha=alpha, mean_overlap=const, rms=0.0))
            continue
        rng = shot_rng(seed, k)
        phis = phases.sample(rng, draws)
        overlaps = np.sqrt(_per_shot_survival(probe, alpha, phis, dim))
        mean = float(np.mean(overlaps))
        rms = float(np.sqrt(np.mean((overlaps - mean) ** 2)))
        rows.append(OverlapRow(alpha=alpha, mean_overlap=mean, rms=rms))
    return rows


def averaged_survival(probe: StateSpec, phases: PhaseDistribution, alphas,
                      dim: Optional[int] = None) -> np.ndarray:
    """Phase-averaged survival curve for a probe spec (closed form when
    available, overlap table otherwise)."""
    f, _ = _averaged_p0(probe, phases, dim, float(np.max(np.atleast_1d(alphas))))
    return np.atleast_1d(f(np.asarray(alphas, dtype=np.float64)))
