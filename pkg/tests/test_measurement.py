"""Survival-probability readouts, homodyne densities, dark noise."""

import math

import numpy as np
import pytest

from spreadchan.channel import PhaseDistribution
from spreadchan.errors import DomainError, QuadratureError
from spreadchan.measurement import (MeasurementModel, apply_dark_noise,
                                    default_x_grid, p0_fixed_phase_numeric,
                                    p0_fock_closed, p0_function, p0_numeric,
                                    p0_squeezed_closed,
                                    p0_squeezed_fixed_phase_closed,
                                    p0_vacuum_closed, quadrature_density,
                                    quadrature_moments_closed)
from spreadchan.states import StateSpec, auto_dim, build_state

UNIFORM = PhaseDistribution.uniform()
ALPHAS = np.linspace(0.0, 2.0, 21)


def test_vacuum_closed_vs_numeric():
    psi = build_state(StateSpec.vacuum(), auto_dim(StateSpec.vacuum(), 2.0))
    got = p0_numeric(psi, ALPHAS, UNIFORM)
    assert np.max(np.abs(got - p0_vacuum_closed(ALPHAS))) < 1e-8


def test_fock_closed_vs_numeric():
    for n in (1, 3):
        spec = StateSpec.fock(n)
        psi = build_state(spec, auto_dim(spec, 2.0))
        got = p0_numeric(psi, ALPHAS, UNIFORM)
        assert np.max(np.abs(got - p0_fock_closed(ALPHAS, n))) < 1e-8


def test_squeezed_closed_vs_numeric():
    for r in (0.5, 1.2):
        spec = StateSpec.squeezed(r)
        psi = build_state(spec, auto_dim(spec, 2.0))
        got = p0_numeric(psi, ALPHAS, UNIFORM)
        assert np.max(np.abs(got - p0_squeezed_closed(ALPHAS, r))) < 1e-8


def test_squeezed_fixed_phase_closed_vs_numeric():
    spec = StateSpec.squeezed(1.0)
    psi = build_state(spec, auto_dim(spec, 2.0))
    for phi in (0.0, 0.7, 2.4):
        got = p0_fixed_phase_numeric(psi, ALPHAS, phi)
        ref = p0_squeezed_fixed_phase_closed(ALPHAS, 1.0, 0.0, phi)
        assert np.max(np.abs(got - ref)) < 1e-8


def test_squeezed_fixed_phase_value():
    # frozen from the closed form exp(-a^2 (cosh 2r + sinh 2r cos(2 phi - theta)))
    got = p0_squeezed_fixed_phase_closed(np.array([0.3]), 1.0, 0.0, 0.7)
    assert got[0] == pytest.approx(0.6743015589390976, rel=1e-12)


def test_fock_probe_ignores_direction():
    spec = StateSpec.fock(2)
    psi = build_state(spec, auto_dim(spec, 1.5))
    als = np.linspace(0.1, 1.5, 8)
    base = p0_fixed_phase_numeric(psi, als, 0.0)
    for phi in (0.9, 2.2, 5.0):
        assert np.max(np.abs(p0_fixed_phase_numeric(psi, als, phi) - base)) < 1e-12


def test_dark_noise_pair():
    q0, q1 = apply_dark_noise(0.9, 0.1)
    assert q0 == pytest.approx(0.86)
    assert q1 == pytest.approx(0.14)
    arr0, arr1 = apply_dark_noise(np.array([1.0, 0.0, 0.5]), 0.2)
    assert arr0 == pytest.approx([0.9, 0.1, 0.5])
    assert np.all(arr0 + arr1 == pytest.approx(1.0))
    for eps in (-0.1, 1.5):
        with pytest.raises(DomainError):
            apply_dark_noise(0.5, eps)


def test_p0_numeric_accepts_spec():
    got = p0_numeric(StateSpec.squeezed(0.8), ALPHAS, UNIFORM)
    assert np.max(np.abs(got - p0_squeezed_closed(ALPHAS, 0.8))) < 1e-10
    with pytest.raises(DomainError):
        p0_numeric(StateSpec.thermal(1.0), ALPHAS, UNIFORM)


def test_p0_function_routes():
    f, meta = p0_function(StateSpec.vacuum(), UNIFORM)
    assert meta["route"] == "closed" and meta["monotone"]
    assert np.allclose(f(ALPHAS), p0_vacuum_closed(ALPHAS))

    f, meta = p0_function(StateSpec.fock(2), UNIFORM)
    assert meta["route"] == "closed" and not meta["monotone"]

    f, meta = p0_function(StateSpec.squeezed(1.0), UNIFORM)
    assert meta["route"] == "closed" and meta["monotone"]

    skew = PhaseDistribution.von_mises(0.3, 2.0)
    f, meta = p0_function(StateSpec.squeezed(1.0), skew)
    assert meta["route"] == "closed-mixture" and meta["monotone"]
    # mixture of decreasing exponentials stays within the extreme directions
    als = np.linspace(0.05, 1.0, 6)
    lo = p0_squeezed_fixed_phase_closed(als, 1.0, 0.0, 0.0)
    hi = p0_squeezed_fixed_phase_closed(als, 1.0, 0.0, math.pi / 2.0)
    vals = f(als)
    assert np.all(vals > lo - 1e-12) and np.all(vals < hi + 1e-12)

    with pytest.raises(DomainError):
        p0_function(StateSpec.cat(2, 4.0), UNIFORM)  # needs dim
    f, meta = p0_function(StateSpec.cat(2, 4.0), UNIFORM, dim=128)
    assert meta["route"] == "numeric"
    vals = f(np.array([0.0, 0.5]))
    assert vals[0] == pytest.approx(1.0, abs=1e-10)


def test_quadrature_density_normalized_and_shaped():
    spec = StateSpec.squeezed(1.0)
    xs = default_x_grid(spec, 1.0)
    dens = quadrature_density(spec, 1.0, UNIFORM, xs=xs)
    assert np.trapezoid(dens, xs) == pytest.approx(1.0, abs=1e-9)
    assert np.all(dens >= 0.0)


def test_quadrature_density_narrow_grid_raises():
    xs = np.linspace(-1.0, 1.0, 101)
    with pytest.raises(QuadratureError):
        quadrature_density(StateSpec.vacuum(), 2.0, UNIFORM, xs=xs)


def test_quadrature_density_vacuum_variance():
    spec = StateSpec.vacuum()
    xs = default_x_grid(spec, 0.0)
    dens = quadrature_density(spec, 0.0, UNIFORM, xs=xs)
    # undisplaced vacuum: <x^2> = 1/2
    assert np.trapezoid(dens * xs ** 2, xs) == pytest.approx(0.5, abs=1e-9)


def test_quadrature_density_squeezed_variance():
    r = 1.2
    spec = StateSpec.squeezed(r)
    xs = default_x_grid(spec, 0.0)
    dens = quadrature_density(spec, 0.0, UNIFORM, xs=xs)
    assert np.trapezoid(dens * xs ** 2, xs) == pytest.approx(
        0.5 * math.exp(-2.0 * r), rel=1e-9)


def test_quadrature_density_delta_pair_symmetric():
    pair = PhaseDistribution.parse(f"discrete:0@0.5,{math.pi}@0.5")
    spec = StateSpec.vacuum()
    xs = default_x_grid(spec, 2.0)
    dens = quadrature_density(spec, 2.0, pair, xs=xs)
    assert np.trapezoid(dens * xs, xs) == pytest.approx(0.0, abs=1e-10)
    # two shifted peaks at +-sqrt(2) alpha
    peak = xs[np.argmax(dens)]
    assert abs(abs(peak) - math.sqrt(2.0) * 2.0) < 0.05


def test_survival_curves_monotone_where_flagged():
    als = np.linspace(0.0, 1.5, 40)
    for spec in (StateSpec.vacuum(), StateSpec.squeezed(1.0)):
        f, meta = p0_function(spec, UNIFORM)
        assert meta["monotone"]
        vals = f(als)
        assert np.all(np.diff(vals) < 0.0)


def test_measurement_model_validation():
    m = MeasurementModel(kind="self_projection", probe=StateSpec.vacuum(), eps=0.05)
    assert m.eps == 0.05
    with pytest.raises(DomainError):
        MeasurementModel(kind="telepathy")
    with pytest.raises(DomainError):
        MeasurementModel(eps=1.2)


def test_moments_closed_values():
    m = quadrature_moments_closed(1.5, 0.6)
    # frozen from sigma^2 = e^{-3}/2, mean = alpha^2 + sigma^2,
    # var = 2 sigma^2 (2 alpha^2 + sigma^2), var_est = var / (2 alpha)^2
    assert m.mean_a == pytest.approx(0.38489353418393196, rel=1e-14)
    assert m.var_a == pytest.approx(0.037086065313195214, rel=1e-14)
    assert m.var_estimate == pytest.approx(0.025754212023052232, rel=1e-14)
    at_zero = quadrature_moments_closed(1.5, 0.0)
    assert at_zero.var_estimate is None
    with pytest.raises(DomainError):
        quadrature_moments_closed(-0.5, 0.1)


def test_moments_match_density_integrals():
    # full-mixture variance adds the across-direction spread alpha^4/2
    # on top of the conditional variance the closed form reports
    r, alpha = 1.5, 0.6
    spec = StateSpec.squeezed(r)
    xs = default_x_grid(spec, alpha)
    dens = quadrature_density(spec, alpha, UNIFORM, xs=xs)
    mean_a = float(np.trapezoid(dens * xs ** 2, xs))
    mean_a2 = float(np.trapezoid(dens * xs ** 4, xs))
    m = quadrature_moments_closed(r, alpha)
    assert mean_a == pytest.approx(m.mean_a, rel=1e-9)
    full_var = mean_a2 - mean_a ** 2
    assert full_var == pytest.approx(m.var_a + 0.5 * alpha ** 4, rel=1e-6)
