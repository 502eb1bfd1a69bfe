"""Phase-space evaluation checks."""

import math

import numpy as np
import pytest

from spreadchan.states import StateSpec, build_state
from spreadchan.wigner import PhaseSpaceGrid, wigner_grid


def test_vacuum_peak_at_origin():
    vac = build_state(StateSpec.vacuum(), 64)
    grid = wigner_grid(vac, points=101)
    assert grid.at_origin() == pytest.approx(1.0 / math.pi, rel=1e-10)
    assert grid.peak() == pytest.approx(1.0 / math.pi, rel=1e-8)
    assert grid.integral() == pytest.approx(1.0, abs=5e-3)


def test_fock_one_is_negative_at_origin():
    # dim must cover the displacement to the far grid corners
    one = build_state(StateSpec.fock(1), 96)
    grid = wigner_grid(one, points=101)
    assert grid.at_origin() == pytest.approx(-1.0 / math.pi, rel=1e-10)
    assert grid.integral() == pytest.approx(1.0, abs=5e-3)


def test_coherent_peak_location():
    psi = build_state(StateSpec.coherent(1.0), 128)
    grid = wigner_grid(psi, points=161)
    i, j = np.unravel_index(np.argmax(grid.values), grid.values.shape)
    assert grid.xs[i] == pytest.approx(math.sqrt(2.0), abs=0.05)
    assert grid.ps[j] == pytest.approx(0.0, abs=0.05)
    assert grid.values[i, j] == pytest.approx(1.0 / math.pi, rel=1e-3)


def test_values_are_real_and_normalized():
    for spec in (StateSpec.squeezed(1.0), StateSpec.cat(2, 4.0)):
        psi = build_state(spec, 160)
        grid = wigner_grid(psi, points=121)
        assert grid.values.dtype == np.float64
        assert 0.995 < grid.integral() < 1.005


def test_fock_rotational_symmetry():
    psi = build_state(StateSpec.fock(3), 48)
    rs = np.array([0.7, 1.9])
    angles = np.linspace(0.0, 2.0 * math.pi, 9)[:-1]
    vals = []
    for th in angles:
        xs = rs * math.cos(th)
        ps = rs * math.sin(th)
        g = wigner_grid(psi, xs=xs, ps=ps)
        vals.append(np.diag(g.values))
    vals = np.array(vals)
    assert np.max(np.abs(vals - vals[0])) < 1e-8


def test_mixed_state_is_component_average():
    rho = build_state(StateSpec.thermal(0.2), 96)
    pts = np.linspace(-2.0, 2.0, 41)
    grid = wigner_grid(rho, xs=pts, ps=pts)
    # oracle: thermal Wigner is the isotropic Gaussian
    # exp(-(x^2 + p^2) / (2 nbar + 1)) / (pi (2 nbar + 1))
    tau = 1.4
    ref = np.exp(-(pts[:, None] ** 2 + pts[None, :] ** 2) / tau) / (math.pi * tau)
    assert grid.at_origin() == pytest.approx(1.0 / (math.pi * tau), rel=1e-10)
    assert np.max(np.abs(grid.values - ref)) < 1e-12


def test_leak_warning_on_oversized_grid():
    psi = build_state(StateSpec.vacuum(), 8)
    far = np.linspace(-12.0, 12.0, 41)
    with pytest.warns(RuntimeWarning):
        wigner_grid(psi, xs=far, ps=far)


def test_grid_shape_validation():
    with pytest.raises(Exception):
        PhaseSpaceGrid(xs=np.zeros(3), ps=np.zeros(4), values=np.zeros((4, 3)))
