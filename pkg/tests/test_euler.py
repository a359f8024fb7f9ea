import numpy as np
import pytest
from oracles import shear_flow, uniform_flow

from subsonic_nozzle.bernoulli import BernoulliDatum, InflowProfile
from subsonic_nozzle.elliptic import Grid, SolverError
from subsonic_nozzle.euler import (
    FixedPointOptions,
    FixedPointProblem,
    apply_T,
    solve_euler,
    solve_potential,
)


def test_shear_oracle_value(gas2):
    rho, _ = shear_flow(gas2, BernoulliDatum.sine(1.5, 0.01), 0.5)
    assert rho == pytest.approx(1.4465925738358554, abs=1e-12)


def test_rest_state(gas2, flat):
    sol = solve_potential(gas2, flat, Grid(8, 8), 1.5, 0.0)
    assert sol.degenerate
    assert sol.flow.max_mach == 0.0
    assert np.allclose(sol.flow.rho, 1.5)


def test_flat_potential_matches_uniform_flow(gas2, flat):
    sol = solve_potential(gas2, flat, Grid(16, 16), 1.5, 0.5)
    rho, q, mach = uniform_flow(gas2, 1.5, 0.5)
    assert np.allclose(sol.flow.rho, rho, atol=1e-12)
    assert np.allclose(sol.flow.u, q, atol=1e-10)
    assert np.max(np.abs(sol.flow.v)) <= 1e-10
    assert sol.flow.max_mach == pytest.approx(mach, abs=1e-10)
    assert sol.sigma0 == pytest.approx(0.5, abs=1e-10)
    assert np.allclose(sol.trace, 0.5, atol=1e-10)


def test_negative_flux_rejected(gas2, flat):
    with pytest.raises(ValueError):
        solve_potential(gas2, flat, Grid(8, 8), 1.5, -0.1)


def test_T_fixes_uniform_profile_for_constant_datum(gas2, flat):
    grid = Grid(12, 12)
    W = InflowProfile.uniform(0.5, grid.ny + 1)
    TW = apply_T(W, BernoulliDatum.from_constant(1.5), gas2, flat, grid, 0.5)
    assert np.max(np.abs(TW.values - W.values)) <= 1e-9
    assert TW.interpolant.integrate(0, 1) == pytest.approx(0.5, rel=1e-14)


def test_shear_fixed_point(gas2, flat):
    B0 = BernoulliDatum.sine(1.5, 0.01)
    sol = solve_euler(gas2, flat, Grid(16, 16), B0, 0.5)
    assert sol.converged and sol.T_residual <= 1e-8
    assert sol.damping == 0.5
    rho, u = shear_flow(gas2, B0, 0.5)
    assert np.max(np.abs(sol.flow.rho - rho)) < 2e-4
    assert np.max(np.abs(sol.flow.u - u(sol.flow.x2))) < 2e-3
    assert np.max(np.abs(sol.flow.v)) < 1e-10
    # history of a damped contraction decreases
    h = np.array(sol.T_history)
    assert h[-1] < 1e-3 * h[0]


def test_constant_datum_reproduces_potential(gas2, constricted):
    grid = Grid(12, 12)
    pot = solve_potential(gas2, constricted, grid, 1.5, 0.4)
    sol = solve_euler(gas2, constricted, grid, BernoulliDatum.from_constant(1.5), 0.4,
                      potential=pot)
    assert sol.damping == 1.0
    assert np.max(np.abs(sol.stream.psi - pot.stream.psi)) <= 1e-9


def test_rotational_problem_needs_positive_flux(gas2, flat):
    with pytest.raises(ValueError):
        FixedPointProblem(gas2, flat, Grid(8, 8), BernoulliDatum.sine(1.5, 0.01), 0.0)


def test_sonic_potential_has_no_admissible_set(gas2, flat):
    with pytest.raises(SolverError):
        FixedPointProblem(gas2, flat, Grid(8, 8), BernoulliDatum.sine(1.5, 0.01), 1.02)


def test_uniform_initial_profile_converges_to_same_point(gas2, flat):
    B0 = BernoulliDatum.sine(1.5, 0.01)
    grid = Grid(12, 12)
    a = solve_euler(gas2, flat, grid, B0, 0.5)
    b = solve_euler(gas2, flat, grid, B0, 0.5, FixedPointOptions(initial="uniform"))
    assert np.max(np.abs(a.stream.psi - b.stream.psi)) <= 1e-7


def test_constant_datum_converges_in_one_step(gas2, flat):
    sol = solve_euler(gas2, flat, Grid(12, 12), BernoulliDatum.from_constant(1.5), 0.5)
    assert sol.converged and sol.T_iterations == 1
    rho = sol.flow.rho[0, 0]
    assert np.allclose(sol.flow.u, 0.5 / rho, atol=1e-10)


def test_shear_oracle_profile_is_nearly_fixed(gas2, flat):
    B0 = BernoulliDatum.sine(1.5, 0.01)
    rho, u = shear_flow(gas2, B0, 0.5)
    defects = []
    for n in (16, 32):
        grid = Grid(n, n)
        W = InflowProfile.from_samples(rho * u(grid.eta), 0.5, renormalize=True)
        defects.append(np.max(np.abs(apply_T(W, B0, gas2, flat, grid, 0.5).values - W.values)))
    assert defects[1] < defects[0] / 3


def test_uniform_profile_is_not_fixed_for_sheared_datum(gas2, flat):
    grid = Grid(16, 16)
    W = InflowProfile.uniform(0.5, grid.ny + 1)
    small = apply_T(W, BernoulliDatum.sine(1.5, 0.005), gas2, flat, grid, 0.5)
    large = apply_T(W, BernoulliDatum.sine(1.5, 0.01), gas2, flat, grid, 0.5)
    d_small = np.max(np.abs(small.values - W.values))
    d_large = np.max(np.abs(large.values - W.values))
    assert d_small > 1e-4
    assert d_large / d_small == pytest.approx(2.0, rel=0.05)
