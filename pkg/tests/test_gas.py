"""Equation of state: closed forms for gamma = 2, A = 1/2 and independent root-find oracles."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import brentq

from subsonic_nozzle.gas import (
    GasDomainError,
    GasModel,
    SupersonicBranchError,
    critical_state,
    enthalpy,
    sigma_squared,
    subsonic_density,
    subsonic_density_partials,
)

GAS2 = GasModel.polytropic(2.0, 0.5)


def test_enthalpy_closed_form_and_quadrature(gas2):
    assert enthalpy(gas2, 1.0) == pytest.approx(1.0, abs=1e-15)
    for rho in (0.3, 1.0, 2.7):
        val, _ = quad(lambda r: gas2.dpdrho(r) / r, 0.0, rho, epsabs=1e-14)
        assert enthalpy(gas2, rho) == pytest.approx(val, rel=1e-12)


def test_enthalpy_normalizations():
    assert enthalpy(GasModel.isothermal(1.0), 1.0) == 0.0
    assert enthalpy(GAS2, 1e-12) == pytest.approx(0.0, abs=1e-11)
    gas = GasModel.polytropic(1.4, 1.0)
    val, _ = quad(lambda r: gas.dpdrho(r) / r, 0.0, 0.8)
    assert enthalpy(gas, 0.8) == pytest.approx(val, rel=1e-10)


def test_enthalpy_rejects_nonpositive_density(gas2):
    with pytest.raises(GasDomainError):
        enthalpy(gas2, 0.0)


@pytest.mark.parametrize("kw", [dict(kind="polytropic", gamma=1.0, A=1.0),
                                dict(kind="polytropic", gamma=2.0, A=0.0),
                                dict(kind="isothermal", c=0.0),
                                dict(kind="steam")])
def test_invalid_gas_parameters(kw):
    with pytest.raises(GasDomainError):
        GasModel(**kw)


def _critical_oracle(gas, s):
    """Sonic density from h(rho) + p'(rho)/2 = s by bracketing root-find."""
    return brentq(lambda r: gas.h(r) + 0.5 * gas.dpdrho(r) - s, 1e-12, gas.h_inverse(s),
                  xtol=1e-15, rtol=1e-15)


@pytest.mark.parametrize("s, rho_crit, sigma", [(1.5, 1.0, 1.0), (3.0, 2.0, 2.0 * np.sqrt(2.0))])
def test_critical_state_closed_form(gas2, s, rho_crit, sigma):
    cs = critical_state(gas2, s)
    assert cs.rho_max == pytest.approx(s, abs=1e-12)
    assert cs.rho_crit == pytest.approx(rho_crit, abs=1e-12)
    assert cs.rho_crit == pytest.approx(_critical_oracle(gas2, s), abs=1e-12)
    assert cs.speed_crit == pytest.approx(np.sqrt(rho_crit), abs=1e-12)
    assert cs.sigma == pytest.approx(sigma, abs=1e-12)


@pytest.mark.parametrize("gas", [GAS2, GasModel.polytropic(1.4, 1.0), GasModel.isothermal(0.7)])
def test_critical_state_invariants(gas):
    for s in (0.5, 1.0, 4.0):
        cs = critical_state(gas, s)
        assert gas.h(cs.rho_max) == pytest.approx(s, abs=1e-12)
        assert gas.h(cs.rho_crit) + 0.5 * cs.speed_crit**2 == pytest.approx(s, abs=1e-12)
        assert gas.dpdrho(cs.rho_crit) == pytest.approx(cs.speed_crit**2, rel=1e-12)
        assert cs.rho_crit < cs.rho_max
        assert cs.sigma == pytest.approx(
            cs.rho_crit * np.sqrt(2.0 * (s - gas.h(cs.rho_crit))), rel=1e-12
        )


def test_critical_quantities_increase_with_s(gas2):
    cs = critical_state(gas2, np.array([1.0, 1.5, 2.0]))
    for q in (cs.rho_max, cs.rho_crit, cs.sigma):
        assert np.all(np.diff(q) > 0)


def test_critical_state_domain(gas2):
    with pytest.raises(GasDomainError):
        critical_state(gas2, 0.0)
    # isothermal enthalpy is unbounded below: negative s is admissible
    assert critical_state(GasModel.isothermal(1.0), -2.0).sigma > 0


def test_subsonic_density_examples(gas2):
    assert subsonic_density(gas2, 0.0, 1.5) == pytest.approx(1.5, abs=1e-14)
    assert subsonic_density(gas2, 1.0, 1.5) == pytest.approx(1.0, abs=1e-12)
    # rho^3 - 1.5 rho^2 + 0.25 = 0 on (1, 1.5)
    oracle = brentq(lambda r: r**3 - 1.5 * r**2 + 0.25, 1.0, 1.5, xtol=1e-15)
    assert subsonic_density(gas2, 0.5, 1.5) == pytest.approx(oracle, abs=1e-13)
    assert oracle == pytest.approx((1.0 + np.sqrt(3.0)) / 2.0, abs=1e-14)


def test_subsonic_density_supersonic_request(gas2):
    with pytest.raises(SupersonicBranchError):
        subsonic_density(gas2, 1.01, 1.5)


def test_partials_undefined_at_sonic(gas2):
    with pytest.raises(GasDomainError):
        subsonic_density_partials(gas2, 1.0, 1.5)


@settings(max_examples=1000, deadline=None)
@given(s=st.floats(0.05, 20.0), frac=st.floats(0.0, 0.999))
def test_bernoulli_residual_and_partial_signs(s, frac):
    M = frac * float(sigma_squared(GAS2, s))
    rho = subsonic_density(GAS2, M, s)
    cs = critical_state(GAS2, s)
    assert cs.rho_crit - 1e-12 <= rho <= cs.rho_max + 1e-12
    assert abs(GAS2.h(rho) + M / (2 * rho * rho) - s) <= 1e-12 * s
    dM, ds = subsonic_density_partials(GAS2, M, s, rho)
    assert dM < 0 and ds > 0


def test_partials_match_finite_differences(gas2):
    M, s = 0.4, 1.5
    dM, ds = subsonic_density_partials(gas2, M, s)
    h = 1e-6
    fdM = (subsonic_density(gas2, M + h, s) - subsonic_density(gas2, M - h, s)) / (2 * h)
    fds = (subsonic_density(gas2, M, s + h) - subsonic_density(gas2, M, s - h)) / (2 * h)
    assert dM == pytest.approx(fdM, rel=1e-7)
    assert ds == pytest.approx(fds, rel=1e-7)


def test_subsonic_density_vectorized(gas2, rng):
    s = rng.uniform(0.5, 3.0, 200)
    M = rng.uniform(0.0, 0.99, 200) * sigma_squared(gas2, s)
    rho = subsonic_density(gas2, M, s)
    for k in range(0, 200, 37):
        assert rho[k] == subsonic_density(gas2, M[k], s[k])
