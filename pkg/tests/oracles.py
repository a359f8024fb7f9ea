"""Closed-form and quadrature oracles shared by the test modules."""
import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from subsonic_nozzle.gas import critical_state, subsonic_density


def shear_flow(gas, B0, m):
    """Exact flat-channel shear flow for inflow Bernoulli ``B0(x2)`` and flux ``m``.

    Streamlines are horizontal, so ``rho`` is constant and
    ``u(x2) = sqrt(2 (B0(x2) - h(rho)))``; ``rho`` solves
    ``rho int_0^1 u dx2 = m`` on the subsonic side, by bisection.
    Returns ``(rho, u)`` with ``u`` a callable.
    """
    x = np.linspace(0.0, 1.0, 4001)
    bmin = float(np.min(B0(x)))

    def flux(rho):
        val, _ = quad(lambda y: np.sqrt(max(2.0 * (B0(y) - gas.h(rho)), 0.0)), 0.0, 1.0,
                      epsabs=1e-14, epsrel=1e-13, limit=200)
        return rho * val - m

    lo = float(critical_state(gas, bmin).rho_crit)
    hi = float(gas.h_inverse(bmin))
    rho = brentq(flux, lo, hi, xtol=1e-16, rtol=1e-15, maxiter=400)
    return rho, lambda y: np.sqrt(2.0 * (B0(y) - gas.h(rho)))


def uniform_flow(gas, Bbar, m):
    """Flat unit-gap channel with constant Bernoulli value: ``q = m / rho``."""
    rho = subsonic_density(gas, m * m, Bbar)
    q = m / rho
    return rho, q, q / float(gas.sound_speed(rho))
