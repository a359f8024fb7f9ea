"""Equation-of-state algebra for isentropic gases.

Two barotropic laws are supported: the polytropic gas ``p = A rho**gamma``
and the isothermal gas ``p = c**2 rho``.  Enthalpy is normalized so that
``h(0) = 0`` for polytropic gases and ``h(1) = 0`` for isothermal ones.

All functions broadcast over numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

POLYTROPIC = "polytropic"
ISOTHERMAL = "isothermal"

# relative width of the band below Sigma**2 in which the sonic density is returned
SONIC_SNAP = 1e-10


class GasDomainError(ValueError):
    """Raised when a state lies outside the domain of the gas law."""


class SupersonicBranchError(GasDomainError):
    """Raised when |grad psi|**2 exceeds Sigma**2, so no subsonic density exists."""


@dataclass(frozen=True)
class GasModel:
    """Barotropic gas law with normalized enthalpy.

    Parameters
    ----------
    kind : {"polytropic", "isothermal"}
    gamma : float
        Adiabatic exponent (polytropic only), must exceed 1.
    A : float
        Pressure scale in ``p = A rho**gamma`` (polytropic only).
    c : float
        Constant sound speed (isothermal only).
    """

    kind: str = POLYTROPIC
    gamma: float = 1.4
    A: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if self.kind == POLYTROPIC:
            if not self.gamma > 1.0:
                raise GasDomainError("gamma must exceed 1 for a polytropic gas")
            if not self.A > 0.0:
                raise GasDomainError("A must be positive for a polytropic gas")
        elif self.kind == ISOTHERMAL:
            if not self.c > 0.0:
                raise GasDomainError("sound speed c must be positive for an isothermal gas")
        else:
            raise GasDomainError(f"unknown gas kind {self.kind!r}")

    @classmethod
    def polytropic(cls, gamma, A):
        return cls(kind=POLYTROPIC, gamma=float(gamma), A=float(A))

    @classmethod
    def isothermal(cls, c):
        return cls(kind=ISOTHERMAL, c=float(c))

    @property
    def H0(self) -> float:
        """Infimum of the enthalpy; ``-inf`` for the isothermal law."""
        return 0.0 if self.kind == POLYTROPIC else -math.inf

    @property
    def enthalpy_unbounded_below(self) -> bool:
        return self.kind == ISOTHERMAL

    def pressure(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == POLYTROPIC:
            return self.A * rho**self.gamma
        return self.c**2 * rho

    def dpdrho(self, rho):
        """p'(rho), the squared sound speed."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == POLYTROPIC:
            return self.A * self.gamma * rho ** (self.gamma - 1.0)
        return np.full_like(rho, self.c**2)

    def d2pdrho2(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == POLYTROPIC:
            g = self.gamma
            return self.A * g * (g - 1.0) * rho ** (g - 2.0)
        return np.zeros_like(rho)

    def sound_speed(self, rho):
        return np.sqrt(self.dpdrho(rho))

    def h(self, rho):
        """Enthalpy without domain checks (internal fast path)."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == POLYTROPIC:
            g = self.gamma
            return self.A * g / (g - 1.0) * rho ** (g - 1.0)
        return self.c**2 * np.log(rho)

    def h_inverse(self, s):
        """Density with enthalpy ``s``."""
        s = np.asarray(s, dtype=float)
        if self.kind == POLYTROPIC:
            g = self.gamma
            return ((g - 1.0) * s / (self.A * g)) ** (1.0 / (g - 1.0))
        return np.exp(s / self.c**2)

    def check_bernoulli(self, s):
        s = np.asarray(s, dtype=float)
        if not self.enthalpy_unbounded_below and np.any(~(s > self.H0)):
            raise GasDomainError(
                f"Bernoulli value must exceed H0={self.H0} (got min {np.min(s)!r})"
            )
        return s


def enthalpy(gas: GasModel, rho):
    """Specific enthalpy ``h(rho)`` with the gas's normalization.

    Raises
    ------
    GasDomainError
        If any density is not positive.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0.0)):
        raise GasDomainError("density must be positive")
    return gas.h(rho)


@dataclass(frozen=True)
class CriticalState:
    """Maximum, critical (sonic) density, critical speed and momentum flux at ``s``."""

    s: object
    rho_max: object
    rho_crit: object
    speed_crit: object
    sigma: object


def _critical_arrays(gas: GasModel, s):
    if gas.kind == POLYTROPIC:
        g = gas.gamma
        rho_max = gas.h_inverse(s)
        h_crit = 2.0 * s / (g + 1.0)
        rho_crit = gas.h_inverse(h_crit)
        speed_crit = np.sqrt((g - 1.0) * h_crit)
    else:
        c2 = gas.c**2
        rho_max = np.exp(s / c2)
        rho_crit = np.exp(s / c2 - 0.5)
        speed_crit = np.full_like(s, gas.c)
    return rho_max, rho_crit, speed_crit, rho_crit * speed_crit


def critical_state(gas: GasModel, s) -> CriticalState:
    """Critical quantities for Bernoulli value(s) ``s``.

    ``sigma`` is ``rho_crit * sqrt(2 (s - h(rho_crit)))``, the largest momentum
    flux compatible with subsonic flow at Bernoulli value ``s``.
    """
    s = gas.check_bernoulli(s)
    rho_max, rho_crit, speed_crit, sigma = _critical_arrays(gas, s)
    if s.ndim == 0:
        rho_max, rho_crit, speed_crit, sigma = (
            float(rho_max), float(rho_crit), float(speed_crit), float(sigma)
        )
        s = float(s)
    return CriticalState(s, rho_max, rho_crit, speed_crit, sigma)


def sigma_squared(gas: GasModel, s):
    """Sigma(s)**2, vectorized and without the dataclass wrapper."""
    s = gas.check_bernoulli(s)
    return _critical_arrays(gas, s)[3] ** 2


def subsonic_density(gas: GasModel, M, s, *, rtol=1e-14, max_iter=200):
    """Subsonic root ``H(M, s)`` of ``h(rho) + M / (2 rho**2) = s``.

    The root is bracketed by the critical and the maximum density and found by
    Newton's method, with bisection whenever a step leaves the bracket.

    Parameters
    ----------
    M : array_like
        Squared momentum flux ``|grad psi|**2``, in ``[0, Sigma(s)**2]``.
    s : array_like
        Bernoulli value(s).

    Raises
    ------
    SupersonicBranchError
        If ``M`` exceeds ``Sigma(s)**2``.
    """
    s = gas.check_bernoulli(s)
    M = np.asarray(M, dtype=float)
    M, s = np.broadcast_arrays(M, s)
    shape = M.shape
    M = M.astype(float).ravel()
    s = s.astype(float).ravel()
    if np.any(M < 0.0):
        raise GasDomainError("momentum flux squared must be nonnegative")

    rho_max, rho_crit, _, sigma = _critical_arrays(gas, s)
    sig2 = sigma**2
    gap = sig2 - M
    if np.any(gap < -SONIC_SNAP * sig2):
        k = int(np.argmin(gap))
        raise SupersonicBranchError(
            f"M={M.flat[k]!r} exceeds Sigma^2={sig2.flat[k]!r} at s={s.flat[k]!r}"
        )
    sonic = gap < SONIC_SNAP * sig2

    lo = rho_crit.copy()
    hi = rho_max.copy()
    rho = rho_max.copy()
    scale = np.maximum(1.0, np.abs(s))
    active = ~sonic
    for _ in range(max_iter):
        if not np.any(active):
            break
        r = rho[active]
        Ma = M[active]
        f = gas.h(r) + Ma / (2.0 * r * r) - s[active]
        fp = (gas.dpdrho(r) * r * r - Ma) / r**3
        up = f > 0.0
        hi_a = np.where(up, r, hi[active])
        lo_a = np.where(up, lo[active], r)
        with np.errstate(divide="ignore", invalid="ignore"):
            r_new = r - f / fp
        outside = ~((r_new > lo_a) & (r_new < hi_a)) | ~np.isfinite(r_new)
        r_new = np.where(outside, 0.5 * (lo_a + hi_a), r_new)
        hi[active] = hi_a
        lo[active] = lo_a
        rho[active] = r_new
        done = (np.abs(f) <= rtol * scale[active]) | (hi_a - lo_a <= 4e-16 * hi_a)
        idx = np.flatnonzero(active)
        # converged entries keep the previous iterate, which met the tolerance
        rho[idx[done]] = r[done]
        active[idx[done]] = False

    rho = np.where(sonic, rho_crit, rho)
    if not shape:
        return float(rho[0])
    return rho.reshape(shape)


def subsonic_density_partials(gas: GasModel, M, s, rho=None):
    """Return ``(dH/dM, dH/ds)`` on the subsonic branch.

    ``dH/dM = H / (2 (M - H^2 c^2)) < 0`` and ``dH/ds = H^3 / (H^2 c^2 - M) > 0``.
    Both are undefined on the sonic boundary ``M = Sigma(s)**2``.
    """
    if rho is None:
        rho = subsonic_density(gas, M, s)
    rho = np.asarray(rho, dtype=float)
    M = np.asarray(M, dtype=float)
    denom = rho * rho * gas.dpdrho(rho) - M
    if np.any(denom <= SONIC_SNAP * rho * rho * gas.dpdrho(rho)):
        raise GasDomainError("partials of H are undefined at the sonic boundary")
    dH_dM = rho / (2.0 * (M - rho * rho * gas.dpdrho(rho)))
    dH_ds = rho**3 / denom
    if dH_dM.ndim == 0:
        return float(dH_dM), float(dH_ds)
    return dH_dM, dH_ds
