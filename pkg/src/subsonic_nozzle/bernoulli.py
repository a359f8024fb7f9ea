"""Bernoulli function as a function of the stream value.

The inflow momentum profile ``W(x2) = (rho u)(0, x2)`` defines the map
``kappa`` from stream values to inflow heights through
``psi = int_0^kappa(psi) W``.  Composing the inflow Bernoulli datum with
``kappa`` gives ``B(psi)`` on ``[0, m]``, which is then extended to the whole
real line with a Lipschitz derivative that vanishes outside ``[-m, 2m]``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator

from .gas import GasModel

log = logging.getLogger(__name__)

ENDPOINT_TOL = 1e-12
EPS_SAMPLES = 2049


class ProfileError(ValueError):
    """An inflow profile or Bernoulli datum violates an admissibility condition."""


class BernoulliDatum:
    """Inflow Bernoulli function ``B0`` on ``[0, 1]`` with its derivative."""

    def __init__(self, value, deriv, constant=None, label="B0"):
        self._value = value
        self._deriv = deriv
        self.constant = constant
        self.label = label

    @classmethod
    def from_constant(cls, b):
        b = float(b)
        return cls(
            lambda x: np.full_like(np.asarray(x, float), b),
            lambda x: np.zeros_like(np.asarray(x, float)),
            constant=b,
            label=f"constant {b!r}",
        )

    @classmethod
    def from_samples(cls, samples):
        """Monotone-cubic interpolant of samples on a uniform grid of ``[0, 1]``."""
        y = np.asarray(samples, dtype=float)
        if y.ndim != 1 or y.size < 2:
            raise ProfileError("B0 samples need at least two values")
        if np.all(y == y[0]):
            return cls.from_constant(y[0])
        p = PchipInterpolator(np.linspace(0.0, 1.0, y.size), y)
        dp = p.derivative()
        return cls(p, dp, label=f"{y.size} samples")

    @classmethod
    def from_functions(cls, value, deriv, label="analytic"):
        return cls(value, deriv, label=label)

    @classmethod
    def sine(cls, bbar, amplitude):
        """``bbar + amplitude * sin(pi x)``; satisfies the endpoint conditions for amplitude >= 0."""
        bbar, a = float(bbar), float(amplitude)
        if a == 0.0:
            return cls.from_constant(bbar)
        return cls(
            lambda x: bbar + a * np.sin(np.pi * np.asarray(x, float)),
            lambda x: a * np.pi * np.cos(np.pi * np.asarray(x, float)),
            label=f"{bbar!r} + {a!r} sin(pi x2)",
        )

    @property
    def is_constant(self):
        return self.constant is not None

    def __call__(self, x):
        return self._value(x)

    def deriv(self, x):
        return self._deriv(x)

    def check_endpoints(self):
        d0 = float(self.deriv(0.0))
        d1 = float(self.deriv(1.0))
        errors = []
        if d0 < -ENDPOINT_TOL:
            errors.append(f"B0'(0) = {d0:.6g} must be >= 0")
        if d1 > ENDPOINT_TOL:
            errors.append(f"B0'(1) = {d1:.6g} must be <= 0")
        if errors:
            raise ProfileError("; ".join(errors))

    def minimum(self):
        x = np.linspace(0.0, 1.0, EPS_SAMPLES)
        return float(np.min(self(x)))

    def mean(self):
        x = np.linspace(0.0, 1.0, EPS_SAMPLES)
        y = self(x)
        return float(np.sum(y[1:] + y[:-1]) / (2 * (EPS_SAMPLES - 1)))

    def epsilon(self, bbar):
        """Sampled estimate of ``||B0 - bbar||`` in ``C^{1,1}``."""
        x = np.linspace(0.0, 1.0, EPS_SAMPLES)
        dev = np.max(np.abs(self(x) - bbar))
        d = self.deriv(x)
        lip = np.max(np.abs(np.diff(d))) * (EPS_SAMPLES - 1)
        return float(max(dev, np.max(np.abs(d)), lip))


@dataclass(frozen=True)
class InflowProfile:
    """Inflow momentum profile ``W`` sampled on a uniform grid of ``[0, 1]``."""

    values: np.ndarray
    m: float
    sigma0: float | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_samples(cls, values, m=None, sigma0=None, renormalize=False, rtol=1e-10):
        """Validated profile.

        ``renormalize`` rescales the samples so their integral is exactly ``m``;
        otherwise the integral must already match ``m`` to ``rtol``.
        """
        v = np.array(values, dtype=float)
        if v.ndim != 1 or v.size < 3:
            raise ProfileError("W needs at least three samples")
        if not np.all(np.isfinite(v)):
            raise ProfileError("W has non-finite samples")
        integral = _pchip(v).integrate(0.0, 1.0)
        if m is None:
            m = integral
        m = float(m)
        if renormalize:
            if integral <= 0:
                raise ProfileError("W integral is not positive; cannot renormalize")
            log.debug("renormalizing W: integral %.17g -> %.17g", integral, m)
            v = v * (m / integral)
        elif abs(integral - m) > rtol * max(abs(m), 1e-300):
            raise ProfileError(f"integral of W is {integral!r}, expected mass flux {m!r}")
        floor = 0.0 if sigma0 is None else 0.5 * sigma0
        if np.min(v) <= floor:
            cond = "W > 0" if sigma0 is None else f"W > sigma0/2 = {floor:.6g}"
            raise ProfileError(f"inflow profile not admissible: {cond} fails (min W = {np.min(v):.6g})")
        return cls(v, m, sigma0)

    @classmethod
    def uniform(cls, m, n):
        return cls.from_samples(np.full(n, float(m)), m)

    @property
    def x(self):
        return np.linspace(0.0, 1.0, self.values.size)

    @cached_property
    def interpolant(self):
        return _pchip(self.values)

    def __call__(self, x):
        return self.interpolant(x)


def _pchip(values):
    return PchipInterpolator(np.linspace(0.0, 1.0, len(values)), values)


class Kappa:
    """Monotone map ``kappa: [0, m] -> [0, 1]`` inverting ``y -> int_0^y W``."""

    def __init__(self, profile: InflowProfile):
        self.profile = profile
        self.m = profile.m
        self._W = profile.interpolant
        self._F = self._W.antiderivative()
        self._knots = self._W.x
        self._Fk = self._F(self._knots)
        self.m_exact = float(self._Fk[-1])

    def cumulative(self, y):
        return self._F(y)

    def __call__(self, psi):
        psi = np.asarray(psi, dtype=float)
        scalar = psi.ndim == 0
        p = np.clip(np.atleast_1d(psi), 0.0, self.m_exact)
        k = np.clip(np.searchsorted(self._Fk, p, side="right") - 1, 0, len(self._knots) - 2)
        lo = self._knots[k]
        hi = self._knots[k + 1]
        w = self._W(lo)
        y = lo + (p - self._Fk[k]) / np.where(w > 0, w, 1.0)
        y = np.clip(y, lo, hi)
        for _ in range(60):
            f = self._F(y) - p
            lo = np.where(f < 0, y, lo)
            hi = np.where(f > 0, y, hi)
            y_new = y - f / self._W(y)
            bad = ~((y_new >= lo) & (y_new <= hi))
            y_new = np.where(bad, 0.5 * (lo + hi), y_new)
            if np.max(np.abs(y_new - y)) <= 1e-15:
                y = y_new
                break
            y = y_new
        if scalar:
            return float(y[0])
        return y

    def deriv(self, psi):
        """``kappa'(psi) = 1 / W(kappa(psi))``."""
        return 1.0 / self._W(self(psi))


def build_kappa(profile: InflowProfile) -> Kappa:
    return Kappa(profile)


class BernoulliProfile:
    """``B(psi) = B0(kappa(psi))`` on ``[0, m]`` and its extension to the real line.

    Outside ``[0, m]`` the derivative is continued linearly to zero over one
    flux width: on ``[m, 2m]`` it is ``B'(m)(2m - s)/m`` and on ``[-m, 0]`` it
    is ``B'(0)(s + m)/m``; it vanishes beyond.
    """

    def __init__(self, B0: BernoulliDatum, kappa: Kappa | None, m, Bbar=None):
        self.B0 = B0
        self.kappa = kappa
        self.m = float(m)
        self.Bbar = B0.mean() if Bbar is None else float(Bbar)
        if B0.is_constant:
            self._b0 = self._bm = B0.constant
            self._d0 = self._dm = 0.0
        else:
            if kappa is None or self.m <= 0:
                raise ProfileError("a nonconstant B0 needs kappa and a positive mass flux")
            B0.check_endpoints()
            self._b0 = float(self.on_range(0.0))
            self._bm = float(self.on_range(self.m))
            self._d0 = float(self.deriv_on_range(0.0))
            self._dm = float(self.deriv_on_range(self.m))
        self.eps = B0.epsilon(self.Bbar)

    @property
    def is_constant(self):
        return self.B0.is_constant

    @property
    def B_check(self):
        """Minimum of ``B0`` over the inflow section."""
        return self.B0.constant if self.is_constant else self.B0.minimum()

    def on_range(self, psi):
        if self.is_constant:
            return np.full_like(np.asarray(psi, float), self.B0.constant)
        return self.B0(self.kappa(psi))

    def deriv_on_range(self, psi):
        if self.is_constant:
            return np.zeros_like(np.asarray(psi, float))
        y = self.kappa(psi)
        return self.B0.deriv(y) / self.kappa.profile(y)

    def __call__(self, s):
        """Extended Bernoulli function at stream values ``s``."""
        s = np.asarray(s, dtype=float)
        if self.is_constant:
            return np.full_like(s, self.B0.constant)
        m = self.m
        inner = self.on_range(np.clip(s, 0.0, m))
        sl = np.clip(s, -m, 0.0)
        left = self._b0 - self._d0 / (2.0 * m) * (m * m - (sl + m) ** 2)
        sr = np.clip(s, m, 2.0 * m)
        right = self._bm + self._dm / m * (2.0 * m * (sr - m) - 0.5 * (sr * sr - m * m))
        return np.where(s < 0.0, left, np.where(s > m, right, inner))

    def deriv(self, s):
        """Extended derivative (the Lipschitz function ``g``)."""
        s = np.asarray(s, dtype=float)
        if self.is_constant:
            return np.zeros_like(s)
        m = self.m
        inner = self.deriv_on_range(np.clip(s, 0.0, m))
        left = np.where(s <= -m, 0.0, self._d0 * (s + m) / m)
        right = np.where(s >= 2.0 * m, 0.0, self._dm * (2.0 * m - s) / m)
        return np.where(s < 0.0, left, np.where(s > m, right, inner))

    def minimum(self):
        if self.is_constant:
            return self.B0.constant
        psi = np.linspace(0.0, self.m, EPS_SAMPLES)
        tails = (self._b0 - 0.5 * self._d0 * self.m, self._bm + 0.5 * self._dm * self.m)
        return float(min(np.min(self.on_range(psi)), *tails))

    def maximum(self):
        if self.is_constant:
            return self.B0.constant
        psi = np.linspace(0.0, self.m, EPS_SAMPLES)
        return float(np.max(self.on_range(psi)))

    def check_gas(self, gas: GasModel):
        if not gas.enthalpy_unbounded_below and not self.minimum() > gas.H0:
            raise ProfileError(
                f"extended Bernoulli function reaches {self.minimum():.6g} <= H0 = {gas.H0}"
            )


def compose_and_extend(B0: BernoulliDatum, kappa: Kappa | None, m, Bbar=None, gas=None,
                       eps_warn=None) -> BernoulliProfile:
    prof = BernoulliProfile(B0, kappa, m, Bbar)
    if gas is not None:
        prof.check_gas(gas)
    if eps_warn is not None and prof.eps > eps_warn:
        log.warning("Bernoulli variation eps=%.3g exceeds warning threshold %.3g", prof.eps, eps_warn)
    return prof


def constant_profile(Bbar, m) -> BernoulliProfile:
    return BernoulliProfile(BernoulliDatum.from_constant(Bbar), None, m, Bbar)
