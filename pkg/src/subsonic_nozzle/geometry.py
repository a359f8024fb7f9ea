"""Periodic nozzle walls and the shear map onto one nozzle period.

Walls are graphs ``x2 = f_i(x1)`` given as truncated Fourier series of period
``L``.  The computational rectangle ``[0, L] x [0, 1]`` is mapped onto one
period by ``x1 = xi``, ``x2 = f1(xi) + eta (f2(xi) - f1(xi))``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

log = logging.getLogger(__name__)

GAP_SAMPLES = 4096


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class WallSeries:
    """``mean + sum_k cos[k-1] cos(2 pi k x / L) + sin[k-1] sin(2 pi k x / L)``."""

    period: float
    mean: float = 0.0
    cos: tuple = ()
    sin: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "cos", tuple(float(a) for a in self.cos))
        object.__setattr__(self, "sin", tuple(float(b) for b in self.sin))

    @property
    def nmodes(self):
        return max(len(self.cos), len(self.sin))

    def _coeffs(self):
        n = self.nmodes
        a = np.zeros(n)
        b = np.zeros(n)
        a[: len(self.cos)] = self.cos
        b[: len(self.sin)] = self.sin
        return a, b

    def __call__(self, x, order=0):
        if order not in (0, 1, 2):
            raise ValueError("derivative order must be 0, 1 or 2")
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x) + (self.mean if order == 0 else 0.0)
        a, b = self._coeffs()
        w = 2.0 * np.pi / self.period
        for k in range(1, self.nmodes + 1):
            kw = k * w
            c, s = np.cos(kw * x), np.sin(kw * x)
            ak, bk = a[k - 1], b[k - 1]
            if order == 0:
                out = out + ak * c + bk * s
            elif order == 1:
                out = out + kw * (bk * c - ak * s)
            else:
                out = out - kw * kw * (ak * c + bk * s)
        return out

    def bound(self, order):
        """Sum of coefficient magnitudes, a sup-norm bound on the derivative."""
        a, b = self._coeffs()
        k = np.arange(1, self.nmodes + 1) * 2.0 * np.pi / self.period
        tot = float(np.sum((np.abs(a) + np.abs(b)) * k**order))
        return tot + (abs(self.mean) if order == 0 else 0.0)

    def shifted(self, offset):
        """Series of ``x -> f(x + offset)``."""
        a, b = self._coeffs()
        phi = np.arange(1, self.nmodes + 1) * 2.0 * np.pi / self.period * offset
        return WallSeries(
            self.period,
            self.mean,
            tuple(a * np.cos(phi) + b * np.sin(phi)),
            tuple(b * np.cos(phi) - a * np.sin(phi)),
        )

    def scaled(self, factor, shift=0.0):
        """Series of ``x -> factor * (f(x / factor) + shift)``."""
        return WallSeries(
            self.period * factor,
            (self.mean + shift) * factor,
            tuple(factor * a for a in self.cos),
            tuple(factor * b for b in self.sin),
        )


@dataclass(frozen=True)
class NozzleGeometry:
    period: float
    f1: WallSeries
    f2: WallSeries
    normalized: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not self.period > 0:
            raise GeometryError("period must be positive")
        for w in (self.f1, self.f2):
            if abs(w.period - self.period) > 1e-14 * self.period:
                raise GeometryError("wall series period differs from nozzle period")
        if not self.gap_min > 0:
            raise GeometryError(
                f"walls touch or cross: inf(f2 - f1) estimate {self.gap_min:.3e} <= 0"
            )

    @classmethod
    def from_coefficients(cls, period, f1=None, f2=None, normalize=True):
        """Build a nozzle from ``{"mean", "cos", "sin"}`` mappings.

        With ``normalize`` the walls are shifted so ``f1(0) = 0`` and the
        nozzle is rescaled (isotropically, period included) so ``f2(0) = 1``.
        """
        f1 = dict(f1 or {"mean": 0.0})
        f2 = dict(f2 or {"mean": 1.0})
        w1 = WallSeries(float(period), float(f1.get("mean", 0.0)), f1.get("cos", ()), f1.get("sin", ()))
        w2 = WallSeries(float(period), float(f2.get("mean", 0.0)), f2.get("cos", ()), f2.get("sin", ()))
        if normalize:
            y1 = float(w1(0.0))
            gap0 = float(w2(0.0)) - y1
            if gap0 <= 0:
                raise GeometryError("f2(0) must exceed f1(0)")
            if abs(y1) > 1e-15 or abs(gap0 - 1.0) > 1e-15:
                log.info("normalizing nozzle: shift %.6g, scale %.6g", -y1, 1.0 / gap0)
                w1 = w1.scaled(1.0 / gap0, -y1)
                w2 = w2.scaled(1.0 / gap0, -y1)
                period = float(period) / gap0
        return cls(float(period), w1, w2, normalized=normalize)

    @classmethod
    def flat(cls, period=1.0):
        return cls.from_coefficients(period, {"mean": 0.0}, {"mean": 1.0})

    def wall(self, i, x1, order=0):
        if i == 1:
            return self.f1(x1, order)
        if i == 2:
            return self.f2(x1, order)
        raise ValueError("wall index must be 1 or 2")

    def gap(self, x1, order=0):
        return self.f2(x1, order) - self.f1(x1, order)

    @cached_property
    def gap_min(self) -> float:
        """Sampled minimum of ``f2 - f1`` less a derivative-bound margin."""
        x = np.linspace(0.0, self.period, GAP_SAMPLES, endpoint=False)
        lip = self.f1.bound(1) + self.f2.bound(1)
        return float(np.min(self.gap(x)) - 0.5 * lip * self.period / GAP_SAMPLES)

    @cached_property
    def wall_norm(self) -> float:
        return max(sum(w.bound(k) for k in range(3)) for w in (self.f1, self.f2))

    def map_to_physical(self, xi, eta):
        """Return ``x1, x2`` and the Jacobian ``d(x1, x2)/d(xi, eta)``.

        The Jacobian has shape ``(..., 2, 2)`` with rows ``(x1, x2)`` and
        columns ``(xi, eta)``; its determinant is ``f2 - f1``.
        """
        xi, eta = np.broadcast_arrays(np.asarray(xi, float), np.asarray(eta, float))
        y1 = self.f1(xi)
        g = self.gap(xi)
        slope = self.f1(xi, 1) + eta * self.gap(xi, 1)
        jac = np.zeros(xi.shape + (2, 2))
        jac[..., 0, 0] = 1.0
        jac[..., 1, 0] = slope
        jac[..., 1, 1] = g
        return xi.copy(), y1 + eta * g, jac

    def shifted(self, offset):
        """The same nozzle with its period window starting at ``x1 = offset``."""
        return NozzleGeometry(
            self.period, self.f1.shifted(offset), self.f2.shifted(offset), normalized=False
        )


def wall_eval(geom: NozzleGeometry, i, x1, order=0):
    return geom.wall(i, x1, order)


def map_to_physical(geom: NozzleGeometry, xi, eta):
    return geom.map_to_physical(xi, eta)
