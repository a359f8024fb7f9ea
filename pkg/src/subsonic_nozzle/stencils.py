"""Finite-difference derivative operators on the (xi, eta) node array.

Arrays are shaped ``(nx, ny + 1)``: axis 0 runs over the periodic ``xi``
nodes, axis 1 over ``eta`` from the lower wall (``j = 0``) to the upper
wall (``j = ny``).

Three families are kept deliberately separate:

* ``solver``: second-order centred, used inside the nonlinear iteration.
  The wall rows use a cubically extrapolated ghost value, so the leading
  error term is the same smooth multiple of ``h**2`` up to the walls.
* ``sbp``: diagonal-norm summation-by-parts operators (interior order 6, 4
  or 2, picked from the node count), used to reconstruct velocities so that
  column sums with ``sbp_weights`` telescope exactly.
* ``diag``: second-order centred with fourth-order one-sided boundary rows,
  used only by the verification suite.
"""
from __future__ import annotations

import numpy as np

# sixth-order interior, third-order boundary closure
_SBP6_BOUNDARY = np.array(
    [
        [-21600 / 13649, 104009 / 54596, 30443 / 81894, -33311 / 27298, 16863 / 27298,
         -15025 / 163788, 0.0, 0.0, 0.0],
        [-104009 / 240260, 0.0, -311 / 72078, 20229 / 24026, -24337 / 48052, 36661 / 360390,
         0.0, 0.0, 0.0],
        [-30443 / 162660, 311 / 32532, 0.0, -11155 / 16266, 41287 / 32532, -21999 / 54220,
         0.0, 0.0, 0.0],
        [33311 / 107180, -20229 / 21436, 485 / 1398, 0.0, 4147 / 21436, 25427 / 321540,
         72 / 5359, 0.0, 0.0],
        [-16863 / 78770, 24337 / 31508, -41287 / 47262, -4147 / 15754, 0.0, 342523 / 472620,
         -1296 / 7877, 144 / 7877, 0.0],
        [15025 / 525612, -36661 / 262806, 21999 / 87602, -25427 / 262806, -342523 / 525612, 0.0,
         32400 / 43801, -6480 / 43801, 720 / 43801],
    ]
)
_SBP6_NORM = np.array(
    [13649 / 43200, 12013 / 8640, 2711 / 4320, 5359 / 4320, 7877 / 8640, 43801 / 43200]
)

# fourth-order interior, second-order boundary closure
_SBP4_BOUNDARY = np.array(
    [
        [-24.0 / 17, 59.0 / 34, -4.0 / 17, -3.0 / 34, 0.0, 0.0],
        [-1.0 / 2, 0.0, 1.0 / 2, 0.0, 0.0, 0.0],
        [4.0 / 43, -59.0 / 86, 0.0, 59.0 / 86, -4.0 / 43, 0.0],
        [3.0 / 98, 0.0, -59.0 / 98, 0.0, 32.0 / 49, -4.0 / 49],
    ]
)
_SBP4_NORM = np.array([17.0 / 48, 59.0 / 48, 43.0 / 48, 49.0 / 48])

_SBP = {
    6: (_SBP6_BOUNDARY, _SBP6_NORM, (3.0 / 4, -3.0 / 20, 1.0 / 60)),
    4: (_SBP4_BOUNDARY, _SBP4_NORM, (2.0 / 3, -1.0 / 12)),
    2: (np.array([[-1.0, 1.0]]), np.array([0.5]), (0.5,)),
}

# one-sided fourth-order first derivative at rows 0 and 1
_ONE_SIDED4 = np.array(
    [
        [-25.0, 48.0, -36.0, 16.0, -3.0],
        [-3.0, -10.0, 18.0, -6.0, 1.0],
    ]
) / 12.0


def sbp_order(n):
    """Interior order of the widest SBP operator that fits ``n`` nodes."""
    if n >= 12:
        return 6
    if n >= 9:
        return 4
    if n >= 3:
        return 2
    raise ValueError("at least 3 nodes in eta are required")


def ddxi_periodic2(f, h):
    return (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0)) / (2.0 * h)


def ddxi_periodic4(f, h):
    return (
        8.0 * (np.roll(f, -1, axis=0) - np.roll(f, 1, axis=0))
        - (np.roll(f, -2, axis=0) - np.roll(f, 2, axis=0))
    ) / (12.0 * h)


def ddeta_solver(f, h):
    """Centred differences; the wall rows use the ghost value ``4f0 - 6f1 + 4f2 - f3``."""
    d = np.empty_like(f)
    d[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / (2.0 * h)
    d[..., 0] = (-4.0 * f[..., 0] + 7.0 * f[..., 1] - 4.0 * f[..., 2] + f[..., 3]) / (2.0 * h)
    d[..., -1] = (4.0 * f[..., -1] - 7.0 * f[..., -2] + 4.0 * f[..., -3] - f[..., -4]) / (2.0 * h)
    return d


def ddeta_sbp(f, h, order=None):
    """Diagonal-norm SBP first derivative along the last axis."""
    n = f.shape[-1]
    order = sbp_order(n) if order is None else order
    if order > sbp_order(n):
        raise ValueError(f"SBP order {order} needs more than {n} nodes")
    bnd, _, inner = _SBP[order]
    nb, nc = bnd.shape
    d = np.zeros_like(f)
    for o, c in enumerate(inner, start=1):
        d[..., nb:n - nb] += c * (f[..., nb + o:n - nb + o] - f[..., nb - o:n - nb - o])
    for r in range(nb):
        d[..., r] = f[..., :nc] @ bnd[r]
        d[..., n - 1 - r] = -(f[..., ::-1][..., :nc] @ bnd[r])
    return d / h


def sbp_weights(n, h, order=None):
    """Diagonal norm (quadrature weights) matching :func:`ddeta_sbp`."""
    order = sbp_order(n) if order is None else order
    norm = _SBP[order][1]
    w = np.ones(n)
    w[: norm.size] = norm
    w[n - norm.size:] = norm[::-1]
    return w * h


def ddeta_onesided4(f, h):
    """Fourth-order derivative everywhere: centred interior, one-sided near walls."""
    n = f.shape[-1]
    if n < 5:
        raise ValueError("at least 5 nodes in eta are required")
    d = np.empty_like(f)
    d[..., 2:-2] = (
        8.0 * (f[..., 3:-1] - f[..., 1:-3]) - (f[..., 4:] - f[..., :-4])
    ) / 12.0
    for r in range(2):
        d[..., r] = f[..., :5] @ _ONE_SIDED4[r]
        d[..., n - 1 - r] = -(f[..., ::-1][..., :5] @ _ONE_SIDED4[r])
    return d / h


def ddeta_diag(f, h):
    """Centred second-order interior, one-sided fourth-order on the wall rows."""
    n = f.shape[-1]
    if n < 5:
        raise ValueError("at least 5 nodes in eta are required")
    d = np.empty_like(f)
    d[..., 1:-1] = (f[..., 2:] - f[..., :-2]) / 2.0
    d[..., 0] = f[..., :5] @ _ONE_SIDED4[0]
    d[..., -1] = -(f[..., ::-1][..., :5] @ _ONE_SIDED4[0])
    return d / h


def physical_gradient(f_xi, f_eta, gap, slope):
    """Chain rule for the shear map: returns ``(d/dx1, d/dx2)``.

    ``gap`` is ``f2 - f1`` and ``slope`` is ``dx2/dxi = f1' + eta (f2' - f1')``.
    """
    return f_xi - slope / gap * f_eta, f_eta / gap
