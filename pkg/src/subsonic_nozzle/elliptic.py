"""Nonlinear elliptic solve for the stream function on one nozzle period.

The equation ``div(grad psi / rho~) = rho~ B~'(psi)`` is discretized on the
mapped grid by bilinear (Q1) elements in ``(xi, eta)``.  The metric tensor of
the shear map is folded into precomputed element matrices, so each outer
iteration only rescales them by the cell value of ``1 / rho~``.  Dirichlet
data ``psi = 0`` and ``psi = t`` hold on the walls; ``xi`` is periodic.

The density ``rho~`` is the subsonic root evaluated at the sonic-truncated
momentum flux (see :func:`truncate_speed`), so it is defined for any iterate.
"""
from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from . import stencils
from .bernoulli import BernoulliProfile
from .gas import GasModel, sigma_squared, subsonic_density
from .geometry import NozzleGeometry

log = logging.getLogger(__name__)

MIN_CELLS = 8
AMG_SEED = 0
# pyamg estimates spectral radii from np.random vectors; the hierarchy is built
# under a fixed seed so every solve is reproducible, and the lock keeps that
# global state private to one build at a time
_AMG_LOCK = threading.Lock()
_GAUSS = (0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0))


class SolverError(RuntimeError):
    pass


class LinearSolveError(SolverError):
    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = history


class ConvergenceError(SolverError):
    """Outer iteration hit its limit; ``field`` holds the last iterate."""

    def __init__(self, msg, field):
        super().__init__(msg)
        self.field = field


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``nx`` periodic cells in ``xi`` and ``ny`` cells in ``eta``."""

    nx: int
    ny: int
    period: float = 1.0

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid needs at least 2 cells per direction")

    @property
    def hxi(self):
        return self.period / self.nx

    @property
    def heta(self):
        return 1.0 / self.ny

    @property
    def xi(self):
        return np.arange(self.nx) * self.hxi

    @property
    def eta(self):
        return np.linspace(0.0, 1.0, self.ny + 1)

    @property
    def shape(self):
        return (self.nx, self.ny + 1)

    @classmethod
    def for_geometry(cls, geom: NozzleGeometry, nx, ny):
        return cls(int(nx), int(ny), geom.period)


@dataclass(frozen=True)
class TruncationParams:
    """Sonic truncation: ``zeta(d) = d`` below ``-theta0/4``, ``-theta0/8`` above ``-theta0/8``."""

    theta0: float

    def __post_init__(self):
        if not self.theta0 > 0:
            raise ValueError("theta0 must be positive")

    def zeta(self, d):
        d = np.asarray(d, dtype=float)
        a = -0.25 * self.theta0
        b = -0.125 * self.theta0
        w = b - a
        t = np.clip((d - a) / w, 0.0, 1.0)
        # cubic Hermite with zeta(a)=a, zeta'(a)=1, zeta(b)=b, zeta'(b)=0
        blend = (2 * t**3 - 3 * t**2 + 1) * a + (t**3 - 2 * t**2 + t) * w + (-2 * t**3 + 3 * t**2) * b
        return np.where(d < a, d, np.where(d >= b, b, blend))

    def zeta_prime(self, d):
        d = np.asarray(d, dtype=float)
        a = -0.25 * self.theta0
        b = -0.125 * self.theta0
        t = np.clip((d - a) / (b - a), 0.0, 1.0)
        blend = (1.0 - t) * (1.0 + 3.0 * t)
        return np.where(d < a, 1.0, np.where(d >= b, 0.0, blend))


def truncate_speed(trunc: TruncationParams, q2, sigma2):
    """``zeta(q2 - sigma2) + sigma2``; never exceeds ``sigma2 - theta0/8``."""
    q2 = np.asarray(q2, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    return trunc.zeta(q2 - sigma2) + sigma2


@dataclass
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 500
    relax: float = 0.7
    theta0: float | None = None
    linear_rtol: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.relax <= 1.0:
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass
class StreamField:
    psi: np.ndarray
    t: float
    grid: Grid
    iterations: int
    residual: float
    margin: float
    theta0: float
    converged: bool = True
    near_sonic: bool = False
    rho: np.ndarray | None = None
    residual_history: list = field(default_factory=list)

    @property
    def accepted(self):
        return self.converged and not self.near_sonic


class Discretization:
    """Geometry-dependent pieces of the Q1 operator on one grid."""

    def __init__(self, geom: NozzleGeometry, grid: Grid):
        if abs(grid.period - geom.period) > 1e-12 * geom.period:
            raise ValueError("grid period does not match nozzle period")
        self.geom = geom
        self.grid = grid
        nx, ny = grid.nx, grid.ny
        hxi, heta = grid.hxi, grid.heta
        xi, eta = grid.xi, grid.eta

        self.gap = geom.gap(xi)
        self.slope = geom.f1(xi, 1)[:, None] + eta[None, :] * geom.gap(xi, 1)[:, None]
        self.area = (self.gap * hxi * heta)[:, None] * np.ones((1, ny + 1))
        xc = xi + 0.5 * hxi
        ec = eta[:-1] + 0.5 * heta
        self.gap_c = geom.gap(xc)[:, None]
        self.slope_c = geom.f1(xc, 1)[:, None] + ec[None, :] * geom.gap(xc, 1)[:, None]
        self.Ke = self._element_matrices()

        node = np.arange(nx * (ny + 1)).reshape(nx, ny + 1)
        ip = np.roll(np.arange(nx), -1)
        corners = np.stack(
            [node[:, :-1], node[ip, :-1], node[:, 1:], node[ip, 1:]], axis=-1
        )  # (nx, ny, 4)
        self.rows = np.repeat(corners[..., :, None], 4, axis=-1).ravel()
        self.cols = np.repeat(corners[..., None, :], 4, axis=-2).ravel()
        self.nnodes = nx * (ny + 1)

        jrow = self.rows % (ny + 1)
        jcol = self.cols % (ny + 1)
        row_int = (jrow > 0) & (jrow < ny)
        col_int = (jcol > 0) & (jcol < ny)
        to_int = np.full(self.nnodes, -1)
        interior = (node[:, 1:-1]).ravel()
        to_int[interior] = np.arange(interior.size)
        self.interior = interior
        self.nint = interior.size
        self.mask_ii = row_int & col_int
        self.mask_ib = row_int & ~col_int
        self.ii_rows = to_int[self.rows[self.mask_ii]]
        self.ii_cols = to_int[self.cols[self.mask_ii]]
        self.ib_rows = to_int[self.rows[self.mask_ib]]
        self.ib_cols = self.cols[self.mask_ib]

    def _element_matrices(self):
        g = self.grid
        hxi, heta = g.hxi, g.heta
        Ke = np.zeros((g.nx, g.ny, 4, 4))
        eta0 = g.eta[:-1]
        for a in _GAUSS:
            xq = g.xi + a * hxi
            gq = self.geom.gap(xq)[:, None]
            for b in _GAUSS:
                eq = eta0 + b * heta
                sq = self.geom.f1(xq, 1)[:, None] + eq[None, :] * self.geom.gap(xq, 1)[:, None]
                dxi = np.array([-(1 - b), 1 - b, -b, b]) / hxi
                deta = np.array([-(1 - a), -a, 1 - a, a]) / heta
                k11 = gq * np.ones_like(sq)
                k12 = -sq
                k22 = (1.0 + sq * sq) / gq
                Ke += 0.25 * hxi * heta * (
                    k11[..., None, None] * np.outer(dxi, dxi)
                    + k12[..., None, None] * (np.outer(dxi, deta) + np.outer(deta, dxi))
                    + k22[..., None, None] * np.outer(deta, deta)
                )
        return Ke

    def nodal_gradient(self, psi):
        g = self.grid
        p_xi = stencils.ddxi_periodic2(psi, g.hxi)
        p_eta = stencils.ddeta_solver(psi, g.heta)
        return stencils.physical_gradient(p_xi, p_eta, self.gap[:, None], self.slope)

    def cell_values(self, psi):
        """Cell-centre ``psi`` and physical gradient from the bilinear interpolant."""
        g = self.grid
        p0 = psi[:, :-1]
        p1 = np.roll(psi, -1, axis=0)[:, :-1]
        p2 = psi[:, 1:]
        p3 = np.roll(psi, -1, axis=0)[:, 1:]
        pc = 0.25 * (p0 + p1 + p2 + p3)
        p_xi = (p1 + p3 - p0 - p2) / (2.0 * g.hxi)
        p_eta = (p2 + p3 - p0 - p1) / (2.0 * g.heta)
        d1, d2 = stencils.physical_gradient(p_xi, p_eta, self.gap_c, self.slope_c)
        return pc, d1 * d1 + d2 * d2

    def apply(self, coef_c, psi):
        """Full (Neumann) stiffness with cell coefficients applied to ``psi``."""
        data = (self.Ke * coef_c[..., None, None]).ravel()
        return np.bincount(self.rows, data * psi.ravel()[self.cols], minlength=self.nnodes).reshape(psi.shape)

    def edge_matrix(self, coef_c):
        """Assembled full stiffness matrix (CSR), used for flux bookkeeping."""
        data = (self.Ke * coef_c[..., None, None]).ravel()
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=(self.nnodes, self.nnodes))

    def interior_system(self, coef_c, psi):
        data = (self.Ke * coef_c[..., None, None]).ravel()
        A = sp.csr_matrix(
            (data[self.mask_ii], (self.ii_rows, self.ii_cols)), shape=(self.nint, self.nint)
        )
        bc = np.bincount(
            self.ib_rows, data[self.mask_ib] * psi.ravel()[self.ib_cols], minlength=self.nint
        )
        return A, -bc


@dataclass
class _State:
    rho: np.ndarray
    rhs: np.ndarray
    q2: np.ndarray
    sigma2: np.ndarray
    Mt: np.ndarray
    B: np.ndarray
    rho_c: np.ndarray


def _evaluate(disc: Discretization, gas: GasModel, bprof: BernoulliProfile, trunc, psi):
    d1, d2 = disc.nodal_gradient(psi)
    q2 = d1 * d1 + d2 * d2
    B = bprof(psi)
    sig2 = sigma_squared(gas, B)
    Mt = truncate_speed(trunc, q2, sig2)
    rho = subsonic_density(gas, Mt, B)
    rhs = rho * bprof.deriv(psi)
    pc, q2c = disc.cell_values(psi)
    Bc = bprof(pc)
    rho_c = subsonic_density(gas, truncate_speed(trunc, q2c, sigma_squared(gas, Bc)), Bc)
    return _State(rho, rhs, q2, sig2, Mt, B, rho_c)


def _residual(disc: Discretization, state: _State, psi):
    r = disc.apply(1.0 / state.rho_c, psi) + disc.area * state.rhs
    r = (r / disc.area)[:, 1:-1]
    return float(np.sqrt(np.mean(r * r)))


def _linear_solve(A, b, x0, rtol, atol=0.0):
    with _AMG_LOCK:
        state = np.random.get_state()
        np.random.seed(AMG_SEED)
        try:
            ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=50)
        finally:
            np.random.set_state(state)
    M = ml.aspreconditioner(cycle="V")
    history = []
    bnorm = np.linalg.norm(b)
    stop = rtol * bnorm if atol <= 0 else min(rtol * bnorm, atol)
    x, info = cg(
        A, b, x0=x0, rtol=0.0, atol=stop, maxiter=500, M=M,
        callback=lambda xk: history.append(np.linalg.norm(b - A @ xk)),
    )
    if info != 0:
        raise LinearSolveError(f"CG did not converge (info={info})", history)
    return x


def default_theta0(gas, bprof: BernoulliProfile, frac=0.5, sigma1=None):
    """Fraction of the admissible truncation margin.

    ``min(Sigma(B_check)**2 / 2, Sigma(Bbar)**2 - sigma1**2)``, deflated by 10%
    when ``sigma1`` (the sup of ``|grad psi|`` for the potential flow) is known.
    """
    bound = 0.5 * float(sigma_squared(gas, bprof.B_check))
    if sigma1 is not None:
        bound = min(bound, float(sigma_squared(gas, bprof.Bbar)) - sigma1**2)
        bound *= 0.9
    if not bound > 0:
        raise SolverError("no admissible truncation margin: potential flow is (near) sonic")
    return frac * bound


def picard_solve(geom, grid, gas, bprof: BernoulliProfile, t, opts: SolverOptions | None = None,
                 psi0=None, disc: Discretization | None = None) -> StreamField:
    """Frozen-coefficient (Picard) iteration with under-relaxation.

    Raises
    ------
    ConvergenceError
        When ``opts.max_iter`` outer iterations do not reach ``opts.tol``;
        the exception carries the last iterate.
    """
    opts = opts or SolverOptions()
    if grid.nx < MIN_CELLS or grid.ny < MIN_CELLS:
        raise ValueError(f"solver needs at least {MIN_CELLS} cells per direction")
    t = float(t)
    if t < 0:
        raise ValueError("top-wall flux value must be nonnegative")
    if disc is None:
        disc = Discretization(geom, grid)
    theta0 = opts.theta0 if opts.theta0 is not None else default_theta0(gas, bprof)
    trunc = TruncationParams(theta0)

    if psi0 is None:
        psi = t * np.broadcast_to(grid.eta, grid.shape).copy()
    else:
        psi = np.array(psi0, dtype=float)
        psi[:, 0] = 0.0
        psi[:, -1] = t
    history = []
    converged = False
    for it in range(opts.max_iter + 1):
        state = _evaluate(disc, gas, bprof, trunc, psi)
        res = _residual(disc, state, psi)
        history.append(res)
        if res <= opts.tol:
            converged = True
            break
        if it == opts.max_iter or not np.isfinite(res):
            break
        A, b = disc.interior_system(1.0 / state.rho_c, psi)
        b -= (disc.area * state.rhs).ravel()[disc.interior]
        # keep the linear error well under the nonlinear (per-node) tolerance
        atol = 0.01 * opts.tol * np.sqrt(disc.nint) * float(np.min(disc.area))
        x = _linear_solve(A, b, psi.ravel()[disc.interior], opts.linear_rtol, atol)
        new = psi.copy()
        new.ravel()[disc.interior] = x
        psi = opts.relax * new + (1.0 - opts.relax) * psi

    margin = float(np.max(state.q2 - state.sigma2))
    out = StreamField(
        psi=psi, t=t, grid=grid, iterations=it, residual=res, margin=margin, theta0=theta0,
        converged=converged, near_sonic=margin > -0.25 * theta0, rho=state.rho,
        residual_history=history,
    )
    if not converged:
        raise ConvergenceError(
            f"Picard iteration stalled at residual {res:.3e} after {it} iterations", out
        )
    log.debug("picard: t=%.6g its=%d res=%.2e margin=%.3e", t, it, res, margin)
    return out


def assemble_and_linear_solve(geom, grid, coef_c, rhs, t, psi0=None, rtol=1e-12,
                              disc: Discretization | None = None):
    """Solve ``div((1/rho~) grad psi) = rhs`` for frozen cell coefficients.

    ``coef_c`` holds ``1/rho~`` per cell (shape ``(nx, ny)``), ``rhs`` is nodal.
    """
    disc = disc or Discretization(geom, grid)
    coef_c = np.broadcast_to(np.asarray(coef_c, float), (grid.nx, grid.ny))
    rhs = np.broadcast_to(np.asarray(rhs, float), grid.shape)
    psi = t * np.broadcast_to(grid.eta, grid.shape).copy() if psi0 is None else np.array(psi0, float)
    psi[:, 0] = 0.0
    psi[:, -1] = t
    A, b = disc.interior_system(coef_c, psi)
    b -= (disc.area * rhs).ravel()[disc.interior]
    x = _linear_solve(A, b, psi.ravel()[disc.interior], rtol)
    psi.ravel()[disc.interior] = x
    return psi


def column_flux_balance(disc: Discretization, coef_c, psi, rhs, i_left, i_right):
    """Flux bookkeeping for the block of columns ``i_left..i_right``.

    Returns ``(flux_right - flux_left, wall_flux, source)`` where the fluxes
    are edge fluxes of ``(1/rho~) grad psi`` leaving the block of interior
    nodes through its vertical sides and into the walls, and ``source`` is
    the lumped integral of ``rhs`` over the block.  Discrete conservation
    means ``flux_right - flux_left + wall_flux == source`` up to the solve
    residual.
    """
    g = disc.grid
    K = disc.edge_matrix(coef_c).tocoo()
    ny1 = g.ny + 1
    ri, rj = np.divmod(K.row, ny1)
    ci, cj = np.divmod(K.col, ny1)
    cols = np.arange(i_left, i_right + 1) % g.nx
    in_block = np.isin(ri, cols) & (rj > 0) & (rj < g.ny)
    col_out = ~np.isin(ci, cols)
    # outward flux of (1/rho~) grad psi along edge i -> k is K_ik (psi_i - psi_k)
    f = K.data * (psi.ravel()[K.row] - psi.ravel()[K.col])
    lateral = in_block & col_out & (cj > 0) & (cj < g.ny)
    wall = in_block & ((cj == 0) | (cj == g.ny))
    is_right = ci == (i_right + 1) % g.nx
    flux_right = np.sum(f[lateral & is_right])
    flux_left = -np.sum(f[lateral & ~is_right])
    wall_flux = np.sum(f[wall])
    nodes = np.ix_(cols, np.arange(1, g.ny))
    source = float(np.sum((disc.area * rhs)[nodes]))
    return flux_right - flux_left, wall_flux, source
