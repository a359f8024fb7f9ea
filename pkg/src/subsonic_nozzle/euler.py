"""Potential baseline and the rotational Euler flow as a fixed point.

The map ``T`` sends an inflow momentum profile ``W`` to the trace
``d psi / d x2 (0, .)`` of the stream function solved with the Bernoulli
function induced by ``W``.  A fixed point of ``T`` closes the coupling
between Bernoulli's law on streamlines and the elliptic equation, and the
resulting ``psi`` defines the Euler flow through ``d1 psi = -rho v`` and
``d2 psi = rho u``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import stencils
from .bernoulli import (
    BernoulliDatum,
    BernoulliProfile,
    InflowProfile,
    ProfileError,
    build_kappa,
    compose_and_extend,
    constant_profile,
)
from .elliptic import (
    Discretization,
    Grid,
    SolverError,
    SolverOptions,
    StreamField,
    default_theta0,
    picard_solve,
)
from .gas import GasModel, sigma_squared

log = logging.getLogger(__name__)


class AdmissibilityError(SolverError):
    """``T(W)`` left the admissible profile set; ``last`` is the last valid profile."""

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


@dataclass
class FlowState:
    rho: np.ndarray
    u: np.ndarray
    v: np.ndarray
    mach: np.ndarray
    mass_flux_by_section: np.ndarray
    subsonic_margin: float
    min_u: float
    x1: np.ndarray
    x2: np.ndarray
    grid: Grid

    @property
    def max_mach(self):
        return float(np.max(self.mach))


def reconstruct_flow(gas: GasModel, disc: Discretization, stream: StreamField) -> FlowState:
    """Density from the solver, velocities from the summation-by-parts gradient."""
    grid = disc.grid
    psi = stream.psi
    p_xi = stencils.ddxi_periodic4(psi, grid.hxi)
    p_eta = stencils.ddeta_sbp(psi, grid.heta)
    d1, d2 = stencils.physical_gradient(p_xi, p_eta, disc.gap[:, None], disc.slope)
    rho = np.array(stream.rho, dtype=float)
    u = d2 / rho
    v = -d1 / rho
    c2 = gas.dpdrho(rho)
    q2 = u * u + v * v
    w = stencils.sbp_weights(grid.ny + 1, grid.heta)
    flux = (rho * u * disc.gap[:, None]) @ w
    x1, x2, _ = disc.geom.map_to_physical(grid.xi[:, None], grid.eta[None, :])
    return FlowState(
        rho=rho, u=u, v=v, mach=np.sqrt(q2 / c2), mass_flux_by_section=flux,
        subsonic_margin=float(np.max(q2 - c2)), min_u=float(np.min(u)),
        x1=x1, x2=x2, grid=grid,
    )


def inflow_trace(disc: Discretization, psi):
    """``d psi / d x2`` along ``x1 = 0`` by fourth-order differences in ``eta``."""
    return stencils.ddeta_onesided4(psi[0], disc.grid.heta) / disc.gap[0]


@dataclass
class PotentialSolution:
    stream: StreamField
    flow: FlowState | None
    Bbar: float
    m: float
    sigma0: float | None
    sigma1: float
    bprofile: BernoulliProfile
    disc: Discretization = field(repr=False)
    theta_history: list = field(default_factory=list)

    @property
    def degenerate(self):
        return self.sigma0 is None

    @property
    def near_sonic(self):
        return self.stream.near_sonic

    @property
    def trace(self):
        return inflow_trace(self.disc, self.stream.psi)


def _zero_field(grid, theta0, rho, sig2):
    return StreamField(
        psi=np.zeros(grid.shape), t=0.0, grid=grid, iterations=0, residual=0.0,
        margin=-sig2, theta0=theta0, rho=np.full(grid.shape, rho),
    )


def solve_potential(gas: GasModel, geom, grid: Grid, Bbar, m, opts: SolverOptions | None = None,
                    theta0_frac=0.5, max_theta_refinements=8, psi0=None,
                    disc: Discretization | None = None) -> PotentialSolution:
    """Irrotational flow with constant Bernoulli value ``Bbar`` and flux ``m``.

    The truncation margin starts at ``theta0_frac * Sigma(Bbar)**2 / 2`` and is
    shrunk while the truncation is active somewhere but the flow is still
    subsonic, so accepted solutions solve the untruncated equation.  A run
    whose ``|grad psi|`` reaches ``Sigma`` is returned flagged ``near_sonic``.
    """
    opts = opts or SolverOptions()
    disc = disc or Discretization(geom, grid)
    m = float(m)
    if m < 0:
        raise ValueError("mass flux must be nonnegative")
    bprof = constant_profile(Bbar, m)
    bprof.check_gas(gas)
    sig2 = float(sigma_squared(gas, Bbar))
    theta0 = opts.theta0 if opts.theta0 is not None else theta0_frac * 0.5 * sig2

    if m == 0.0:
        rho_max = float(gas.h_inverse(Bbar))
        sf = _zero_field(grid, theta0, rho_max, sig2)
        return PotentialSolution(sf, reconstruct_flow(gas, disc, sf), float(Bbar), 0.0, None,
                                 0.0, bprof, disc)

    thetas = []
    for _ in range(max_theta_refinements + 1):
        thetas.append(theta0)
        run = SolverOptions(opts.tol, opts.max_iter, opts.relax, theta0, opts.linear_rtol)
        sf = picard_solve(geom, grid, gas, bprof, m, run, psi0=psi0, disc=disc)
        if sf.margin <= -0.25 * theta0 or sf.margin >= 0.0:
            break
        theta0 = 2.0 * abs(sf.margin)
        psi0 = sf.psi
    flow = reconstruct_flow(gas, disc, sf)
    p_eta = stencils.ddeta_sbp(sf.psi, grid.heta)
    d2 = p_eta / disc.gap[:, None]
    sigma0 = float(np.min(d2))
    sigma1 = float(np.max(np.hypot(flow.rho * flow.u, flow.rho * flow.v)))
    return PotentialSolution(sf, flow, float(Bbar), m, sigma0, sigma1, bprof, disc, thetas)


@dataclass
class FixedPointOptions:
    tol: float = 1e-8
    max_iter: int = 200
    damping: float | None = None
    initial: str = "potential"


@dataclass
class EulerSolution:
    stream: StreamField
    profile: InflowProfile
    bprofile: BernoulliProfile
    flow: FlowState
    potential: PotentialSolution
    T_iterations: int
    T_residual: float
    T_history: list
    damping: float
    converged: bool
    B0: BernoulliDatum
    disc: Discretization = field(repr=False)

    @property
    def near_sonic(self):
        return self.stream.near_sonic


class FixedPointProblem:
    """Data shared by all applications of ``T`` for one ``(B0, m)`` pair."""

    def __init__(self, gas, geom, grid, B0: BernoulliDatum, m, Bbar=None,
                 solver: SolverOptions | None = None, theta0_frac=0.5,
                 potential: PotentialSolution | None = None, eps_warn=None):
        self.gas = gas
        self.geom = geom
        self.grid = grid
        self.B0 = B0
        self.m = float(m)
        if not self.m > 0:
            raise ValueError("the rotational problem needs a positive mass flux")
        B0.check_endpoints()
        self.Bbar = B0.mean() if Bbar is None else float(Bbar)
        self.solver = solver or SolverOptions()
        self.eps_warn = eps_warn
        self.disc = potential.disc if potential is not None else Discretization(geom, grid)
        if potential is None:
            potential = solve_potential(gas, geom, grid, self.Bbar, self.m,
                                        self.solver, theta0_frac, disc=self.disc)
        if potential.near_sonic or potential.degenerate:
            raise AdmissibilityError(
                f"potential flow at m={self.m} is near sonic; no admissible profile set"
            )
        self.potential = potential
        self.sigma0 = potential.sigma0
        self.reference = potential.trace
        probe = constant_profile(B0.minimum(), self.m)
        probe.Bbar = self.Bbar
        if self.solver.theta0 is not None:
            self.theta0 = self.solver.theta0
        else:
            self.theta0 = default_theta0(gas, probe, theta0_frac, sigma1=potential.sigma1)
        self._opts = SolverOptions(self.solver.tol, self.solver.max_iter, self.solver.relax,
                                   self.theta0, self.solver.linear_rtol)

    def bernoulli_for(self, W: InflowProfile) -> BernoulliProfile:
        return compose_and_extend(self.B0, build_kappa(W), self.m, self.Bbar, self.gas,
                                  self.eps_warn)

    def apply(self, W: InflowProfile, psi0=None):
        """Return ``(T(W), stream, bprofile)``.

        Raises
        ------
        AdmissibilityError
            If the solve is near sonic or ``T(W)`` leaves the profile set.
        """
        bprof = self.bernoulli_for(W)
        sf = picard_solve(self.geom, self.grid, self.gas, bprof, self.m, self._opts,
                          psi0=psi0, disc=self.disc)
        if sf.near_sonic:
            raise AdmissibilityError(f"rotational solve lost the sonic margin ({sf.margin:.3e})")
        trace = inflow_trace(self.disc, sf.psi)
        try:
            TW = InflowProfile.from_samples(trace, self.m, renormalize=True)
        except ProfileError as exc:
            raise AdmissibilityError(str(exc)) from exc
        dev = float(np.max(np.abs(TW.values - self.reference)))
        if dev > 0.5 * self.sigma0:
            raise AdmissibilityError(
                f"T(W) is {dev:.3e} from the potential trace (> sigma0/2 = {0.5 * self.sigma0:.3e}); "
                "the Bernoulli variation is too large for this mass flux"
            )
        return TW, sf, bprof

    def initial_profile(self, kind="potential"):
        if kind == "potential":
            return InflowProfile.from_samples(self.reference, self.m, renormalize=True)
        if kind == "uniform":
            return InflowProfile.uniform(self.m, self.grid.ny + 1)
        raise ValueError(f"unknown initial profile {kind!r}")


def apply_T(W: InflowProfile, B0, gas, geom, grid, m, **kwargs) -> InflowProfile:
    """One application of the profile map (builds the potential baseline first)."""
    return FixedPointProblem(gas, geom, grid, B0, m, **kwargs).apply(W)[0]


def solve_euler(gas, geom, grid, B0: BernoulliDatum, m, opts: FixedPointOptions | None = None,
                solver: SolverOptions | None = None, Bbar=None, theta0_frac=0.5,
                potential: PotentialSolution | None = None, eps_warn=None,
                problem: FixedPointProblem | None = None) -> EulerSolution:
    """Damped fixed-point iteration ``W <- (1 - lam) W + lam T(W)``."""
    opts = opts or FixedPointOptions()
    if problem is None:
        problem = FixedPointProblem(gas, geom, grid, B0, m, Bbar, solver, theta0_frac,
                                    potential, eps_warn)
    eps = B0.epsilon(problem.Bbar)
    lam = opts.damping if opts.damping is not None else (1.0 if eps < 1e-3 else 0.5)
    if not 0.0 < lam <= 1.0:
        raise ValueError("damping must lie in (0, 1]")

    W = problem.initial_profile(opts.initial)
    psi = problem.potential.stream.psi
    history = []
    converged = False
    for k in range(1, opts.max_iter + 1):
        try:
            TW, sf, bprof = problem.apply(W, psi0=psi)
        except AdmissibilityError as exc:
            exc.last = W
            raise
        psi = sf.psi
        res = float(np.max(np.abs(TW.values - W.values)))
        history.append(res)
        log.debug("T iteration %d: residual %.3e (picard its %d)", k, res, sf.iterations)
        if res < opts.tol:
            converged = True
            break
        W = InflowProfile(W.values + lam * (TW.values - W.values), problem.m)
    flow = reconstruct_flow(gas, problem.disc, sf)
    return EulerSolution(
        stream=sf, profile=W, bprofile=bprof, flow=flow, potential=problem.potential,
        T_iterations=k, T_residual=res, T_history=history, damping=lam,
        converged=converged, B0=B0, disc=problem.disc,
    )
