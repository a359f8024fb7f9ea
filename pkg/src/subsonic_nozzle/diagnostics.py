"""Verification checks on computed flows.

Derivatives here use :func:`stencils.ddeta_diag` and the second-order
periodic difference in ``xi``, not the operators of the solver or the
velocity reconstruction, so that a consistency bug in either one shows up
as a residual instead of cancelling.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import stencils
from .bernoulli import BernoulliProfile
from .elliptic import Discretization, SolverOptions, picard_solve
from .euler import EulerSolution, FlowState, PotentialSolution
from .gas import GasModel

STAGNATION_Q2 = 1e-12
MASS_FLUX_TOL = 1e-10


def check_conservation(flow: FlowState, geom, m) -> float:
    """Largest relative deviation of the section flux ``int rho u dx2`` from ``m``.

    Each vertical section is integrated with the diagonal norm that matches
    the velocity reconstruction, so an exact discrete solution telescopes to
    ``psi(top) - psi(bottom) = m`` on every column.
    """
    grid = flow.grid
    gap = geom.gap(grid.xi)
    w = stencils.sbp_weights(grid.ny + 1, grid.heta)
    flux = (flow.rho * flow.u * gap[:, None]) @ w
    if m == 0:
        return float(np.max(np.abs(flux)))
    return float(np.max(np.abs(flux - m)) / abs(m))


def bernoulli_field(gas: GasModel, flow: FlowState):
    return 0.5 * (flow.u**2 + flow.v**2) + gas.h(flow.rho)


def check_bernoulli_transport(gas: GasModel, flow: FlowState, stream, bprofile: BernoulliProfile):
    """Return ``(sup |B - B(psi)|, sup over the inflow section of |B - B0(x2)|)``."""
    B = bernoulli_field(gas, flow)
    dev_all = float(np.max(np.abs(B - bprofile(stream.psi))))
    x2 = flow.x2[0]
    dev_in = float(np.max(np.abs(B[0] - bprofile.B0(x2))))
    return dev_all, dev_in


def _diag_gradient(f, flow: FlowState, geom):
    grid = flow.grid
    f_xi = stencils.ddxi_periodic2(f, grid.hxi)
    f_eta = stencils.ddeta_diag(f, grid.heta)
    gap = geom.gap(grid.xi)[:, None]
    slope = geom.f1(grid.xi, 1)[:, None] + grid.eta[None, :] * geom.gap(grid.xi, 1)[:, None]
    return stencils.physical_gradient(f_xi, f_eta, gap, slope)


def vorticity(flow: FlowState, geom):
    v1, _ = _diag_gradient(flow.v, flow, geom)
    _, u2 = _diag_gradient(flow.u, flow, geom)
    return v1 - u2


def check_vorticity_identity(gas: GasModel, flow: FlowState, geom):
    """Sup over interior nodes of ``|omega - (v dB/dx1 - u dB/dx2) / q^2|``.

    Returns ``(residual, n_stagnant)``; nodes with ``q^2`` below
    ``STAGNATION_Q2`` are skipped and counted.
    """
    B = bernoulli_field(gas, flow)
    B1, B2 = _diag_gradient(B, flow, geom)
    omega = vorticity(flow, geom)
    q2 = flow.u**2 + flow.v**2
    inner = np.s_[:, 1:-1]
    ok = q2[inner] > STAGNATION_Q2
    with np.errstate(divide="ignore", invalid="ignore"):
        rhs = (flow.v * B1 - flow.u * B2) / q2
    res = np.abs(omega - rhs)[inner][ok]
    return (float(np.max(res)) if res.size else 0.0), int(np.count_nonzero(~ok))


def check_periodicity(gas: GasModel, geom, stream, bprofile: BernoulliProfile,
                      opts: SolverOptions | None = None, shift_cells=None) -> float:
    """Re-solve on the nozzle shifted by whole cells and compare after shifting back.

    The re-solve starts from the default initial guess, not from the shifted
    solution, so agreement is a statement about the discrete problem.
    """
    grid = stream.grid
    k = grid.nx // 3 if shift_cells is None else int(shift_cells)
    base = opts or SolverOptions()
    run = SolverOptions(base.tol, base.max_iter, base.relax, stream.theta0, base.linear_rtol)
    moved = geom.shifted(k * grid.hxi)
    other = picard_solve(moved, grid, gas, bprofile, stream.t, run)
    back = np.roll(other.psi, k, axis=0)
    return float(np.max(np.abs(back - stream.psi)))


@dataclass
class QualitativeFlags:
    max_principle_ok: bool
    psi_min: float
    psi_max: float
    positivity_ok: bool
    min_u: float
    margin_ok: bool
    subsonic_margin: float
    periodic_ok: bool | None
    periodic_dev: float | None


def check_qualitative(stream, flow: FlowState, t, periodic_dev=None, tol=1e-10) -> QualitativeFlags:
    """Maximum principle, positive ``u``, subsonic margin and (optionally) periodicity."""
    psi = stream.psi
    inner = psi[:, 1:-1]
    pmin, pmax = float(np.min(psi)), float(np.max(psi))
    # extrema on the walls only: interior values stay strictly inside (0, t)
    mp = pmin >= 0.0 and pmax <= t and (t == 0 or (np.min(inner) > 0.0 and np.max(inner) < t))
    periodic_ok = None if periodic_dev is None else bool(periodic_dev <= 10.0 * tol)
    margin = float(flow.subsonic_margin)
    return QualitativeFlags(
        max_principle_ok=bool(mp), psi_min=pmin, psi_max=pmax,
        positivity_ok=bool(flow.min_u > 0.0), min_u=float(flow.min_u),
        margin_ok=bool(margin < 0.0 and not stream.near_sonic), subsonic_margin=margin,
        periodic_ok=periodic_ok, periodic_dev=periodic_dev,
    )


def convergence_order(errors):
    """Observed orders ``log2(e_n / e_2n)`` for errors on successively doubled grids."""
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


@dataclass
class VerificationReport:
    mass_flux_dev: float
    bernoulli_dev: float
    bernoulli_inflow_dev: float
    vorticity_dev: float
    stagnant_nodes: int
    max_principle_ok: bool
    psi_min: float
    psi_max: float
    positivity_ok: bool
    min_u: float
    margin_ok: bool
    subsonic_margin: float
    periodic_ok: bool | None
    periodic_dev: float | None
    converged: bool
    convergence_order: float | None = None

    @property
    def passed(self):
        """Mandatory checks; the discretization-error residuals are reported only."""
        return bool(
            self.converged and self.mass_flux_dev <= MASS_FLUX_TOL and self.max_principle_ok
            and self.positivity_ok and self.margin_ok and self.periodic_ok is not False
        )

    def items(self):
        out = asdict(self)
        out["passed"] = self.passed
        return out.items()

    def to_lines(self):
        return [f"{k}={_fmt(v)}" for k, v in self.items()]


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def verify(gas: GasModel, geom, solution, opts: SolverOptions | None = None,
           periodic=True) -> VerificationReport:
    """Run every check on a potential or Euler solution."""
    if not isinstance(solution, (EulerSolution, PotentialSolution)):
        raise TypeError("expected a PotentialSolution or EulerSolution")
    stream = solution.stream
    flow = solution.flow
    bprof = solution.bprofile
    if isinstance(solution, EulerSolution):
        m = solution.potential.m
        converged = solution.converged and stream.converged
    else:
        m = solution.m
        converged = stream.converged
    dev_all, dev_in = check_bernoulli_transport(gas, flow, stream, bprof)
    vort, stagnant = check_vorticity_identity(gas, flow, geom)
    tol = (opts or SolverOptions()).tol
    pdev = check_periodicity(gas, geom, stream, bprof, opts) if periodic and m > 0 else None
    q = check_qualitative(stream, flow, stream.t, pdev, tol)
    return VerificationReport(
        mass_flux_dev=check_conservation(flow, geom, m), bernoulli_dev=dev_all,
        bernoulli_inflow_dev=dev_in, vorticity_dev=vort, stagnant_nodes=stagnant,
        converged=bool(converged), **asdict(q),
    )
