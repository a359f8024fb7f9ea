"""Mach number against mass flux for potential flow, and the critical flux.

For a constant Bernoulli value the largest Mach number of the potential flow
increases with the mass flux ``m``.  The critical flux is the supremum of
fluxes with a strictly subsonic solution; it is bracketed here by bisection
between a subsonic probe and a probe that loses the sonic margin.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .elliptic import Discretization, Grid, SolverError, SolverOptions
from .euler import PotentialSolution, solve_potential
from .gas import GasDomainError, GasModel, critical_state

log = logging.getLogger(__name__)

MONOTONE_TOL = 1e-10


class CriticalFluxError(ValueError):
    """The bisection could not be set up (no subsonic lower bound)."""


@dataclass(frozen=True)
class SweepRecord:
    m: float
    max_mach: float
    margin: float
    converged: bool
    near_sonic: bool
    iterations: int = 0
    message: str = ""

    @property
    def subsonic(self):
        return self.converged and not self.near_sonic


def _record(m, sol: PotentialSolution | None, exc=None) -> SweepRecord:
    if sol is None:
        field_ = getattr(exc, "field", None)
        margin = float(field_.margin) if field_ is not None else float("nan")
        its = int(field_.iterations) if field_ is not None else 0
        return SweepRecord(float(m), float("nan"), margin, False, True, its, str(exc))
    sf = sol.stream
    return SweepRecord(float(m), sol.flow.max_mach, float(sf.margin), bool(sf.converged),
                       bool(sf.near_sonic), int(sf.iterations))


def _solve_one(gas, geom, grid, Bbar, m, solver, theta0_frac, disc, psi0=None):
    try:
        sol = solve_potential(gas, geom, grid, Bbar, m, solver, theta0_frac, psi0=psi0, disc=disc)
    except (SolverError, GasDomainError) as exc:
        log.info("potential solve at m=%.6g failed: %s", m, exc)
        return _record(m, None, exc), None
    return _record(m, sol), sol


def is_monotone(records, tol=MONOTONE_TOL):
    """True when ``max_mach`` strictly increases over the subsonic records."""
    mach = [r.max_mach for r in records if r.subsonic]
    return bool(np.all(np.diff(mach) > -tol))


def sweep(gas: GasModel, geom, grid: Grid, Bbar, m_values, solver: SolverOptions | None = None,
          theta0_frac=0.5, threads=1) -> list[SweepRecord]:
    """One potential solve per mass flux; failed rows are recorded, not raised.

    ``threads`` bounds the number of concurrent solves.  The records come back
    in the order of ``m_values`` whatever the scheduling.
    """
    m_values = [float(m) for m in m_values]
    if any(m < 0 for m in m_values):
        raise ValueError("mass fluxes must be nonnegative")
    if any(b <= a for a, b in zip(m_values, m_values[1:])):
        raise ValueError("mass fluxes must be strictly increasing")
    disc = Discretization(geom, grid)

    def run(m):
        return _solve_one(gas, geom, grid, Bbar, m, solver, theta0_frac, disc)[0]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            records = list(pool.map(run, m_values))
    else:
        records = [run(m) for m in m_values]
    if not is_monotone(records):
        log.warning("max Mach is not strictly increasing across the sweep")
    return records


@dataclass
class CriticalOptions:
    delta: float = 0.02
    bracket_tol: float = 1e-3
    m_lo: float | None = None
    m_hi: float | None = None
    max_probes: int = 60
    max_extra_halvings: int = 10

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if not self.bracket_tol > 0:
            raise ValueError("bracket_tol must be positive")


@dataclass
class CriticalResult:
    m_lo: float
    m_hi: float
    probes: list
    sequence: list
    solutions: list = field(repr=False, default_factory=list)
    target_mach: float = 0.98

    @property
    def width(self):
        return self.m_hi - self.m_lo

    @property
    def relative_width(self):
        return self.width / self.m_hi

    @property
    def estimate(self):
        return 0.5 * (self.m_lo + self.m_hi)

    @property
    def reached_target(self):
        return bool(self.sequence) and self.sequence[-1].max_mach >= self.target_mach


def find_critical(gas: GasModel, geom, grid: Grid, Bbar, opts: CriticalOptions | None = None,
                  solver: SolverOptions | None = None, theta0_frac=0.5) -> CriticalResult:
    """Bracket the critical mass flux of the potential flow.

    A probe counts as subsonic when the solve converges with the truncation
    inactive.  The upper start ``1.05 Sigma(Bbar) gap_min`` cannot carry a
    subsonic flow because ``|rho u| <= Sigma`` across the narrowest section.
    Bisection continues past the bracket tolerance until the largest
    subsonic probe reaches Mach ``1 - delta``, for at most
    ``opts.max_extra_halvings`` further halvings: close to the critical flux
    the outer iteration may stop converging first, and those probes count as
    sonic.
    """
    opts = opts or CriticalOptions()
    disc = Discretization(geom, grid)
    sigma = critical_state(gas, Bbar).sigma
    target = 1.0 - opts.delta
    probes: list[SweepRecord] = []
    accepted: dict[float, PotentialSolution] = {}

    def probe(m, warm=None):
        psi0 = None
        if warm is not None and warm.m > 0:
            psi0 = warm.stream.psi * (m / warm.m)
        rec, sol = _solve_one(gas, geom, grid, Bbar, m, solver, theta0_frac, disc, psi0)
        probes.append(rec)
        log.info("probe m=%.8g mach=%.6g margin=%.3e subsonic=%s", m, rec.max_mach, rec.margin,
                 rec.subsonic)
        if rec.subsonic:
            accepted[m] = sol
        return rec

    m_hi = opts.m_hi if opts.m_hi is not None else 1.05 * sigma * geom.gap_min
    if probe(m_hi).subsonic:
        raise CriticalFluxError(f"upper start m={m_hi:.6g} is still subsonic")
    if opts.m_lo is not None:
        m_lo = float(opts.m_lo)
        if not probe(m_lo).subsonic:
            raise CriticalFluxError(f"no subsonic solve at the lower bound m={m_lo:.6g}")
    else:
        m_lo = 0.5 * m_hi
        for _ in range(20):
            if probe(m_lo).subsonic:
                break
            m_hi = m_lo
            m_lo *= 0.5
        else:
            raise CriticalFluxError("no subsonic solve found by halving the flux")

    floor = opts.bracket_tol * 0.5**opts.max_extra_halvings

    def done():
        width = m_hi - m_lo
        if width > opts.bracket_tol * m_hi:
            return False
        return accepted[m_lo].flow.max_mach >= target or width <= floor * m_hi

    n = 0
    while not done() and n < opts.max_probes and m_hi - m_lo > 4e-16 * m_hi:
        mid = 0.5 * (m_lo + m_hi)
        if probe(mid, warm=accepted[m_lo]).subsonic:
            m_lo = mid
        else:
            m_hi = mid
        n += 1

    ms = sorted(accepted)
    sequence = [_record(m, accepted[m]) for m in ms]
    if not is_monotone(sequence):
        log.warning("max Mach along the stored sequence is not increasing")
    return CriticalResult(m_lo, m_hi, probes, sequence, [accepted[m] for m in ms], target)
