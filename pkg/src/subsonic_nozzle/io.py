"""CSV field output with a key=value metadata sidecar."""
from __future__ import annotations

import numpy as np

from .elliptic import Discretization, StreamField
from .euler import EulerSolution, PotentialSolution, reconstruct_flow

COLUMNS = ("x1", "x2", "psi", "rho", "u", "v", "mach")
META_SUFFIX = ".meta"


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _close_period(a):
    """Append the ``xi = L`` column (a copy of ``xi = 0``) along axis 0."""
    return np.concatenate([a, a[:1]], axis=0)


def field_table(solution, gas=None, geom=None) -> np.ndarray:
    """Rows ``x1, x2, psi, rho, u, v, mach`` over all ``(nx + 1)(ny + 1)`` nodes.

    A bare :class:`StreamField` needs ``gas`` and ``geom`` to rebuild the flow.
    """
    if isinstance(solution, (EulerSolution, PotentialSolution)):
        stream, flow, period = solution.stream, solution.flow, solution.disc.geom.period
    elif isinstance(solution, StreamField):
        if gas is None or geom is None:
            raise ValueError("a bare StreamField needs gas and geom to reconstruct the flow")
        stream = solution
        flow = reconstruct_flow(gas, Discretization(geom, stream.grid), stream)
        period = geom.period
    else:
        raise TypeError("expected an EulerSolution, PotentialSolution or StreamField")
    x1 = _close_period(flow.x1)
    x1[-1] += period
    cols = [x1, _close_period(flow.x2)]
    cols += [_close_period(a) for a in (stream.psi, flow.rho, flow.u, flow.v, flow.mach)]
    # + 0.0 folds negative zeros so identical fields print identically
    return np.column_stack([c.ravel() for c in cols]) + 0.0


def write_fields(solution, path, *, gas=None, geom=None, report=None, meta=None):
    """Write the CSV table and ``path + '.meta'``.

    Parameters
    ----------
    report : VerificationReport, optional
        Its scalars are copied into the sidecar.
    meta : dict, optional
        Extra ``key=value`` entries (config hash, command, ...), written first.
    """
    table = field_table(solution, gas, geom)
    np.savetxt(path, table, fmt="%.17g", delimiter=",", header=",".join(COLUMNS), comments="")
    stream = solution if isinstance(solution, StreamField) else solution.stream
    lines = dict(meta or {})
    lines.update(
        nx=stream.grid.nx, ny=stream.grid.ny, period=stream.grid.period, mass_flux=stream.t,
        picard_iterations=stream.iterations, picard_residual=stream.residual,
        theta0=stream.theta0, converged=stream.converged, near_sonic=stream.near_sonic,
        margin=stream.margin,
    )
    if isinstance(solution, EulerSolution):
        lines.update(T_iterations=solution.T_iterations, T_residual=solution.T_residual,
                     T_converged=solution.converged, damping=solution.damping)
    if report is not None:
        for k, v in report.items():
            lines[f"report.{k}"] = v
    with open(str(path) + META_SUFFIX, "w", encoding="utf-8") as fh:
        for k, v in lines.items():
            fh.write(f"{k}={_fmt(v)}\n")
    return path


def read_fields(path) -> dict:
    """Columns of a file written by :func:`write_fields`, keyed by header name."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}


def read_meta(path) -> dict:
    """Sidecar entries as strings."""
    out = {}
    with open(str(path) + META_SUFFIX, encoding="utf-8") as fh:
        for line in fh:
            key, _, value = line.rstrip("\n").partition("=")
            out[key] = value
    return out
