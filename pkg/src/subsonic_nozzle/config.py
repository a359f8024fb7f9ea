"""Run configuration: TOML text with accumulated, line-numbered errors.

A minimal file needs ``[gas]``, ``[nozzle]`` and ``[flow]``; every other
section falls back to documented defaults::

    [gas]
    kind = "polytropic"
    gamma = 2.0
    A = 0.5

    [nozzle]
    period = 1.0
    f1.mean = 0.0
    f2.mean = 1.0
    f2.sin = [-0.1]

    [flow]
    mass_flux = 0.5
    B0.constant = 1.5
"""
from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .bernoulli import BernoulliDatum
from .critical import CriticalOptions
from .elliptic import Grid, SolverOptions
from .euler import FixedPointOptions
from .gas import ISOTHERMAL, POLYTROPIC, GasModel
from .geometry import NozzleGeometry

REQUIRED = ("gas", "nozzle", "flow")

# key -> (expected type, default); ``None`` default means optional/absent
_SCHEMA = {
    "gas": {"kind": (str, POLYTROPIC), "gamma": (float, None), "A": (float, None),
            "c": (float, None)},
    "nozzle": {"period": (float, 1.0), "normalize": (bool, True), "f1": (dict, None),
               "f2": (dict, None)},
    "nozzle.f1": {"mean": (float, 0.0), "cos": (list, []), "sin": (list, [])},
    "nozzle.f2": {"mean": (float, 1.0), "cos": (list, []), "sin": (list, [])},
    "flow": {"mass_flux": (float, None), "Bbar": (float, None), "B0": (dict, None)},
    "flow.B0": {"constant": (float, None), "samples": (list, None), "eps_warn": (float, None)},
    "solver": {"nx": (int, 32), "ny": (int, 32), "tol": (float, 1e-10), "max_iter": (int, 500),
               "relax": (float, 0.7), "theta0_frac": (float, 0.5)},
    "fixedpoint": {"tol": (float, 1e-8), "max_iter": (int, 200), "damping": (float, None),
                   "initial": (str, "potential")},
    "output": {"path": (str, "fields.csv"), "format": (str, "csv")},
    "sweep": {"m_values": (list, None), "m_min": (float, None), "m_max": (float, None),
              "count": (int, None)},
    "critical": {"delta": (float, 0.02), "bracket_tol": (float, 1e-3), "m_lo": (float, None),
                 "m_hi": (float, None), "max_probes": (int, 60),
                 "max_extra_halvings": (int, 10)},
}


class ConfigError(ValueError):
    """All problems found in a configuration file, one per line."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


@dataclass
class RunConfig:
    gas: GasModel
    geometry: NozzleGeometry
    grid: Grid
    mass_flux: float | None
    B0: BernoulliDatum
    Bbar: float
    eps_warn: float | None
    solver: SolverOptions
    theta0_frac: float
    fixedpoint: FixedPointOptions
    output_path: str
    output_format: str
    sweep_values: list | None
    critical: CriticalOptions
    sha256: str
    raw: dict = field(repr=False, default_factory=dict)


_HEADER = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-\s\"]+?)\s*\]\s*(#.*)?$")
_KEY = re.compile(r"^\s*([A-Za-z0-9_.\-\s\"]+?)\s*=")


def _key_lines(text):
    """Map dotted key paths (and table headers) to 1-based line numbers."""
    where = {}
    table = ""
    for n, line in enumerate(text.splitlines(), start=1):
        h = _HEADER.match(line)
        if h:
            table = h.group(1).replace('"', "").replace(" ", "")
            where.setdefault(table, n)
            continue
        k = _KEY.match(line)
        if k:
            key = k.group(1).replace('"', "").replace(" ", "")
            path = f"{table}.{key}" if table else key
            where.setdefault(path, n)
            parts = path.split(".")
            for i in range(1, len(parts)):
                where.setdefault(".".join(parts[:i]), n)
    return where


class _Collector:
    def __init__(self, text):
        self.where = _key_lines(text)
        self.errors = []

    def add(self, path, msg):
        line = self.where.get(path)
        loc = f"line {line}: " if line is not None else ""
        self.errors.append(f"{loc}{path}: {msg}")


def _coerce(value, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError("expected a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError("expected an integer")
        return value
    if kind is list:
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise TypeError("expected a list of numbers")
        return [float(v) for v in value]
    if not isinstance(value, kind):
        raise TypeError(f"expected {kind.__name__}")
    return value


def _section(raw, name, col):
    """Typed values of one section with defaults filled; errors are collected."""
    node = raw
    for part in name.split("."):
        node = node.get(part, {}) if isinstance(node, dict) else {}
    schema = _SCHEMA[name]
    out = {}
    if not isinstance(node, dict):
        col.add(name, "expected a table")
        node = {}
    for key, value in node.items():
        path = f"{name}.{key}"
        if key not in schema:
            col.add(path, "unknown key")
            continue
        kind, _ = schema[key]
        try:
            out[key] = _coerce(value, kind)
        except TypeError as exc:
            col.add(path, str(exc))
    for key, (kind, default) in schema.items():
        if kind is not dict:
            out.setdefault(key, default)
    return out


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document.

    Raises
    ------
    ConfigError
        With every problem found, each prefixed by its line number when the
        offending key can be located.
    """
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"syntax error: {exc}"]) from exc
    col = _Collector(text)
    for name in raw:
        if name not in _SCHEMA:
            col.add(name, "unknown section")
    for name in REQUIRED:
        if name not in raw:
            col.errors.append(f"missing section [{name}]")
    s = {name: _section(raw, name, col) for name in _SCHEMA}

    gas = None
    g = s["gas"]
    if g["kind"] == POLYTROPIC:
        for key in ("gamma", "A"):
            if g[key] is None and "gas" in raw:
                col.add(f"gas.{key}", "required for a polytropic gas")
        if g["gamma"] is not None and not g["gamma"] > 1.0:
            col.add("gas.gamma", "gamma must exceed 1 (polytropic law p = A rho**gamma)")
        if g["A"] is not None and not g["A"] > 0.0:
            col.add("gas.A", "A must be positive")
        if g["gamma"] is not None and g["A"] is not None and g["gamma"] > 1 and g["A"] > 0:
            gas = GasModel.polytropic(g["gamma"], g["A"])
    elif g["kind"] == ISOTHERMAL:
        if g["c"] is None:
            col.add("gas.c", "required for an isothermal gas")
        elif not g["c"] > 0:
            col.add("gas.c", "sound speed must be positive")
        else:
            gas = GasModel.isothermal(g["c"])
    else:
        col.add("gas.kind", f"must be {POLYTROPIC!r} or {ISOTHERMAL!r}")

    geom = None
    nz = s["nozzle"]
    if not nz["period"] > 0:
        col.add("nozzle.period", "must be positive")
    else:
        try:
            geom = NozzleGeometry.from_coefficients(
                nz["period"], s["nozzle.f1"], s["nozzle.f2"], normalize=nz["normalize"]
            )
        except ValueError as exc:
            col.add("nozzle", str(exc))

    fl, b0 = s["flow"], s["flow.B0"]
    m = fl["mass_flux"]
    if m is not None and not m > 0:
        col.add("flow.mass_flux", "mass flux must be positive")
    datum = None
    if (b0["constant"] is None) == (b0["samples"] is None):
        if "flow" in raw:
            col.add("flow.B0", "give exactly one of B0.constant or B0.samples")
    elif b0["constant"] is not None:
        datum = BernoulliDatum.from_constant(b0["constant"])
    else:
        try:
            datum = BernoulliDatum.from_samples(b0["samples"])
            datum.check_endpoints()
        except ValueError as exc:
            col.add("flow.B0.samples", str(exc))
            datum = None
    Bbar = fl["Bbar"]
    if Bbar is None and datum is not None:
        Bbar = datum.constant if datum.is_constant else datum.mean()
    if gas is not None and Bbar is not None and gas.kind == POLYTROPIC and not Bbar > 0:
        col.add("flow.Bbar" if fl["Bbar"] is not None else "flow.B0",
                "Bernoulli value must exceed the enthalpy floor 0")
    if b0["eps_warn"] is not None and not b0["eps_warn"] > 0:
        col.add("flow.B0.eps_warn", "must be positive")

    sv = s["solver"]
    grid = None
    for key in ("nx", "ny"):
        if sv[key] < 8:
            col.add(f"solver.{key}", "at least 8 cells are required")
    if sv["nx"] >= 8 and sv["ny"] >= 8 and geom is not None:
        grid = Grid.for_geometry(geom, sv["nx"], sv["ny"])
    for key in ("tol", "theta0_frac"):
        if not sv[key] > 0:
            col.add(f"solver.{key}", "must be positive")
    if not 0 < sv["relax"] <= 1:
        col.add("solver.relax", "must lie in (0, 1]")
    if sv["max_iter"] < 1:
        col.add("solver.max_iter", "must be at least 1")
    solver = SolverOptions(sv["tol"], sv["max_iter"], sv["relax"] if 0 < sv["relax"] <= 1 else 0.7)

    fp = s["fixedpoint"]
    if not fp["tol"] > 0:
        col.add("fixedpoint.tol", "must be positive")
    if fp["max_iter"] < 1:
        col.add("fixedpoint.max_iter", "must be at least 1")
    if fp["damping"] is not None and not 0 < fp["damping"] <= 1:
        col.add("fixedpoint.damping", "must lie in (0, 1]")
    if fp["initial"] not in ("potential", "uniform"):
        col.add("fixedpoint.initial", "must be 'potential' or 'uniform'")
    fixedpoint = FixedPointOptions(fp["tol"], fp["max_iter"], fp["damping"], fp["initial"])

    out = s["output"]
    if out["format"] != "csv":
        col.add("output.format", "only 'csv' is supported")

    sw = s["sweep"]
    values = None
    if sw["m_values"] is not None:
        values = sw["m_values"]
    elif any(sw[k] is not None for k in ("m_min", "m_max", "count")):
        if any(sw[k] is None for k in ("m_min", "m_max", "count")):
            col.add("sweep", "m_min, m_max and count must be given together")
        elif sw["count"] < 2 or not 0 <= sw["m_min"] < sw["m_max"]:
            col.add("sweep", "need 0 <= m_min < m_max and count >= 2")
        else:
            step = (sw["m_max"] - sw["m_min"]) / (sw["count"] - 1)
            values = [sw["m_min"] + k * step for k in range(sw["count"])]
    if values is not None:
        if any(v < 0 for v in values) or any(b <= a for a, b in zip(values, values[1:])):
            col.add("sweep.m_values" if sw["m_values"] is not None else "sweep",
                    "mass fluxes must be nonnegative and strictly increasing")

    cr = s["critical"]
    critical = None
    try:
        critical = CriticalOptions(cr["delta"], cr["bracket_tol"], cr["m_lo"], cr["m_hi"],
                                   cr["max_probes"], cr["max_extra_halvings"])
    except ValueError as exc:
        col.add("critical", str(exc))

    if col.errors:
        raise ConfigError(col.errors)
    return RunConfig(
        gas=gas, geometry=geom, grid=grid, mass_flux=m, B0=datum, Bbar=float(Bbar),
        eps_warn=b0["eps_warn"], solver=solver, theta0_frac=sv["theta0_frac"],
        fixedpoint=fixedpoint, output_path=out["path"], output_format=out["format"],
        sweep_values=values, critical=critical, sha256=config_hash(text), raw=raw,
    )


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_config(data.decode("utf-8"))
