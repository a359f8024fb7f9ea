import subprocess
import sys
from pathlib import Path

import pytest

from subsonic_nozzle.cli import main

BASE = """\
[gas]
gamma = 2.0
A = 0.5

[nozzle]
period = 1.0
f2.mean = 1.0
f2.sin = [-0.1]

[flow]
mass_flux = 0.4
{b0}

[solver]
nx = 12
ny = 12

[sweep]
m_values = [0.1, 0.2, 0.3]

[critical]
bracket_tol = 0.01
"""


@pytest.fixture
def config(tmp_path):
    def make(b0="B0.constant = 1.5"):
        p = tmp_path / "run.toml"
        p.write_text(BASE.format(b0=b0), encoding="utf-8")
        return str(p)
    return make


def test_solve_potential(config, tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["solve-potential", "--config", config(), "--out", str(out)]) == 0
    assert "passed=true" in capsys.readouterr().out
    assert out.exists() and (tmp_path / "p.csv.meta").exists()


def test_solve_euler_is_deterministic(config, tmp_path):
    cfg = config("B0.samples = [1.5, 1.505, 1.51, 1.505, 1.5]\nBbar = 1.5")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["solve-euler", "--config", cfg, "--out", str(a)]) == 0
    assert main(["solve-euler", "--config", cfg, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv.meta").read_bytes() == (tmp_path / "b.csv.meta").read_bytes()


def test_sweep_with_threads(config, tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--config", config(), "--out", str(out), "--threads", "3"]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "m,max_mach,margin,converged,near_sonic" and len(lines) == 4
    assert "monotone=true" in capsys.readouterr().out


def test_critical(config, tmp_path, capsys):
    assert main(["critical", "--config", config(), "--out", str(tmp_path / "c.csv")]) == 0
    text = capsys.readouterr().out
    m_hi = float(text.split("m_hi=")[1].split()[0])
    assert m_hi < 1.0


def test_verify(config, tmp_path, capsys):
    assert main(["verify", "--config", config(), "--out", str(tmp_path / "v.csv")]) == 0
    assert "periodic_ok=true" in capsys.readouterr().out


def test_bad_config_exit_status(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text(BASE.format(b0="B0.constant = 1.5").replace("gamma = 2.0", "gamma = 0.9"))
    assert main(["verify", "--config", str(p)]) == 2
    assert "gamma must exceed 1" in capsys.readouterr().err


def test_failed_run_exit_status(config, tmp_path):
    # flux above the choking value: the solve cannot stay subsonic
    cfg = config()
    text = open(cfg).read().replace("mass_flux = 0.4", "mass_flux = 0.95")
    open(cfg, "w").write(text)
    assert main(["solve-potential", "--config", cfg, "--out", str(tmp_path / "x.csv")]) != 0


def test_console_entry_point(config, tmp_path):
    r = subprocess.run([sys.executable, "-m", "subsonic_nozzle.cli", "solve-potential",
                        "--config", config(), "--out", str(tmp_path / "e.csv")],
                       capture_output=True, text=True)
    assert r.returncode == 0, r.stderr


CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", ["potential.toml", "euler.toml", "critical.toml"])
def test_shipped_configs_parse(name):
    from subsonic_nozzle.config import load_config

    cfg = load_config(CONFIG_DIR / name)
    assert cfg.grid.nx >= 8 and cfg.Bbar == 1.5
