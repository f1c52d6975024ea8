import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from dislo.energy import SlipField
from dislo.errors import ConfigurationError
from dislo.fieldio import write_binary
from dislo.harness.cli import EXIT_FAIL, EXIT_OK, EXIT_PROFILE, EXIT_USAGE, main
from dislo.harness.config import EXPERIMENTS, default_eps_grid, load_config
from dislo.harness.experiments import fit_log_rate, monotone_up_to, verdict


def _ini(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_default_eps_grid():
    g = default_eps_grid()
    assert len(g) == 7 and g[0] == 1e-2 and g[-1] == pytest.approx(1.5625e-4)


def test_load_config_sections(tmp_path):
    p = _ini(
        tmp_path,
        "[run]\nprofile = isotropic\neps = 1e-2, 5e-3  ; comment\nseed = 7\n\n[relax]\ns = 1 1\npoisson = 0.3\n",
    )
    cfg = load_config(p, "relax")
    assert cfg.eps == (1e-2, 5e-3) and cfg.seed == 7 and cfg.s == (1.0, 1.0) and cfg.poisson == 0.3
    assert load_config(p, "relax", seed=9).seed == 9
    assert load_config(p, "energy").poisson is None
    assert cfg.tolerance() == 0.10 and cfg.tolerance(anisotropic=True) == 0.12


@pytest.mark.parametrize(
    "text, where",
    [
        ("[run]\neps = 1e-2, 2e-2\n", ":2: [run] eps"),
        ("[run]\nprofile = isotropic\nbogus = 1\n", ":3: [run] bogus"),
        ("[run]\n\n[relax]\ngrid = many\n", ":4: [relax] grid"),
        ("[run]\nzeta = 0.7\n", "[run] zeta"),
        ("[run]\nm = 2\n", "[run] m"),
        ("[run]\npoisson = 0.5\n", "[run] poisson"),
        ("[run]\neps = 0.5\n", "[run] eps"),
    ],
)
def test_config_errors(tmp_path, text, where):
    p = _ini(tmp_path, text)
    with pytest.raises(ConfigurationError, match=r".*" + where.replace("[", r"\[").replace("]", r"\]")):
        load_config(p, "relax")


def test_missing_config(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "nope.ini", "relax")


def test_fit_log_rate_exact():
    eps = np.array(default_eps_grid())
    E = 3.0 + 2.5 / np.log(1.0 / eps)
    a, b = fit_log_rate(eps, E)[:2]
    assert a == pytest.approx(3.0, abs=1e-12) and b == pytest.approx(2.5, abs=1e-10)
    assert verdict(3.2, 3.0, 0.1) and not verdict(3.4, 3.0, 0.1)
    assert monotone_up_to([3.0, 2.5, 2.6], 0.2) and not monotone_up_to([3.0, 2.5, 2.9], 0.2)


def _run(tmp_path, *argv, capsys=None):
    out = tmp_path / "out"
    rc = main([*argv, "--out", str(out)])
    return rc, out


@pytest.mark.parametrize("name", ["kernel-check", "line-tension", "gamma-limit-1d", "energy"])
def test_cli_experiments_pass(tmp_path, capsys, name):
    rc, out = _run(tmp_path, name)
    assert rc == EXIT_OK
    assert capsys.readouterr().out.strip() == f"{name}: PASS"
    doc = json.loads((out / "results.json").read_text())
    assert doc["experiment"] == name and doc["passed"] is True
    assert (out / "table.csv").exists() and (out / "log.txt").exists()


def test_cli_gamma_limit_2d_grid_skips(tmp_path, capsys):
    p = _ini(tmp_path, "[run]\neps = 1e-1, 5e-2\nresolution = 64\nmethod = grid\n")
    rc, out = _run(tmp_path, "gamma-limit-2d", "--config", str(p))
    log = (out / "log.txt").read_text()
    assert "skipped" in log and rc in (EXIT_OK, EXIT_FAIL)


def test_cli_relax_sweep(tmp_path):
    p = _ini(tmp_path, "[relax]\npoisson = 0.3\ns = 1, 1\nsweep = 8\n")
    rc, out = _run(tmp_path, "relax", "--config", str(p), "--sweep-theta")
    assert rc == EXIT_OK
    rows = list(csv.reader((out / "table.csv").open()))
    assert rows[0] == ["theta", "gamma0", "relaxed", "construction"]
    assert len(rows) == 9
    assert all(float(r[2]) <= float(r[1]) + 1e-9 for r in rows[1:])
    zig = [r for r in rows[1:] if r[3] == "zigzag"]
    assert {round(float(r[0]), 12) for r in zig} >= {0.0, round(math.pi / 2, 12)}


def test_cli_relax_records(tmp_path):
    p = _ini(tmp_path, "[relax]\npoisson = 0.3\ns = 1, 1\nnormal_deg = 45\n")
    rc, out = _run(tmp_path, "relax", "--config", str(p))
    doc = json.loads((out / "results.json").read_text())
    rec = doc["records"]
    assert rc == EXIT_OK
    assert rec["parallel"]["value"] == pytest.approx(rec["parallel"]["gamma0"] - 2 * rec["off_diagonal"], rel=1e-12)
    assert rec["ellipticity"]["relaxed"]["violations"] == []
    assert rec["ellipticity"]["unrelaxed"]["violations"]


def test_cli_scan_scales_deterministic(tmp_path):
    p = _ini(tmp_path, "[run]\nresolution = 64\nfield = random\nk = 4\n")
    outs = []
    for j in range(2):
        out = tmp_path / f"o{j}"
        assert main(["scan-scales", "--config", str(p), "--seed", "5", "--out", str(out)]) == EXIT_OK
        outs.append(out)
    for f in ("results.json", "table.csv", "log.txt"):
        assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
    out = tmp_path / "o2"
    main(["scan-scales", "--config", str(p), "--seed", "6", "--out", str(out)])
    assert (out / "results.json").read_bytes() != (outs[0] / "results.json").read_bytes()


def test_cli_field_file(tmp_path):
    vals = np.zeros((64, 64, 1))
    vals[32:] = 1.0
    write_binary(SlipField(vals, 1.0 / 64), tmp_path / "f.bin")
    p = _ini(tmp_path, "[run]\nresolution = 64\nfield = f.bin\nk = 4\n")
    rc, out = _run(tmp_path, "scan-scales", "--config", str(p))
    assert rc == EXIT_OK


def test_cli_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == EXIT_USAGE
    assert main(["relax", "--config", str(tmp_path / "none.ini")]) == EXIT_USAGE
    p = _ini(tmp_path, "[run]\nprofile = missing_table.csv\n")
    assert main(["line-tension", "--config", str(p), "--out", str(tmp_path)]) == EXIT_PROFILE
    p = _ini(tmp_path, "[run]\neps = 1e-2, 1e-2\n")
    assert main(["energy", "--config", str(p)]) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "[run] eps" in err and "missing_table.csv" in err


def test_console_script(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "dislo.harness.cli", "kernel-check", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert r.returncode == 0 and r.stdout.strip() == "kernel-check: PASS"
    assert set(EXPERIMENTS) >= {"kernel-check", "scan-scales"}
