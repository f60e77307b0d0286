import csv
import io
import math
from pathlib import Path

import pytest

from mmx import chebyshev
from mmx.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_roots_bilinear(capsys):
    assert main(["roots", "--kind", "bilinear", "--T", "2", "--m", "1", "--M", "300"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["index", "root", "stepsize_magnitude"]
    c = math.cos(math.pi / 4)
    assert float(rows[1][1]) == pytest.approx(150.5 + 149.5 * c)
    assert float(rows[2][2]) == pytest.approx((150.5 - 149.5 * c) ** -0.5)
    assert rows[3][0] == "extremal_rate"
    assert float(rows[3][1]) == chebyshev.extremal_rate_bilinear(2, 1.0, 300.0)


def test_roots_quadratic(capsys):
    assert main(["roots", "--kind", "quadratic", "--T", "1", "--L", "1"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows[1][2]) == pytest.approx(2 / math.sqrt(3))
    assert float(rows[-1][1]) == pytest.approx(1 / 3)


def test_roots_missing_bounds(capsys):
    with pytest.raises(SystemExit):
        main(["roots", "--kind", "bilinear", "--T", "2"])


@pytest.mark.parametrize("check", ["two-step", "expansion", "divergence", "hamiltonian", "tightness", "cycling"])
def test_verify(check, capsys):
    assert main(["verify", check, "--trials", "4", "--seed", "2"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == ["trial", "status", "residual_or_margin"]
    assert all(r[1] == "pass" for r in rows[1:])


def test_run_and_compare(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", str(CONFIGS / "random_bilinear.toml"), "--out", str(out), "--gnuplot-stub"]) == 0
    assert (out / "trace_0000.csv").exists() and (out / "plot.gp").exists()
    capsys.readouterr()
    cmp = tmp_path / "cmp.csv"
    args = ["compare", str(CONFIGS / "xy_constant.toml"), str(CONFIGS / "xy_alternating.toml")]
    assert main(args + ["--out", str(cmp), "--gnuplot-stub"]) == 0
    rows = _rows(cmp.read_text())
    assert rows[0][0] == "algorithm" and {r[0] for r in rows[1:]} == {"constant", "alternating"}
    assert cmp.with_suffix(".gp").exists()
    assert main(args) == 0
    assert capsys.readouterr().out.startswith("algorithm,")


def test_bad_config_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[problem]\nkind = 'nope'\n[algorithm]\nkind='gda'\n")
    assert main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "error" in capsys.readouterr().err
