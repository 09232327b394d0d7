import csv
import math
import re
from pathlib import Path

import pytest

from polsqueeze.cli import ConfigError, format_value, load_config, main, render_csv


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def test_format_value():
    assert format_value(0.5) == "0.5"
    assert format_value(2.5e-4) == "2.5000000000e-04"
    assert format_value(0) == "0"
    assert format_value(True) == "true"
    assert format_value(float("inf")) == "inf"
    assert format_value(float("nan")) == "nan"


def test_render_csv_header():
    text = render_csv(("a", "b"), [{"a": 1.0, "b": 1e-5}])
    assert text.splitlines() == ["a,b", "1.0,1.0000000000e-05"]


def test_config_file_and_overrides(tmp_path):
    cfg_file = tmp_path / "run.ini"
    cfg_file.write_text("[model]\nname = opo\n[opo]\npump = 2.5\n")
    cfg = load_config(cfg_file, ["opo.chi=0.5"])
    assert cfg.model == "opo"
    assert cfg.opo_params().pump == 2.5
    assert cfg.opo_params().chi == 0.5
    assert load_config(cfg_file, model="chi3").model == "chi3"


def test_readme_config_example_loads(tmp_path):
    readme = (Path(__file__).parents[1] / "README.md").read_text()
    block = re.search(r"```ini\n(.*?)```", readme, re.S).group(1)
    cfg_file = tmp_path / "readme.ini"
    cfg_file.write_text(block)
    cfg = load_config(cfg_file)
    assert cfg.model == "chi3"
    assert cfg["sweep.variable"] == "rho2"
    assert cfg["spectrum.phi"] == "optimal"
    assert cfg.chi3_params().A == pytest.approx(1 / 3)


@pytest.mark.parametrize(
    "text",
    ["[chi3]\nfoo = 1\n", "[nope]\nx = 1\n", "[chi3]\ndelta = abc\n", "[model]\nname = dopo\n", "[chi3]\nA = 0.5\n"],
)
def test_bad_config_exits_2(tmp_path, text):
    cfg_file = tmp_path / "bad.ini"
    cfg_file.write_text(text)
    assert run(tmp_path, "steady", "--config", str(cfg_file)) == 2


def test_bad_set_flag():
    with pytest.raises(ConfigError):
        load_config(None, ["delta=3"])
    assert main(["steady", "--set", "chi3.nope=1"]) == 2


def test_thresholds_flip_at_sqrt3(tmp_path):
    code = run(tmp_path, "thresholds", "--set", "thresholds.stop=3", "--set", "thresholds.points=301")
    assert code == 0
    rows = read(tmp_path / "thresholds.csv")
    assert list(rows[0]) == ["delta", "rho2_min", "rho2_max", "exists"]
    first = next(float(r["delta"]) for r in rows if r["exists"] == "true")
    assert math.sqrt(3) < first <= math.sqrt(3) + 0.01
    spot = next(r for r in rows if float(r["delta"]) == 2.0)
    assert float(spot["rho2_min"]) == pytest.approx(0.5)
    assert float(spot["rho2_max"]) == pytest.approx(5 / 6)


def test_thresholds_opo_and_empty_grid(tmp_path):
    assert run(tmp_path, "thresholds", "--model", "opo", "--set", "opo.gamma_p=2") == 0
    rows = read(tmp_path / "thresholds.csv")
    assert len(rows) == 1 and float(rows[0]["pump_threshold"]) == 2.0
    assert run(tmp_path, "thresholds", "--set", "thresholds.points=0") == 2


def test_steady_outside_region_is_trivial(tmp_path):
    args = ["--set", "chi3.delta=1", "--set", "sweep.start=0.1", "--set", "sweep.stop=2", "--set", "sweep.points=4"]
    assert run(tmp_path, "steady", *args) == 0
    rows = read(tmp_path / "steady.csv")
    assert len(rows) == 4
    assert all(r["bright_exists"] == "false" and float(r["abs_alpha_plus"]) == 0 for r in rows)


def test_steady_inside_region(tmp_path):
    args = ["--set", "sweep.start=0.6", "--set", "sweep.stop=0.8", "--set", "sweep.points=3"]
    assert run(tmp_path, "steady", *args) == 0
    assert all(r["bright_exists"] == "true" for r in read(tmp_path / "steady.csv"))


def test_spectrum_dark_mode(tmp_path):
    assert run(tmp_path, "spectrum", "--set", "spectrum.points=41") == 0
    rows = read(tmp_path / "spectrum.csv")
    assert list(rows[0]) == ["omega_over_gamma_s", "V"]
    assert float(rows[0]["omega_over_gamma_s"]) == 0
    assert float(rows[0]["V"]) < 1e-6
    assert abs(float(rows[-1]["V"]) - 1) < 1e-3


def test_spectrum_twin_and_missing_bright_state(tmp_path):
    assert run(tmp_path, "spectrum", "--model", "opo", "--set", "spectrum.mode=twin", "--set", "spectrum.points=11") == 0
    assert float(read(tmp_path / "spectrum.csv")[0]["V"]) < 1e-6
    assert run(tmp_path, "spectrum", "--set", "chi3.rho2=0.1") == 1


def test_squeeze_sweep(tmp_path):
    assert run(tmp_path, "squeeze-sweep", "--set", "sweep.points=5", "--set", "sweep.start=0.55", "--set", "sweep.stop=0.8") == 0
    rows = read(tmp_path / "squeeze_sweep.csv")
    assert list(rows[0]) == ["delta", "rho2", "g", "gamma_s", "V_min_at_0", "phi_opt"]
    assert all(float(r["V_min_at_0"]) < 1e-6 for r in rows)


def test_oracle_command(tmp_path, capsys):
    assert run(tmp_path, "oracle", "--model", "opo") == 0
    rows = read(tmp_path / "oracle.csv")
    assert list(rows[0]) == ["point", "moment", "oracle", "linearized", "rel_dev"]
    assert max(float(r["rel_dev"]) for r in rows) < 1e-2
    assert run(tmp_path, "oracle", "--set", "oracle.chi3_rho2=80") == 2


def test_verify_fails_on_violation(tmp_path):
    # an impossible tolerance must turn into a failed check and exit code 1
    assert run(tmp_path, "verify", "--set", "tolerances.oracle=1e-3") == 1
    failed = [r["check"] for r in read(tmp_path / "verify.csv") if r["passed"] == "false"]
    assert failed == ["oracle_chi3"]
