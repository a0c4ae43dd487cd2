import json
import subprocess
import sys

import pytest

from levyhom.cli import DEFAULTS, EXPERIMENTS, load_config, main, run
from levyhom.errors import ValidationError


def write(tmp_path, body, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(body)
    return p


def result(out, experiment):
    return json.loads((out / f"{experiment}.json").read_text()), (out / f"{experiment}.csv").read_text()


def test_every_experiment_has_defaults_and_a_runner():
    assert set(DEFAULTS) == set(EXPERIMENTS)


def test_m2_constant_coefficient(tmp_path):
    cfg = write(tmp_path, """
[experiment]
name = "m2"
coefficient = { kind = "constant", c = 2.0 }
deltas = [0.5, 0.25, 0.125]
""")
    assert run("m2", cfg, tmp_path) == 0
    summary, body = result(tmp_path, "m2")
    assert summary["passed"] is True
    assert summary["schema_version"] == 1 and summary["experiment"] == "m2"
    assert all(r["rel_err"] < 1e-9 for r in summary["rows"])
    assert body.splitlines()[0] == "delta,xi,value,limit,abs_err,rel_err,method"


def test_example1_matrix_summary(tmp_path):
    assert main(["example1", "--out", str(tmp_path)]) == 0
    summary, _ = result(tmp_path, "example1")
    ii = {(r["beta"], r["gamma"], r["delta"]): r["verdict"] for r in summary["rows"] if r["part"] == "ii"}
    assert ii[(1.0, 0.55, 0.5)] == "not_levy_measure"
    assert ii[(1.0, 0.2, 0.5)] == "levy_measure"
    assert all(v == "levy_measure" for (b, g, d), v in ii.items() if d == 1.0)


def test_exponent_scan_errors_decrease(tmp_path):
    cfg = write(tmp_path, """
[experiment]
coefficient = { kind = "example1", gamma = 0.3 }
density = { kind = "stable", beta = 1.5 }
xis = [1.0]
deltas = [0.5, 0.25, 0.125]
tolerance = 1.0
""")
    assert run("exponent-scan", cfg, tmp_path) == 0
    errs = [r["abs_err"] for r in result(tmp_path, "exponent-scan")[0]["rows"]]
    assert errs[0] > errs[1] > errs[2]


@pytest.mark.parametrize("body, field", [
    ('[experiment]\ndeltas = [0.25, 0.5]\n', "experiment.deltas"),
    ('[experiment]\ndeltas = []\n', "experiment.deltas"),
    ('[experiment]\ncoefficient = { kind = "example1", gamma = 1.5 }\n', "example1"),
    ('[experiment]\ncoefficient = { kind = "wave" }\n', "coefficient.kind"),
    ('[experiment]\nname = "vague"\n', "experiment.name"),
    ('[experiment]\ntolerence = 0.1\n', "experiment.tolerence"),
    ('[other]\nx = 1\n', "config"),
    ('[experiment\n', "TOML"),
    ('[experiment]\ntolerance = "tight"\n', "experiment.tolerance"),
    ('[experiment]\nquadrature = { rel_tol = -1.0 }\n', "quadrature"),
])
def test_validation_errors_name_the_field(tmp_path, capsys, body, field):
    cfg = write(tmp_path, body)
    assert run("m2", cfg, tmp_path / "out") == 2
    assert field in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_precondition_violation_is_a_validation_error(tmp_path, capsys):
    cfg = write(tmp_path, '[experiment]\ncoefficient = { kind = "example1", gamma = 0.6 }\np = 2.0\n')
    assert run("weak-lp", cfg, tmp_path) == 2
    assert "p_max" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert run("m2", tmp_path / "nope.toml", tmp_path) == 2
    assert "cannot read" in capsys.readouterr().err


def test_gate_failure_exits_one(tmp_path):
    cfg = write(tmp_path, '[experiment]\ndeltas = [0.5, 0.25]\ntolerance = 1e-9\n')
    assert run("m2", cfg, tmp_path) == 1
    assert result(tmp_path, "m2")[0]["passed"] is False


def test_expected_verdict_mismatch_fails(tmp_path):
    cfg = write(tmp_path, """
[experiment]
coefficient = { kind = "example1", gamma = 0.55 }
density = { kind = "example1ii", beta = 1.0, gamma = 0.55 }
deltas = [0.5]
expected = "levy_measure"
""")
    assert run("integrability", cfg, tmp_path) == 1


def test_not_levy_measure_surfaces_as_gate_failure(tmp_path):
    cfg = write(tmp_path, """
[experiment]
coefficient = { kind = "example1", gamma = 0.55 }
density = { kind = "stable", beta = 1.0 }
deltas = [0.5]
""")
    # the plain stable density gives a Levy measure; the shifted-factor density at delta = 1/2 does not
    assert run("m2", cfg, tmp_path) == 0
    cfg = write(tmp_path, """
[experiment]
coefficient = { kind = "example1", gamma = 0.55 }
density = { kind = "example1ii", beta = 1.0, gamma = 0.55 }
deltas = [0.5]
""")
    assert run("m2", cfg, tmp_path) == 1
    summary, body = result(tmp_path, "m2")
    assert "NotLevyMeasureError" in summary["reason"]
    assert body.startswith("reason\n")


def test_seed_override_and_determinism(tmp_path):
    cfg = write(tmp_path, """
[experiment]
times = [0.5, 1.0]
xis = [0.5, 1.0, 2.0]
n_samples = 5000
seed = 1
""")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    run("simulate-cf", cfg, a, threads=1)
    run("simulate-cf", cfg, b, threads=3)
    run("simulate-cf", cfg, c, seed=2)
    assert (a / "simulate-cf.csv").read_bytes() == (b / "simulate-cf.csv").read_bytes()
    assert (a / "simulate-cf.csv").read_bytes() != (c / "simulate-cf.csv").read_bytes()
    assert result(c, "simulate-cf")[0]["config"]["seed"] == 2


def test_seed_rejected_for_deterministic_experiment(tmp_path, capsys):
    assert run("lp-bound", None, tmp_path, seed=3) == 2
    assert "--seed" in capsys.readouterr().err


def test_output_dir_from_config(tmp_path):
    cfg = write(tmp_path, f'[experiment]\noutput_dir = "{(tmp_path / "from_cfg").as_posix()}"\n')
    assert run("lp-bound", cfg) == 0
    assert (tmp_path / "from_cfg" / "lp-bound.csv").exists()


def test_load_config_overlays_defaults(tmp_path):
    cfg = load_config("vague", write(tmp_path, "[experiment]\ntolerance = 0.5\n"))
    assert cfg["tolerance"] == 0.5 and cfg["deltas"] == DEFAULTS["vague"]["deltas"]
    with pytest.raises(ValidationError):
        load_config("vague", write(tmp_path, "[experiment]\nseed = 3\n"))


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "levyhom.cli", "lp-bound", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "lp-bound: PASS" in proc.stdout
    bad = subprocess.run([sys.executable, "-m", "levyhom.cli", "bogus"], capture_output=True, text=True)
    assert bad.returncode == 2
