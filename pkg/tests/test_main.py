import csv
import json
import math

import pytest

import main as cli
from config import get_settings
from continuation import ContinuationError


def read_rows(path):
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


def report(text):
    pairs = (line.split(" = ", 1) for line in text.splitlines() if " = " in line)
    return {name: value for name, value in pairs}


def test_eigen_disk(tmp_path, capsys):
    assert cli.main(["eigen", "--domain", "disk2d", "--out", str(tmp_path)]) == 0
    values = report(capsys.readouterr().out)
    assert values["domain"] == "disk2d"
    assert float(values["lambda1"]) == pytest.approx(5.7831859630, abs=1e-9)
    assert float(values["lambda2"]) == pytest.approx(14.6819706, abs=1e-6)
    assert float(values["measure"]) == pytest.approx(math.pi)
    rows = read_rows(tmp_path / "eigen-disk2d.csv")
    assert rows[0] == ["quantity", "value"]
    assert [row[0] for row in rows[1:]] == ["lambda1", "lambda2", "nu1", "c0", "omega_n", "phi1_origin", "measure"]


def test_eigen_rectangle(tmp_path, capsys):
    assert cli.main(["eigen", "--domain", "rect 1 2", "--out", str(tmp_path)]) == 0
    values = report(capsys.readouterr().out)
    assert values["lambda1"] == "12.3370055"
    assert float(values["phi1_center"]) == pytest.approx(math.sqrt(2))
    assert (tmp_path / "eigen-rect-1x2.csv").exists()


def test_eigen_ball(tmp_path, capsys):
    assert cli.main(["eigen", "--domain", "ball 3", "--out", str(tmp_path)]) == 0
    values = report(capsys.readouterr().out)
    assert float(values["nu1"]) == pytest.approx(math.pi)
    assert float(values["phi1_origin"]) == pytest.approx(math.sqrt(math.pi / 2))
    assert float(values["omega_n"]) == pytest.approx(4 * math.pi)


def test_eigen_rejects_unknown_domain(tmp_path, capsys):
    assert cli.main(["eigen", "--domain", "torus", "--out", str(tmp_path)]) == 2
    assert "rescurve: error" in capsys.readouterr().err


def test_unknown_command_is_a_usage_error():
    with pytest.raises(SystemExit) as info:
        cli.main(["plot"])
    assert info.value.code == 2


def test_asymptotic_rectangle(tmp_path):
    argv = ["asymptotic", "--formula", "rect2d", "--dims", "1", "2", "--xi-end", "30", "--points", "300"]
    assert cli.main([*argv, "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "asymptotic-rect2d.csv")
    assert rows[0] == ["xi", "mu"]
    assert len(rows) == 301
    mu = [float(row[1]) for row in rows[1:]]
    assert max(abs(value) for value in mu) <= 4 * math.sqrt(2) / math.pi + 1e-12


def test_asymptotic_default_grid(tmp_path):
    assert cli.main(["asymptotic", "--formula", "radial-n3", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "asymptotic-radial-n3.csv")
    assert len(rows) == 1001
    assert float(rows[1][0]) == 1.0
    assert float(rows[-1][0]) == 100.0


def test_asymptotic_projection_with_signed_log(tmp_path):
    argv = [
        "asymptotic",
        "--formula",
        "projection",
        "--nonlinearity",
        "sqrtsinlog",
        "--xi-start",
        "1",
        "--xi-end",
        "1000",
        "--points",
        "60",
        "--log-grid",
        "--signed-log",
        "--filter-small",
        "0.01",
        "--plot",
        "--out",
        str(tmp_path),
    ]
    assert cli.main(argv) == 0
    rows = read_rows(tmp_path / "asymptotic-projection.csv")
    assert rows[0] == ["xi", "mu", "log_xi", "signed_log_mu"]
    assert 1 < len(rows) <= 61
    for xi, mu, log_xi, log_mu in rows[1:]:
        assert abs(float(mu)) >= 0.01
        assert float(log_xi) == pytest.approx(math.log(float(xi)))
        assert float(log_mu) == pytest.approx(math.copysign(math.log1p(abs(float(mu))), float(mu)))
    svg = (tmp_path / "asymptotic-projection.svg").read_text(encoding="utf-8")
    assert "<svg" in svg


@pytest.mark.parametrize(
    "argv",
    [
        ["asymptotic", "--formula", "disk-power-sin", "--p", "2"],
        ["asymptotic", "--formula", "rect2d"],
        ["asymptotic", "--formula", "radial-n2", "--xi-start", "0"],
        ["asymptotic", "--formula", "projection", "--nonlinearity", "cubic"],
        ["asymptotic", "--formula", "parabola"],
    ],
)
def test_asymptotic_usage_errors(argv, tmp_path):
    assert cli.main([*argv, "--out", str(tmp_path)]) == 2


def test_curve_for_a_linear_problem(tmp_path):
    argv = ["curve", "--problem", "ball3-linear", "--xi-start", "-1", "--xi-end", "1", "--dxi", "1", "--mesh", "33"]
    assert cli.main([*argv, "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "ball3-linear.csv")
    assert tuple(rows[0]) == cli.CURVE_COLUMNS
    assert [float(row[0]) for row in rows[1:]] == [-1.0, 0.0, 1.0]
    for row in rows[1:]:
        assert abs(float(row[1])) <= 1e-8
        assert row[2] == "nan"
        assert int(row[3]) >= 1
        assert float(row[6]) <= float(row[7])


def test_curve_with_asymptotic_column_and_plot(tmp_path):
    argv = ["curve", "--problem", "ball3-sinu", "--xi-start", "1", "--xi-end", "2", "--dxi", "0.5", "--mesh", "65"]
    assert cli.main([*argv, "--plot", "--out", str(tmp_path)]) == 0
    rows = read_rows(tmp_path / "ball3-sinu.csv")
    assert len(rows) == 4
    assert all(math.isfinite(float(row[2])) for row in rows[1:])
    assert (tmp_path / "ball3-sinu.svg").exists()


def test_curve_unknown_problem(tmp_path, capsys):
    assert cli.main(["curve", "--problem", "torus-usinu", "--out", str(tmp_path)]) == 2
    assert "torus-usinu" in capsys.readouterr().err


def test_failed_continuation_writes_the_partial_curve(tmp_path, monkeypatch):
    original = cli.trace_curve

    def failing(problem, cfg):
        curve = original(problem, cfg)
        raise ContinuationError("no convergence", curve=curve, xi=99.0)

    monkeypatch.setattr(cli, "trace_curve", failing)
    argv = ["curve", "--problem", "ball3-linear", "--xi-start", "0", "--xi-end", "1", "--dxi", "0.5", "--mesh", "33"]
    assert cli.main([*argv, "--out", str(tmp_path)]) == 1
    assert len(read_rows(tmp_path / "ball3-linear.csv")) == 4


def test_numerical_failure_exit_code(tmp_path, monkeypatch):
    def broken(domain):
        raise RuntimeError("factorisation failed")

    monkeypatch.setattr(cli, "eigenpair_for", broken)
    assert cli.main(["eigen", "--domain", "disk2d", "--out", str(tmp_path)]) == 1


def test_check_unknown_suite(tmp_path):
    assert cli.main(["check", "--suite", "curve-torus", "--out", str(tmp_path)]) == 2
    assert cli.main(["check", "--out", str(tmp_path)]) == 2


def test_check_eigen_suite(capsys):
    assert cli.main(["check", "--suite", "eigen"]) == 0
    lines = [json.loads(line) for line in capsys.readouterr().out.splitlines() if line.startswith("{")]
    assert lines
    assert all(line["suite"] == "eigen" and line["passed"] for line in lines)


def test_config_file_is_merged_with_flags(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(
        json.dumps({"problem": "ball3-linear", "xi_start": -1.0, "xi_end": 1.0, "dxi": 1.0, "mesh": [33]}),
        encoding="utf-8",
    )
    assert cli.main(["curve", "--config", str(config), "--dxi", "0.5", "--out", str(tmp_path)]) == 0
    assert len(read_rows(tmp_path / "ball3-linear.csv")) == 6


@pytest.mark.parametrize("content", ['{"problem": "ball3-linear", "colour": "red"}', "{not json", "[1, 2]"])
def test_bad_config_files(tmp_path, content):
    config = tmp_path / "run.json"
    config.write_text(content, encoding="utf-8")
    assert cli.main(["curve", "--config", str(config), "--out", str(tmp_path)]) == 2


def test_missing_config_file(tmp_path):
    assert cli.main(["curve", "--config", str(tmp_path / "absent.json")]) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    target = tmp_path / "env-out"
    monkeypatch.setenv("RESCURVE_OUTPUT_DIR", str(target))
    get_settings.cache_clear()
    assert cli.main(["eigen", "--domain", "ball 2"]) == 0
    assert (target / "eigen-ball2.csv").exists()
