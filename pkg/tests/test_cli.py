import configparser

import numpy as np
import pytest

from ffpat import cli
from ffpat.errors import DivergenceError
from ffpat.io import read_csv, read_field, read_sinogram
from ffpat.pipeline import ExperimentConfig

from conftest import small_config


def _config_file(tmp_path, **kw):
    path = tmp_path / "exp.ini"
    path.write_text(small_config(**kw).to_ini())
    return path


def test_run_writes_artifacts(tmp_path, capsys):
    cfg = _config_file(tmp_path, solvers=("cgne", "fbs"))
    out = tmp_path / "out"
    code = cli.main(["--config", str(cfg), "--out", str(out), "--snapshots", "5"])
    assert code == 0
    for name in ("truth.f64", "truth.hdr", "truth.png", "data_clean.sino", "data_noisy.sino",
                 "data_noisy.hdr", "cgne.csv", "cgne_timing.csv", "cgne_best.f64", "cgne_best.png",
                 "fbs.csv", "summary.txt", "config.ini", "setup.png", "errors.png",
                 "reconstructions.png"):
        assert (out / name).exists(), name
    assert (out / "wave_snapshots" / "u_00005.f64").exists()
    assert (out / "cgne_iter0005.f64").exists()
    header, data = read_csv(out / "cgne.csv")
    assert header == ["iter", "residual", "rel_error"] and len(data) == 10
    truth, grid, role = read_field(out / "truth.f64")
    assert grid.n == 21 and role == "source"
    sin, spec = read_sinogram(out / "data_noisy.sino")
    assert np.all(sin.values[~sin.mask] == 0)
    assert "best error" in capsys.readouterr().out


def test_summary_round_trips_config(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["--config", str(_config_file(tmp_path)), "--out", str(out),
                     "--solver", "cgne", "--angles", "limited", "--noise", "0.01",
                     "--seed", "4", "--no-figures"]) == 0
    text = (out / "summary.txt").read_text()
    cfg = ExperimentConfig.from_ini(text)
    assert cfg.angular_range == (45.0, 180.0) and cfg.noise == 0.01 and cfg.seed == 4
    assert cfg.solvers == ("cgne",)
    cp = configparser.ConfigParser()
    cp.read_string(text)
    summary = cp["summary"]
    assert float(summary["cgne_best_error"]) > 0
    assert "mean(|y|)" in summary["noise_rule"]


def test_all_solvers_small(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["--config", str(_config_file(tmp_path)), "--out", str(out),
                     "--solver", "all", "--no-figures"]) == 0
    for name in ("cgne", "landweber", "sd", "fbs", "cp", "neumann"):
        header, data = read_csv(out / f"{name}.csv")
        assert np.all(np.isfinite(data[:, 1]))


def test_runs_are_byte_identical(tmp_path):
    cfg = _config_file(tmp_path, solvers=("cgne", "cp"))
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert cli.main(["--config", str(cfg), "--out", str(o), "--no-figures"]) == 0
    for name in ("cgne.csv", "cp.csv", "data_noisy.sino", "cgne_best.f64"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nobject_n = 0\n")
    assert cli.main(["--config", str(bad)]) == 2
    assert "configuration error" in capsys.readouterr().err
    assert cli.main(["--config", str(tmp_path / "missing.ini")]) == 2


def test_wrap_around_is_config_error(tmp_path):
    cfg = _config_file(tmp_path, T=4.5, nt=90)
    assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_verify_usage_errors(tmp_path):
    assert cli.main(["--verify", "everything"]) == 2
    bad = tmp_path / "zero.ini"
    bad.write_text("[experiment]\nobject_n = 0\nsim_n = 0\n")
    assert cli.main(["--config", str(bad), "--verify", "oracles"]) == 2


def test_divergence_exit_code(tmp_path, monkeypatch, capsys):
    import ffpat.experiment as exp

    def boom(*a, **k):
        err = DivergenceError("non-finite residual", step=7)
        err.stage = "solver cgne"
        raise err

    monkeypatch.setattr(exp, "run_experiment", boom)
    assert cli.main(["--config", str(_config_file(tmp_path))]) == 3
    assert "solver cgne" in capsys.readouterr().err


def test_verify_contraction_small(tmp_path, capsys):
    cfg = _config_file(tmp_path)
    assert cli.main(["--config", str(cfg), "--verify", "contraction"]) == 0
    assert "PASS" in capsys.readouterr().out


def test_bad_angles_flag():
    with pytest.raises(SystemExit):
        cli.main(["--angles", "sideways"])
