import csv

import pytest

from gp_locate import cli
from gp_locate.config import ScenarioConfig, save_config


@pytest.fixture
def config_file(tmp_path):
    cfg = ScenarioConfig(num_rrh=4, num_train=25, num_test=4, mc_trials=2,
                         shadowing_variances=(1.0, 2.0), train_restarts=1,
                         pathloss_mode="continuous", master_seed=3)
    path = tmp_path / "small.json"
    save_config(cfg, path)
    return path


def tree(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


def test_sweep_twice_identical(config_file, tmp_path, capsys):
    for name in ("a", "b"):
        code = cli.main(["sweep", "--config", str(config_file), "--seed", "7", "--out",
                         str(tmp_path / name), "--no-plots"])
        assert code == 0
    a, b = tree(tmp_path / "a"), tree(tmp_path / "b")
    assert a == b
    assert {"detail.csv", "aggregate.csv", "bars.csv", "models/model_x_M4.json"} <= set(a)
    first = a["detail.csv"].decode().splitlines()[1].split(",")
    assert first[-1] == "7"


def test_seed_changes_output(config_file, tmp_path):
    cli.main(["sweep", "--config", str(config_file), "--seed", "7", "--out", str(tmp_path / "a"), "--no-plots"])
    cli.main(["sweep", "--config", str(config_file), "--seed", "8", "--out", str(tmp_path / "b"), "--no-plots"])
    assert (tmp_path / "a/detail.csv").read_bytes() != (tmp_path / "b/detail.csv").read_bytes()


def test_global_flags_before_subcommand(config_file, tmp_path):
    code = cli.main(["--config", str(config_file), "--out", str(tmp_path / "o"), "--methods", "cgp",
                     "sweep", "--no-plots"])
    assert code == 0
    with open(tmp_path / "o/detail.csv", newline="") as fh:
        assert {r["method"] for r in csv.DictReader(fh)} == {"CGP"}


def test_simulate_train_predict_pipeline(config_file, tmp_path):
    out = tmp_path / "run"
    base = ["--config", str(config_file), "--out", str(out)]
    assert cli.main(["simulate", *base, "--sigma-z2", "2.0"]) == 0
    assert (out / "train_rss_M4.csv").is_file() and (out / "rrh.csv").is_file()
    assert cli.main(["train", *base]) == 0
    assert (out / "model_x_M4.json").is_file()
    code = cli.main(["predict", *base, "--test-rss", str(out / "test_rss_M4_s2_t0.csv"),
                     "--sigma-z2", "2.0", "--truth", str(out / "test_locations.csv")])
    assert code == 0
    with open(out / "predictions_nagp.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 and rows[0]["method"] == "NaGP" and rows[0]["true_x"]


def test_predict_without_models_is_actionable(config_file, tmp_path, capsys):
    out = tmp_path / "run"
    cli.main(["simulate", "--config", str(config_file), "--out", str(out)])
    code = cli.main(["predict", "--config", str(config_file), "--out", str(tmp_path / "empty"),
                     "--test-rss", str(out / "test_rss_M4_s1_t0.csv")])
    assert code == 1
    assert "gp-locate train" in capsys.readouterr().err


def test_report_reaggregates_hand_built_detail(tmp_path):
    detail = tmp_path / "detail.csv"
    detail.write_text(
        "method,M,sigma_z2,trial,rmse_m,lpd,coverage_2sigma,bcrlb_m,seed\n"
        "CGP,10,2.0,0,3.0,-10.0,0.2,2.5,1\n"
        "CGP,10,2.0,1,5.0,-14.0,0.4,3.5,1\n"
    )
    assert cli.main(["report", "--detail", str(detail), "--out", str(tmp_path / "r"), "--no-plots"]) == 0
    with open(tmp_path / "r/aggregate.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    r = rows[0]
    assert (r["method"], r["M"], r["sigma_z2"], r["n_trials"]) == ("CGP", "10", "2.0", "2")
    assert float(r["rmse_m_mean"]) == 4.0 and float(r["lpd_mean"]) == -12.0
    assert float(r["coverage_2sigma_mean"]) == pytest.approx(0.3)
    assert float(r["rmse_m_se"]) == pytest.approx(1.0)


@pytest.mark.parametrize("argv", [["sweep", "--bogus"], ["frobnicate"], []])
def test_usage_errors_exit_1(argv, capsys):
    assert cli.main(argv) == 1
    assert "usage:" in capsys.readouterr().err


def test_bad_config_exit_1(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"num_rrh": 0}')
    assert cli.main(["sweep", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "num_rrh" in capsys.readouterr().err


def test_unknown_method_exit_1(config_file, tmp_path):
    assert cli.main(["sweep", "--config", str(config_file), "--methods", "svm",
                     "--out", str(tmp_path / "o")]) == 1


def test_missing_input_file_exit_3(config_file, tmp_path):
    code = cli.main(["report", "--detail", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")])
    assert code == 3


def test_numerical_failure_exit_2(config_file, tmp_path, monkeypatch):
    from gp_locate import harness
    from gp_locate.errors import NumericalError

    def fail(*args, **kwargs):
        raise NumericalError("factorization failed", jitter=0.1)

    monkeypatch.setattr(harness, "run_experiment", fail)
    assert cli.main(["sweep", "--config", str(config_file), "--out", str(tmp_path / "o")]) == 2


def test_bundled_config_by_name():
    args = cli.build_parser().parse_args(["sweep", "--config", "table1.json", "--seed", "7"])
    cfg = cli.resolve_config(args)
    assert cfg.master_seed == 7 and cfg.num_rrh == 30


def test_help_exits_zero(capsys):
    assert cli.main(["--help"]) == 0
