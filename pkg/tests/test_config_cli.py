import subprocess
import sys

import pytest

from crsim.cli import CSV_HEADER, csv_text, main, run_experiment, summarize
from crsim.config import DEFAULT_SEED, Config, ConfigError, dump_config, parse_config, parse_config_text


def test_empty_file_gives_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = parse_config(path, env={})
    assert cfg == Config()
    assert (cfg.num_channels, cfg.sim_time_s, cfg.frame_s, cfg.seed) == (50, 3600.0, 0.1, DEFAULT_SEED)


def test_bad_value_reports_line_number():
    with pytest.raises(ConfigError, match=r":3: .*sim_time_s"):
        parse_config_text("# comment\nrounds = 4\nsim_time_s = -1\n")


def test_unknown_key_and_malformed_line():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("frames = 3")
    with pytest.raises(ConfigError, match=":1:"):
        parse_config_text("rounds 3")
    with pytest.raises(ConfigError):
        parse_config_text("su_arrival = poisson")


def test_value_forms():
    values = parse_config_text(
        "pu_on_mean_range_s = 2, 4\nsu_arrival = interval(0.5)\nmodel_all_pu = yes\nseed = 0x10\n"
    )
    assert values == {"pu_on_mean_range_s": (2.0, 4.0), "su_arrival": "interval(0.5)", "model_all_pu": True, "seed": 16}


def test_precedence(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("rounds = 7\n")
    env = {"CRSIM_SEED": "99"}
    cfg = parse_config(path, {"rounds": 3}, env=env)
    assert cfg.rounds == 3 and cfg.seed == 99
    path.write_text("seed = 5\n")
    assert parse_config(path, {"rounds": None}, env=env).seed == 5
    assert parse_config(path, {"seed": 6}, env=env).seed == 6


def test_dump_round_trips():
    cfg = Config(su_count=4, pu_off_mean_range_s=(0.5, 2.0), gate_on_connection=True)
    assert Config(**parse_config_text(dump_config(cfg))) == cfg


def test_single_round_has_undefined_ci():
    results, summary = run_experiment(Config(rounds=1, sim_time_s=5.0).validate())
    assert summary.ci95 is None and summary.relative_ci is None
    assert "undefined" in summary.text()
    assert csv_text(results, summary).splitlines()[-1].endswith("ci95_halfwidth=nan,relative_ci_pct=nan")


def test_csv_shape_and_determinism():
    cfg = Config(rounds=3, sim_time_s=10.0, seed=4).validate()
    a = csv_text(*run_experiment(cfg))
    b = csv_text(*run_experiment(cfg))
    assert a == b
    rows = a.splitlines()
    assert rows[0] == ",".join(CSV_HEADER)
    assert len(rows) == 5 and rows[-1].startswith("# rounds=3,mean=")
    assert [r.split(",")[0] for r in rows[1:4]] == ["0", "1", "2"]


def test_parallel_rounds_match_sequential():
    cfg = Config(rounds=3, sim_time_s=10.0, seed=4).validate()
    seq, _ = run_experiment(cfg)
    par, _ = run_experiment(cfg, jobs=2)
    assert [r.mean_energy_mj for r in seq] == [r.mean_energy_mj for r in par]


def test_summarize_matches_aggregate():
    cfg = Config(rounds=2, sim_time_s=5.0).validate()
    results, summary = run_experiment(cfg)
    assert summarize(results) == summary
    assert summary.rounds == 2


def test_main_writes_csv_and_events(tmp_path, capsys):
    out, ev = tmp_path / "r.csv", tmp_path / "ev.log"
    code = main(["run", "--rounds", "2", "--sim-time", "5", "--seed", "3", "--out", str(out), "--events", str(ev), "--timestamps"])
    assert code == 0
    assert "mean energy per SU per frame" in capsys.readouterr().out
    assert out.read_text().startswith("round,seed,")
    first = ev.read_text().splitlines()[0]
    assert "|" in first


def test_main_bad_config_exits_nonzero(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("sim_time_s = -1\n")
    assert main(["run", "--config", str(path)]) == 2
    assert "crsim: error:" in capsys.readouterr().err


def test_console_script_runs(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "crsim.cli", "run", "--rounds", "2", "--sim-time", "2", "--backend", "python"],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert proc.stdout.splitlines()[0] == ",".join(CSV_HEADER)
    assert "95% CI" in proc.stderr
