import json

import pytest

from ogamus.cli import main
from ogamus.config import RunConfig, load_config


def test_yaml_overrides(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("profile: ithor\nepsilon: 0.3\nmerge_distance: 0.15\nmax_iter: 50\n"
                 "recall: 0.8\non_flip_rate: 0.0\n")
    run = load_config(f)
    assert run.epsilon == 0.3 and run.resolved_max_iter() == 50
    assert run.predictors().merge_distance == 0.15 and run.predictors().on_flip_rate == 0.0
    assert run.detector().recall == 0.8 and run.detector().precision == 0.5099


def test_unknown_key_rejected(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("epsilonn: 0.3\n")
    with pytest.raises(ValueError, match="unknown config keys"):
        load_config(f)


def test_cli_overrides_beat_file(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("profile: ithor\n")
    assert load_config(f, profile="perfect").profile == "perfect"


def test_robothor_defaults():
    run = RunConfig(profile="robothor")
    assert run.resolved_max_iter() == 500 and run.resolved_manipulation() == 1.0
    assert run.resolved_scenes() == ("apartment",)
    assert run.predictors().close_distance == 1.0


def test_bad_values_rejected():
    with pytest.raises(ValueError):
        RunConfig(profile="habitat")
    with pytest.raises(ValueError):
        RunConfig(cell_size=0.5)


def test_cli_run_metrics_replay_render(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--task", "open", "--episodes", "3", "--seed", "2", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "Success" in text and "SPL" in text
    rows = [json.loads(x) for x in (out / "records.jsonl").read_text().splitlines()]
    assert len(rows) == 3 and (out / "summary.txt").exists()

    assert main(["metrics", "--in", str(out)]) == 0
    assert "Success" in capsys.readouterr().out

    trace = sorted((out / "traces").iterdir())[0]
    assert main(["replay", "--trace", str(trace)]) == 0
    assert "reproduced the recorded trace exactly" in capsys.readouterr().out

    assert main(["render", "--trace", str(trace), "--out", str(tmp_path / "m.txt")]) == 0
    assert "A" in (tmp_path / "m.txt").read_text()
    assert main(["render", "--trace", str(trace), "--format", "pgm",
                 "--out", str(tmp_path / "m.pgm")]) == 0
    assert (tmp_path / "m.pgm").read_bytes().startswith(b"P5")


def test_cli_replay_detects_tampering(tmp_path, capsys):
    out = tmp_path / "run"
    main(["run", "--task", "objnav", "--episodes", "1", "--seed", "3", "--out", str(out)])
    trace = next((out / "traces").iterdir())
    lines = trace.read_text().splitlines()
    step = json.loads(lines[1])
    step["op"] = "Fly"
    lines[1] = json.dumps(step, sort_keys=True, separators=(",", ":"))
    trace.write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert main(["replay", "--trace", str(trace)]) == 1
    assert "diverged" in capsys.readouterr().out


def test_cli_random_policy_and_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("profile: ithor\nmax_iter: 30\n")
    out = tmp_path / "rnd"
    assert main(["run", "--task", "objnav", "--episodes", "2", "--policy", "random",
                 "--config", str(cfg), "--out", str(out), "--no-snapshots"]) == 0
    assert "objnav/ithor/random" in capsys.readouterr().out
    header = json.loads(next((out / "traces").iterdir()).read_text().splitlines()[0])
    assert header["run"]["max_iter"] == 30 and header["policy"] == "random"


def test_cli_requires_a_command():
    with pytest.raises(SystemExit):
        main([])
