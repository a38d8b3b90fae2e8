import json

import pytest
from click.testing import CliRunner

from runlamina import cli


@pytest.fixture
def config_file(small_config, tmp_path):
    path = tmp_path / "small.json"
    path.write_text(small_config.to_json())
    return path


def test_report_without_runs_fails(tmp_path):
    result = CliRunner().invoke(cli, ["report", "--out", str(tmp_path)])
    assert result.exit_code == 1


def test_unknown_preset(tmp_path):
    result = CliRunner().invoke(cli, ["--quiet", "check", "--preset", "enormous", "--out", str(tmp_path)])
    assert result.exit_code == 1


def test_run_then_report(config_file, tmp_path):
    out = tmp_path / "runs"
    runner = CliRunner()
    result = runner.invoke(cli, ["--quiet", "run", "--config", str(config_file), "--out", str(out)], env={"LAMINA__SEED": "11"})
    assert result.exit_code == 0, result.output

    [record] = list(out.glob("*/record.csv"))
    savedir = record.parent
    info = json.loads((savedir / f"{savedir.name}-info.json").read_text())
    assert info["status"] == "finished"
    assert info["seed"] == 11
    assert info["steps"] == 4
    assert (savedir / "ledger.csv").is_file()
    assert len(list((savedir / "snapshots").glob("*.lamf"))) == 10
    assert "finished" in (out / "manifest.txt").read_text()

    result = runner.invoke(cli, ["--quiet", "report", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert (out / "runs.csv").is_file()


def test_reruns_write_identical_tables(config_file, tmp_path):
    runner = CliRunner()
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        result = runner.invoke(cli, ["--quiet", "run", "--config", str(config_file), "--out", str(out), "--seed", "3"])
        assert result.exit_code == 0, result.output
        [record] = list(out.glob("*/record.csv"))
        outputs.append((record.parent.name, record.read_bytes(), (record.parent / "ledger.csv").read_bytes()))
    assert outputs[0] == outputs[1]
