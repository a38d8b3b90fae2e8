import csv
import math
from dataclasses import replace

import pytest

import lamina.check
from lamina.check import CheckRow, cmd_check, run_checks, write_check_csv
from lamina.errors import CheckFailure, ValidationError


def test_small_config_passes_every_check(small_config):
    rows = run_checks(small_config)
    groups = {r.group for r in rows}
    assert groups == {"params", "sandwich", "profiles", "flow", "correctors", "layer", "layer_scaling"}
    failing = [(r.group, r.name, r.value, r.detail) for r in rows if r.required and not r.passed]
    assert failing == []
    scaling = {r.name: r for r in rows if r.group == "layer_scaling"}
    assert len(scaling) == 9
    # A shear flow has no boundary divergence, so the normal part of the layer vanishes
    assert "negligible" in scaling["b_normal_linf"].detail


def test_cmd_check_writes_the_table(small_config):
    assert cmd_check(small_config) == 0
    with open(f"{small_config.output}/check.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert list(rows[0]) == ["group", "name", "value", "threshold", "passed", "required", "detail"]
    assert {r["passed"] for r in rows if r["required"] == "true"} == {"true"}


def test_inadmissible_triple_is_refused(small_config):
    config = replace(small_config, params=replace(small_config.params, delta0=0.1))
    with pytest.raises(ValidationError, match="δ ∈ \\(0, δ₀\\) violated"):
        run_checks(config)


def test_first_required_failure_is_raised(small_config, monkeypatch):
    def rows(exp):
        return [
            CheckRow("demo", "informational", 2.0, 1.0, False, required=False),
            CheckRow("demo", "broken", 3.0, 1.0, False),
        ]

    monkeypatch.setattr(lamina.check, "CHECK_GROUPS", (rows,))
    with pytest.raises(CheckFailure, match="demo.broken") as info:
        cmd_check(small_config)
    assert info.value.witness == {"group": "demo", "name": "broken", "value": 3.0}


def test_check_csv_format(tmp_path):
    rows = [CheckRow("flow", "divergence", 0.1, 1e-12, False), CheckRow("sandwich", "upper_ratio", 1.5, math.inf, True, required=False)]
    path = write_check_csv(rows, tmp_path / "check.csv")
    lines = path.read_text().splitlines()
    assert lines[1] == "flow,divergence,0.10000000000000001,9.9999999999999998e-13,false,true,"
    assert lines[2] == "sandwich,upper_ratio,1.5,inf,true,false,"
