import csv

import pytest

from lamina.audit import ConvergenceRecord, write_record_csv
from lamina.catalog import Catalog
from lamina.errors import InsufficientDataError, ValidationError
from lamina.report import cmd_report, load_records


def add_run(out, nickname, record):
    (out / nickname).mkdir(parents=True)
    write_record_csv([record], out / nickname / "record.csv", extra={"nickname": nickname})


def test_empty_directory(tmp_path):
    with pytest.raises(InsufficientDataError, match="no runs found"):
        cmd_report(tmp_path)


def test_corrupt_record(tmp_path):
    (tmp_path / "broken").mkdir()
    (tmp_path / "broken" / "record.csv").write_text("nickname,eta\nbroken,0.1\n")
    with pytest.raises(ValidationError, match="corrupt record file"):
        load_records(tmp_path)


def test_header_only_record(tmp_path):
    (tmp_path / "empty").mkdir()
    write_record_csv([], tmp_path / "empty" / "record.csv")
    with pytest.raises(ValidationError, match="no rows"):
        load_records(tmp_path)


def test_catalog_orders_by_beta(make_record):
    with Catalog() as catalog:
        catalog.add("b-run", "b/record.csv", make_record(beta=0.3))
        catalog.add("a-run", "a/record.csv", make_record(beta=0.3))
        catalog.add("c-run", "c/record.csv", make_record(beta=0.1, epsilon_ok=False))
        runs = catalog.by_beta()
        assert [r.nickname for r in runs] == ["c-run", "a-run", "b-run"]
        assert runs[0].as_record() == make_record(beta=0.1, epsilon_ok=False)


def test_report_sorts_runs_by_beta(tmp_path, make_record):
    add_run(tmp_path, "wide_layer", make_record(beta=0.5, m=0.2))
    add_run(tmp_path, "thin_layer", make_record(beta=0.2, m=0.1))
    assert cmd_report(tmp_path) == 0

    with open(tmp_path / "runs.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    assert [r["nickname"] for r in rows] == ["thin_layer", "wide_layer"]
    assert list(rows[0]) == ["nickname"] + ConvergenceRecord.columns()
    assert rows[0]["beta"] == "0.20000000000000001"
    assert rows[0]["epsilon_ok"] == "true"

    summary = (tmp_path / "summary.txt").read_text()
    assert summary.startswith("2 run(s), sorted by beta")
    assert summary.index("thin_layer") < summary.index("wide_layer")


def test_report_plot(tmp_path, make_record):
    add_run(tmp_path, "first", make_record(budget=0.5, sup_error=0.1))
    add_run(tmp_path, "second", make_record(budget=0.25, sup_error=0.03))
    cmd_report(tmp_path, plot=True)
    assert (tmp_path / "budget.png").stat().st_size > 0
