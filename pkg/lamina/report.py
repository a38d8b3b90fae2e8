"""Merge the records of every run under an output directory."""
import csv
from pathlib import Path

from lamina import console
from lamina.audit import ConvergenceRecord, format_cell, read_record_csv
from lamina.catalog import Catalog
from lamina.errors import InsufficientDataError, ValidationError

SUMMARY_FIELDS = ("beta", "budget", "sup_error", "m", "envelope_m", "gradient_ratio", "v_gradient_ratio", "max_defect")


def load_records(out: Path) -> list:
    """[(nickname, source path, ConvergenceRecord)] from every <run>/record.csv."""
    paths = sorted(out.glob("*/record.csv"))
    if not paths:
        raise InsufficientDataError(f"no runs found in {out}")
    loaded = []
    for path in paths:
        try:
            rows = read_record_csv(path)
        except (ValueError, KeyError, TypeError) as e:
            raise ValidationError(f"corrupt record file {path}: {e}") from e
        if not rows:
            raise ValidationError(f"corrupt record file {path}: no rows")
        for extra, record in rows:
            loaded.append((extra.get("nickname") or path.parent.name, str(path), record))
    return loaded


def cmd_report(out, plot: bool = False) -> int:
    """summary.txt and runs.csv (rows sorted by beta); budget.png with ``plot``."""
    out = Path(out)
    loaded = load_records(out)
    with Catalog() as catalog:
        for nickname, source, record in loaded:
            catalog.add(nickname, source, record)
        runs = [(r.nickname, r.as_record()) for r in catalog.by_beta()]

    with open(out / "runs.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["nickname"] + ConvergenceRecord.columns())
        for nickname, record in runs:
            writer.writerow([nickname] + [format_cell(getattr(record, c)) for c in ConvergenceRecord.columns()])

    blocks = []
    for nickname, record in runs:
        lines = [nickname] + [f"  {c}: {format_cell(getattr(record, c))}" for c in ConvergenceRecord.columns()]
        blocks.append("\n".join(lines))
    (out / "summary.txt").write_text(f"{len(runs)} run(s), sorted by beta\n\n" + "\n\n".join(blocks) + "\n")

    for nickname, record in runs:
        console.info(" ".join([f"{nickname:<24}"] + [f"{c}={getattr(record, c):.4g}" for c in SUMMARY_FIELDS]))
    if plot:
        from lamina.plot import budget_plot

        budget_plot([r for _, r in runs], out / "budget.png")
    console.done(f"Report written for {len(runs)} run(s) in {out}")
    return 0
