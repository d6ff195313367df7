"""CSV metrics with provenance columns.

Every file carries a header row plus ``seed`` and ``config_digest`` columns
on each row so any table can be traced back to the run that produced it.
Writes are whole-file atomic (temp file + rename).
"""

from __future__ import annotations

import csv
import io
import os
from pathlib import Path

GENERATOR_FIELDS = ["step", "ce_term", "ie_term", "norm_term", "total",
                    "seed", "config_digest"]
STAGE_FIELDS = ["stage", "epsilon", "k_mean", "label_agreement", "student_acc",
                "gen_ce", "gen_ie", "gen_norm", "gen_total",
                "seed", "config_digest"]
AUDIT_FIELDS = ["epsilon", "k", "classes", "max_ratio", "bound",
                "epsilon_effective", "passed"]


def write_csv(path, rows: list[dict], fieldnames: list[str]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fieldnames)
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def with_provenance(rows: list[dict], seed: int, config_digest: str) -> list[dict]:
    return [dict(row, seed=seed, config_digest=config_digest) for row in rows]
