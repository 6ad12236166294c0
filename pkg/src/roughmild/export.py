"""CSV and workbook writers for verification and experiment rows."""

import csv
import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from .errors import ConfigError
from .models import CheckResult
from .version import CSV_SCHEMA

logger = logging.getLogger(__name__)

SCHEMA_LINE = f"# schema={CSV_SCHEMA}"
CHECK_COLUMNS = ("check_id", "instance_id", "lhs", "rhs", "slack", "pass")


def _cell(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else value


def check_rows(results: Iterable[CheckResult]) -> List[Dict[str, object]]:
    return [
        {"check_id": r.check_id, "instance_id": r.instance_id, "lhs": r.lhs,
         "rhs": r.rhs, "slack": r.slack, "pass": r.passed}
        for r in results
    ]


def write_csv(path, columns: Sequence[str], rows: Iterable[Mapping[str, object]],
              config_hash: str, reproducible: bool = False) -> Path:
    """Versioned CSV; every row carries the config hash."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = list(columns) + ["config_hash"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(SCHEMA_LINE + "\n")
        if not reproducible:
            f.write(f"# generated={datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns] + [config_hash])
    logger.info("wrote %s", path)
    return path


def write_rows_to_excel(sheets: Mapping[str, Tuple[Sequence[str], Sequence[Mapping[str, object]]]],
                        excel_path) -> Path:
    """One sheet per entry, header row first; appends to an existing workbook."""
    try:
        from openpyxl import Workbook, load_workbook
    except ImportError as exc:
        raise ConfigError("openpyxl is required for --xlsx.  Install with:  pip install openpyxl") from exc

    excel_path = Path(excel_path)
    excel_path.parent.mkdir(parents=True, exist_ok=True)
    if not os.path.exists(excel_path):
        workbook = Workbook()
        workbook.remove(workbook.active)
    else:
        workbook = load_workbook(excel_path)

    for sheet_name, (columns, rows) in sheets.items():
        title = sheet_name[:31]
        if title in workbook.sheetnames:
            del workbook[title]
        sheet = workbook.create_sheet(title=title)
        sheet.append(list(columns))
        for row in rows:
            sheet.append([_cell(row.get(c)) if not isinstance(row.get(c), float) else row.get(c)
                          for c in columns])

    if not workbook.sheetnames:
        workbook.create_sheet(title="empty")
    workbook.save(excel_path)
    logger.info("wrote %s", excel_path)
    return excel_path
