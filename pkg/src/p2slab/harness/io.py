"""CSV persistence with a fixed number format so equal inputs give equal bytes."""
from __future__ import annotations

import csv
import io
import math
import os
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.11e}"
    if v is None:
        return ""
    return str(v)


def parse_value(s: str) -> Any:
    if s in ("true", "false"):
        return s == "true"
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


def rows_to_csv(rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r[c]) for c in columns])
    return buf.getvalue()


def write_results(rows: Sequence[Mapping[str, Any]], columns: Sequence[str], path: str | os.PathLike) -> None:
    """UTF-8 CSV, header first, floats as ``%.11e`` (12 significant digits)."""
    p = Path(path)
    try:
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(rows_to_csv(rows, columns))
    except OSError as exc:
        raise OSError(f"cannot write results to {str(p)!r}: {exc.strerror or exc}") from None


def read_results(path: str | os.PathLike) -> tuple[list[str], list[dict[str, Any]]]:
    p = Path(path)
    try:
        with open(p, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ValueError(f"{str(p)!r} is empty")
            rows = [dict(zip(header, (parse_value(x) for x in line))) for line in reader]
    except OSError as exc:
        raise OSError(f"cannot read results from {str(p)!r}: {exc.strerror or exc}") from None
    return header, rows


def iter_column(rows: Iterable[Mapping[str, Any]], column: str) -> list:
    return [r[column] for r in rows]
