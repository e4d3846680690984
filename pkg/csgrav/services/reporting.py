"""
Report serialization: JSON with 17 significant digits, CSV iteration
histories and the build hash of the package sources.
"""
import csv
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional

import numpy as np

import csgrav
from csgrav.schemas import CheckRecord, Environment

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["iter", "objective", "step", "action_pg", "action_cs"]


def format_float(value: float) -> str:
    """JSON text for a float: 17 significant digits, non-finite values as strings."""
    if math.isnan(value):
        return '"NaN"'
    if math.isinf(value):
        return '"Infinity"' if value > 0 else '"-Infinity"'
    return format(value, ".17g")


def _normalize(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return [_normalize(v) for v in value.tolist()]
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def dumps(value: Any, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON text: sorted keys, fixed float format."""
    value = _normalize(value)
    pad = " " * (indent * (_level + 1))
    close = " " * (indent * _level)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(key))}: {dumps(value[key], indent, _level + 1)}"
            for key in sorted(value, key=str)
        ]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [f"{pad}{dumps(item, indent, _level + 1)}" for item in value]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def build_hash() -> str:
    """sha256 over the package sources in path order."""
    root = Path(csgrav.__file__).parent
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*.py")):
        digest.update(path.relative_to(root).as_posix().encode())
        digest.update(path.read_bytes())
    return digest.hexdigest()


def environment() -> Environment:
    return Environment(version=csgrav.__version__, build_hash=build_hash(), numpy=np.__version__)


class CheckCollector:
    """Accumulates PASS/FAIL records in execution order."""

    def __init__(self, tolerances):
        self.tolerances = tolerances
        self.records: List[CheckRecord] = []

    def add(
        self,
        name: str,
        anchor: str,
        measured: float,
        comparison: str = "le",
        detail: Optional[str] = None,
        tolerance: Optional[float] = None,
        key: Optional[str] = None,
    ) -> CheckRecord:
        """
        Record one check.

        Args:
            name: Record name shown in the report
            anchor: Identity or property the check realizes
            measured: Measured value (residual, determinant, ratio spread, ...)
            comparison: "le" passes when measured <= tolerance, "ge" when >=
            tolerance: Explicit tolerance; defaults to the spec's value for key
            key: Tolerance name; defaults to name
        """
        tol = self.tolerances(key or name) if tolerance is None else tolerance
        measured = float(measured)
        if comparison == "le":
            passed = measured <= tol
        else:
            passed = measured >= tol
        record = CheckRecord(
            name=name,
            anchor=anchor,
            status="PASS" if passed else "FAIL",
            measured=measured,
            tolerance=tol,
            comparison=comparison,
            detail=detail,
        )
        self.records.append(record)
        if passed:
            logger.info("PASS %s: %.3e (%s %.1e)", name, measured, comparison, tol)
        else:
            logger.warning("FAIL %s: %.3e (%s %.1e)", name, measured, comparison, tol)
        return record


def write_text(text: str, out: Optional[str]) -> None:
    if out is None:
        print(text)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n")
    logger.info("Wrote %s", path)


def write_history_csv(rows: Iterable[Dict[str, Any]], path: str) -> None:
    """Iteration history with columns iter,objective,step,action_pg,action_cs."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with target.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [row["iter"]]
                + [
                    "" if row.get(col) is None else format_float(float(row[col])).strip('"')
                    for col in CSV_COLUMNS[1:]
                ]
            )
    logger.info("Wrote iteration history to %s", target)
