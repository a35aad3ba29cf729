"""Evaluation records and their line-delimited JSON persistence."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

SCHEMA_VERSION = 1

Gap = Union[Fraction, float, None]  # float only for the infinite-gap sentinel


@dataclass(frozen=True)
class EvalRecord:
    instance_id: str
    producer_id: str
    representation: str
    valid: bool
    c_opt: Optional[int]
    plan_length: Optional[int] = None
    gap: Gap = None
    raw_output: str = ""
    parse_mode: Optional[str] = None
    thinking_tokens: Optional[int] = None
    wall_time: float = 0.0
    failure_reason: Optional[str] = None
    curriculum: Optional[str] = None
    goal_mode: Optional[str] = None
    complexity: Optional[int] = None

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.instance_id, self.producer_id, self.representation)

    def without_timing(self) -> "EvalRecord":
        return replace(self, wall_time=0.0)


def _gap_to_json(gap: Gap):
    if gap is None:
        return None
    if isinstance(gap, float) and math.isinf(gap):
        return "inf"
    return str(Fraction(gap))


def _gap_from_json(value) -> Gap:
    if value is None:
        return None
    if value == "inf":
        return math.inf
    return Fraction(value)


def record_to_json(record: EvalRecord) -> str:
    data = asdict(record)
    data["gap"] = _gap_to_json(record.gap)
    data["schema_version"] = SCHEMA_VERSION
    return json.dumps(data, sort_keys=True)


def record_from_json(line: str) -> EvalRecord:
    data = json.loads(line)
    version = data.pop("schema_version", None)
    if version != SCHEMA_VERSION:
        raise ValueError(f"unsupported record schema version {version!r}")
    data["gap"] = _gap_from_json(data.get("gap"))
    known = {f.name for f in fields(EvalRecord)}
    return EvalRecord(**{k: v for k, v in data.items() if k in known})


def load_records(path: Path) -> list[EvalRecord]:
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.strip():
            try:
                out.append(record_from_json(line))
            except json.JSONDecodeError:
                # a torn final line from an interrupted run; it gets redone
                continue
    return out


class RecordWriter:
    """Append-only single writer; each record is flushed as soon as it is written."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._drop_torn_tail()
        self._fh = self.path.open("a", encoding="utf-8", newline="\n")

    def _drop_torn_tail(self) -> None:
        # a run killed mid-write leaves a partial last line; appending to it would corrupt the next record
        if not self.path.exists():
            return
        with self.path.open("rb+") as fh:
            data = fh.read()
            if data and not data.endswith(b"\n"):
                fh.truncate(data.rfind(b"\n") + 1)

    def write(self, record: EvalRecord) -> None:
        self._fh.write(record_to_json(record) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "RecordWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def _opt_int(value: str) -> Optional[int]:
    value = (value or "").strip()
    return int(value) if value and value not in ("--", "-") else None


def ingest_table(path: Path) -> Iterator[EvalRecord]:
    """Turn an externally collected results table (CSV) into records.

    Required columns: instance_id, producer, representation, c_opt,
    plan_length, valid.  Optional: curriculum, complexity, thinking_tokens.
    Gaps are recomputed here rather than trusted from the table.
    """
    from .metrics import optimality_gap, ZeroOptimal

    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            valid = row["valid"].strip().lower() in ("1", "true", "yes", "valid")
            c_opt = _opt_int(row["c_opt"])
            length = _opt_int(row["plan_length"])
            gap: Gap = None
            if valid and length is not None and c_opt is not None:
                try:
                    gap = optimality_gap(length, c_opt)
                except ZeroOptimal:
                    gap = math.inf
            yield EvalRecord(
                instance_id=row["instance_id"],
                producer_id=row["producer"],
                representation=row["representation"],
                valid=valid,
                c_opt=c_opt,
                plan_length=length,
                gap=gap,
                parse_mode="table",
                thinking_tokens=_opt_int(row.get("thinking_tokens", "")),
                curriculum=row.get("curriculum") or None,
                complexity=_opt_int(row.get("complexity", "")),
            )


def existing_keys(records: Iterable[EvalRecord]) -> set[tuple[str, str, str]]:
    return {r.key for r in records}
