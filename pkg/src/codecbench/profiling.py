"""Real-time factors from timing records and Callgrind-profile stage
aggregation.

Only self cost is aggregated: inclusive attribution across the recursion
cycles of a partitioning search is ill-defined for automated reports,
while self-cost percentages are stable. Costs come from the first
declared event (typically Ir, the instruction count) unless another
event column is selected.
"""

from __future__ import annotations

import csv
import os
import re
from dataclasses import dataclass
from importlib import resources

from .errors import (
    ComparisonError,
    DataFormatError,
    EmptyInputError,
    InputError,
)

OTHER_STAGE = "Other"
BUCKET_THRESHOLD = 1.0  # percent
MAPPING_ENV_VAR = "CODECBENCH_STAGE_MAP"

TIMING_CSV_HEADER = (
    "codec", "sequence", "qp", "wall_seconds", "frame_count", "fps_num", "fps_den",
)


@dataclass(frozen=True)
class TimingRecord:
    codec_id: str
    sequence_id: str
    qp: int
    wall_seconds: float
    frame_count: int
    fps_num: int
    fps_den: int

    def __post_init__(self):
        if not self.wall_seconds > 0:
            raise InputError(f"wall_seconds must be positive, got {self.wall_seconds}")
        if self.frame_count <= 0:
            raise InputError(f"frame_count must be positive, got {self.frame_count}")
        if self.fps_num <= 0 or self.fps_den <= 0:
            raise InputError(
                f"degenerate duration: fps {self.fps_num}:{self.fps_den}"
            )

    @property
    def duration(self) -> float:
        return self.frame_count * self.fps_den / self.fps_num


def time_factor(record: TimingRecord) -> float:
    """Wall-clock time divided by content duration; 1.0 means real time."""
    return record.wall_seconds / record.duration


def speedup(a: TimingRecord, b: TimingRecord) -> float:
    """How many times slower record a runs than record b."""
    if a.sequence_id != b.sequence_id:
        raise ComparisonError(
            f"cannot compare different sequences "
            f"{a.sequence_id!r} and {b.sequence_id!r}"
        )
    if abs(a.duration - b.duration) > 1e-9 * max(a.duration, b.duration):
        raise ComparisonError(
            f"content durations differ: {a.duration:g}s vs {b.duration:g}s"
        )
    return time_factor(a) / time_factor(b)


@dataclass(frozen=True)
class FunctionCost:
    name: str
    self_cost: int


_NAME_REF = re.compile(r"^\((\d+)\)\s?(.*)$", re.DOTALL)
_HEADER_LINE = re.compile(r"^(\w+):\s*(.*)$")
_SPEC_LINE = re.compile(r"^(\w+)=(.*)$", re.DOTALL)

# Position-specification keys sharing a compressed-name namespace.
_FILE_KEYS = {"fl", "fi", "fe", "cfl", "cfi"}
_FN_KEYS = {"fn", "cfn"}
_OBJ_KEYS = {"ob", "cob"}


def parse_callgrind(source, event: str | None = None) -> list[FunctionCost]:
    """Accumulate per-function self cost from a Callgrind output file.

    Handles string compression (`fn=(id) name` defines, `fn=(id)` refers),
    subposition counts from the `positions:` header, omitted trailing
    event columns, and call records: the cost line following `calls=`
    carries inclusive call cost and is excluded from the caller's self
    cost. Functions split across several source files merge by name.
    """
    owns = isinstance(source, (str, bytes, os.PathLike))
    fp = open(source, "r", encoding="utf-8", errors="replace") if owns else source
    try:
        return _parse_callgrind_lines(fp, event)
    finally:
        if owns:
            fp.close()


def _parse_callgrind_lines(lines, event):
    events: list[str] | None = None
    event_index = 0
    n_positions = 1
    fn_names: dict[str, str] = {}
    file_names: dict[str, str] = {}
    obj_names: dict[str, str] = {}
    current_fn: str | None = None
    skip_next_cost = False
    costs: dict[str, int] = {}

    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.startswith("#"):
            continue

        first = line[0]
        if first.isdigit() or first in "+-*":
            if skip_next_cost:
                skip_next_cost = False
                continue
            if events is None:
                raise DataFormatError(
                    f"line {lineno}: cost line before an 'events:' header"
                )
            if current_fn is None:
                raise DataFormatError(f"line {lineno}: cost line before any fn=")
            tokens = line.split()
            counts = tokens[n_positions:]
            # Trailing zero event counts may be omitted.
            if event_index < len(counts):
                token = counts[event_index]
                try:
                    value = int(token)
                except ValueError:
                    raise DataFormatError(
                        f"line {lineno}: non-numeric cost {token!r}"
                    ) from None
                if value < 0:
                    raise DataFormatError(f"line {lineno}: negative cost {value}")
            else:
                value = 0
            costs[current_fn] = costs.get(current_fn, 0) + value
            continue

        m = _SPEC_LINE.match(line)
        if m:
            key, value = m.group(1), m.group(2)
            if key in _FN_KEYS:
                name = _resolve_name(fn_names, value, lineno)
                if key == "fn":
                    current_fn = name
                    costs.setdefault(current_fn, 0)
            elif key in _FILE_KEYS:
                _resolve_name(file_names, value, lineno)
            elif key in _OBJ_KEYS:
                _resolve_name(obj_names, value, lineno)
            elif key == "calls":
                skip_next_cost = True
            # Remaining specification keys (jump targets etc.) carry no self cost.
            continue

        m = _HEADER_LINE.match(line)
        if m:
            key, value = m.group(1), m.group(2)
            if key == "events":
                events = value.split()
                if not events:
                    raise DataFormatError(f"line {lineno}: empty events header")
                if event is not None:
                    if event not in events:
                        raise DataFormatError(
                            f"line {lineno}: event {event!r} not declared "
                            f"(events: {' '.join(events)})"
                        )
                    event_index = events.index(event)
            elif key == "positions":
                n_positions = max(1, len(value.split()))
            continue

        raise DataFormatError(f"line {lineno}: unrecognized line {line[:60]!r}")

    if events is None:
        raise DataFormatError("missing 'events:' header")
    return [
        FunctionCost(name, cost)
        for name, cost in sorted(costs.items(), key=lambda kv: (-kv[1], kv[0]))
    ]


def _resolve_name(table: dict[str, str], value: str, lineno: int) -> str:
    m = _NAME_REF.match(value)
    if not m:
        return value
    num, rest = m.group(1), m.group(2)
    if rest:
        table[num] = rest
        return rest
    if num not in table:
        raise DataFormatError(f"line {lineno}: undefined name id ({num})")
    return table[num]


@dataclass(frozen=True)
class StageMapping:
    """Ordered (substring pattern -> stage) rules; first match wins."""

    rules: tuple[tuple[str, str], ...]

    def stage_for(self, function_name: str) -> str:
        for pattern, stage in self.rules:
            if pattern in function_name:
                return stage
        return OTHER_STAGE


@dataclass(frozen=True)
class StageProfile:
    totals: dict[str, int]
    percentages: dict[str, float]
    other_bucket: tuple[str, ...]
    total_cost: int


def aggregate_stages(
    costs, mapping: StageMapping, bucket_threshold: float = BUCKET_THRESHOLD
) -> StageProfile:
    """Fold function costs into named stages with percentages of the total.

    Stages below the threshold are merged into "Other"; unmatched
    functions land there directly.
    """
    costs = list(costs)
    if not costs:
        raise EmptyInputError("empty cost list")
    total = sum(fc.self_cost for fc in costs)
    if total <= 0:
        raise EmptyInputError("total cost is zero")

    raw: dict[str, int] = {}
    for fc in costs:
        stage = mapping.stage_for(fc.name)
        raw[stage] = raw.get(stage, 0) + fc.self_cost

    folded: dict[str, int] = {}
    bucket = []
    for stage in sorted(raw):
        if stage == OTHER_STAGE:
            continue
        percent = 100.0 * raw[stage] / total
        if percent < bucket_threshold:
            bucket.append(stage)
            folded[OTHER_STAGE] = folded.get(OTHER_STAGE, 0) + raw[stage]
        else:
            folded[stage] = raw[stage]
    if OTHER_STAGE in raw:
        folded[OTHER_STAGE] = folded.get(OTHER_STAGE, 0) + raw[OTHER_STAGE]

    percentages = {s: 100.0 * c / total for s, c in folded.items()}
    return StageProfile(
        totals=folded,
        percentages=percentages,
        other_bucket=tuple(bucket),
        total_cost=total,
    )


def parse_mapping(text: str, origin: str = "<mapping>") -> StageMapping:
    """Parse `pattern -> stage` lines; `#` starts a full-line comment."""
    rules = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        pattern, sep, stage = line.partition("->")
        if not sep:
            raise DataFormatError(
                f"{origin}:{lineno}: expected 'pattern -> stage', got {line!r}"
            )
        pattern = pattern.strip()
        stage = stage.strip()
        if not pattern or not stage:
            raise DataFormatError(
                f"{origin}:{lineno}: empty pattern or stage in {line!r}"
            )
        rules.append((pattern, stage))
    return StageMapping(rules=tuple(rules))


def load_mapping(path) -> StageMapping:
    with open(path, "r", encoding="utf-8") as fp:
        return parse_mapping(fp.read(), origin=str(path))


def default_mapping() -> StageMapping:
    """Built-in codec stage taxonomy; copy the packaged file to customize."""
    text = (
        resources.files("codecbench")
        .joinpath("data/default_stage_map.txt")
        .read_text(encoding="utf-8")
    )
    return parse_mapping(text, origin="default_stage_map.txt")


def load_timing_csv(path) -> list[TimingRecord]:
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fp:
        reader = csv.DictReader(fp)
        missing = [c for c in TIMING_CSV_HEADER if c not in (reader.fieldnames or ())]
        if missing:
            raise DataFormatError(f"{path}: missing CSV columns: {', '.join(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                records.append(
                    TimingRecord(
                        codec_id=row["codec"].strip(),
                        sequence_id=row["sequence"].strip(),
                        qp=int(row["qp"]),
                        wall_seconds=float(row["wall_seconds"]),
                        frame_count=int(row["frame_count"]),
                        fps_num=int(row["fps_num"]),
                        fps_den=int(row["fps_den"]),
                    )
                )
            except (TypeError, ValueError):
                raise DataFormatError(f"{path}:{lineno}: malformed timing row") from None
    return records
