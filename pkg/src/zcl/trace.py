"""Canonical proxy request records and trace ingestion.

A trace is a time-ordered stream of TraceRecord values.  Two on-disk forms
are understood: the project's canonical CSV (lossless round trip) and the
native Squid access log layout (read-only).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Sequence

__all__ = [
    "TraceRecord",
    "TraceFormatError",
    "ParsedLog",
    "parse_squid_log",
    "read_canonical_csv",
    "write_canonical_csv",
    "read_change_log_csv",
    "write_change_log_csv",
    "DEFAULT_HIT_PREFIXES",
    "DEFAULT_UNCACHEABLE_ACTIONS",
]

CSV_COLUMNS = ("timestamp_s", "client_id", "object_id", "size_bytes", "cacheable")
CSV_OPTIONAL = "origin_hit"

# Squid action codes whose responses were served from the proxy's own store.
DEFAULT_HIT_PREFIXES = (
    "TCP_HIT",
    "TCP_MEM_HIT",
    "TCP_IMS_HIT",
    "TCP_REFRESH_HIT",
    "TCP_NEGATIVE_HIT",
    "TCP_STALE_HIT",
    "UDP_HIT",
)

# Action codes that never correspond to a storable document.  Anything not
# matched here (and not a CONNECT tunnel) is treated as cacheable; override
# the mapping if the deployment logged differently.
DEFAULT_UNCACHEABLE_ACTIONS = (
    "TCP_DENIED",
    "UDP_DENIED",
    "NONE",
    "TCP_TUNNEL",
)


class TraceFormatError(ValueError):
    """Input bytes do not look like the format the parser was asked for."""


@dataclass(frozen=True, slots=True)
class TraceRecord:
    """One proxy request.

    timestamp is in seconds since the trace epoch; size_bytes is at least 1;
    origin_hit is only meaningful for records ingested from a log that
    recorded its own hit/miss outcome, and None otherwise.
    """

    timestamp: float
    client_id: str
    object_id: str
    size_bytes: int
    cacheable: bool
    origin_hit: bool | None = None


@dataclass
class ParsedLog:
    """Outcome of ingesting a raw access log."""

    records: list[TraceRecord]
    malformed: int
    total_lines: int


def parse_squid_log(
    stream: Iterable[str],
    hit_prefixes: Sequence[str] = DEFAULT_HIT_PREFIXES,
    uncacheable_actions: Sequence[str] = DEFAULT_UNCACHEABLE_ACTIONS,
) -> ParsedLog:
    """Parse a native Squid access log into canonical records.

    Expected line layout (whitespace separated):

        epoch-time elapsed-ms client action/status bytes method URL ...

    Malformed lines are counted and skipped, never fatal, unless they exceed
    half of all non-blank lines, which signals the wrong file and raises
    TraceFormatError.  Records are returned sorted by timestamp (Squid logs
    at completion time, so lines can be slightly out of order).  A byte
    count below 1 is clamped to 1.  CONNECT tunnels are uncacheable
    regardless of the action code.
    """
    records: list[TraceRecord] = []
    malformed = 0
    total = 0
    for line in stream:
        line = line.strip()
        if not line:
            continue
        total += 1
        fields = line.split()
        if len(fields) < 7:
            malformed += 1
            continue
        try:
            ts = float(fields[0])
            size = int(fields[4])
        except ValueError:
            malformed += 1
            continue
        if ts < 0:
            malformed += 1
            continue
        action = fields[3].split("/", 1)[0]
        method = fields[5]
        url = fields[6]
        cacheable = method.upper() != "CONNECT" and not any(
            action.startswith(code) for code in uncacheable_actions
        )
        origin_hit = any(action.startswith(p) for p in hit_prefixes)
        records.append(
            TraceRecord(
                timestamp=ts,
                client_id=fields[2],
                object_id=url,
                size_bytes=max(1, size),
                cacheable=cacheable,
                origin_hit=origin_hit,
            )
        )
    if total > 0 and malformed * 2 > total:
        raise TraceFormatError(
            f"{malformed} of {total} lines malformed; not a Squid access log?"
        )
    records.sort(key=lambda r: r.timestamp)
    return ParsedLog(records=records, malformed=malformed, total_lines=total)


def write_canonical_csv(records: Iterable[TraceRecord], out: IO[str]) -> int:
    """Write records as canonical CSV; returns the number of rows written.

    The optional origin_hit column is included whenever at least one record
    carries a value for it (records are materialized to decide).  Floats are
    written with repr so the round trip is exact.
    """
    rows = list(records)
    with_origin = any(r.origin_hit is not None for r in rows)
    header = CSV_COLUMNS + ((CSV_OPTIONAL,) if with_origin else ())
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        row = [
            repr(r.timestamp),
            r.client_id,
            r.object_id,
            str(r.size_bytes),
            "1" if r.cacheable else "0",
        ]
        if with_origin:
            row.append("" if r.origin_hit is None else ("1" if r.origin_hit else "0"))
        writer.writerow(row)
    return len(rows)


def _parse_bool(token: str, column: str) -> bool:
    if token in ("1", "true", "True"):
        return True
    if token in ("0", "false", "False"):
        return False
    raise TraceFormatError(f"bad boolean {token!r} in column {column}")


def read_canonical_csv(stream: IO[str]) -> Iterator[TraceRecord]:
    """Read canonical CSV back into records; missing columns are fatal."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise TraceFormatError("empty file: expected a canonical CSV header")
    for col in CSV_COLUMNS:
        if col not in header:
            raise TraceFormatError(f"missing column {col!r}")
    idx = {name: header.index(name) for name in header}
    has_origin = CSV_OPTIONAL in idx
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        try:
            origin: bool | None = None
            if has_origin and row[idx[CSV_OPTIONAL]] != "":
                origin = _parse_bool(row[idx[CSV_OPTIONAL]], CSV_OPTIONAL)
            yield TraceRecord(
                timestamp=float(row[idx["timestamp_s"]]),
                client_id=row[idx["client_id"]],
                object_id=row[idx["object_id"]],
                size_bytes=int(row[idx["size_bytes"]]),
                cacheable=_parse_bool(row[idx["cacheable"]], "cacheable"),
                origin_hit=origin,
            )
        except (ValueError, IndexError) as exc:
            if isinstance(exc, TraceFormatError):
                raise
            raise TraceFormatError(f"line {lineno}: {exc}") from exc


def write_change_log_csv(changes: dict[str, list[float]], out: IO[str]) -> int:
    """Write per-object change events as `object_id,change_timestamp_s` rows.

    Rows are emitted in global time order for easy plotting; ties broken by
    object id so output is deterministic.
    """
    events = sorted(
        ((t, obj) for obj, times in changes.items() for t in times),
    )
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["object_id", "change_timestamp_s"])
    for t, obj in events:
        writer.writerow([obj, repr(t)])
    return len(events)


def read_change_log_csv(stream: IO[str]) -> dict[str, list[float]]:
    """Read a change-event CSV into {object_id: sorted timestamps}."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise TraceFormatError("empty file: expected a change-log header")
    if header[:2] != ["object_id", "change_timestamp_s"]:
        raise TraceFormatError(f"unexpected change-log header {header!r}")
    changes: dict[str, list[float]] = {}
    for row in reader:
        if not row:
            continue
        changes.setdefault(row[0], []).append(float(row[1]))
    for times in changes.values():
        times.sort()
    return changes
