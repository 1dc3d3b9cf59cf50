"""Append-only JSONL event log with strict sequence numbering.

The event log is the single source of truth for a run: every state
mutation in the orchestrator appends one record, and `replay` rebuilds
state purely from the records.  Records carry a logical-ms timestamp
and a gap-free global sequence number.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, List, Optional

__all__ = [
    "EventRecord",
    "EventLog",
    "SeqGap",
    "CorruptLog",
    "canonical_json",
    "state_hash",
    "read_log",
]


class SeqGap(Exception):
    pass


class CorruptLog(Exception):
    pass


@dataclass(frozen=True)
class EventRecord:
    ts: int
    seq: int
    type: str
    payload: dict

    def to_json(self) -> dict:
        return {"ts": self.ts, "seq": self.seq, "type": self.type, "payload": self.payload}


def canonical_json(obj: Any) -> str:
    """Deterministic serialization: sorted keys, no whitespace."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def state_hash(snapshot: Any) -> str:
    """Hash of a canonical-JSON state snapshot."""
    return hashlib.sha256(canonical_json(snapshot).encode()).hexdigest()


class EventLog:
    """One writer, strictly increasing seq, optional file sink.

    With a path, every record is flushed on append so a reader can tail
    the file and a crashed run leaves only whole records behind.
    """

    def __init__(self, path: Optional[Path] = None, clock: Optional[Callable[[], int]] = None):
        self._records: List[EventRecord] = []
        self._clock = clock or (lambda: 0)
        self._path = Path(path) if path is not None else None
        self._fh = None
        if self._path is not None:
            self._fh = self._path.open("w", encoding="utf-8")

    @property
    def records(self) -> List[EventRecord]:
        return self._records

    @property
    def last_seq(self) -> int:
        return self._records[-1].seq if self._records else 0

    def append(self, type: str, payload: dict, ts: Optional[int] = None) -> EventRecord:
        rec = EventRecord(
            ts=self._clock() if ts is None else ts,
            seq=self.last_seq + 1,
            type=type,
            payload=payload,
        )
        return self.append_record(rec)

    def append_record(self, rec: EventRecord) -> EventRecord:
        if rec.seq != self.last_seq + 1:
            raise SeqGap(f"expected seq {self.last_seq + 1}, got {rec.seq}")
        self._records.append(rec)
        if self._fh is not None:
            self._fh.write(canonical_json(rec.to_json()) + "\n")
            self._fh.flush()
        return rec

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self) -> "EventLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_log(path: Path) -> Iterator[EventRecord]:
    """Parse a JSONL log, enforcing seq continuity.

    Raises CorruptLog on malformed lines and SeqGap on numbering holes.
    """
    expected = 1
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            try:
                obj = json.loads(line)
                rec = EventRecord(
                    ts=int(obj["ts"]), seq=int(obj["seq"]),
                    type=str(obj["type"]), payload=obj["payload"],
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise CorruptLog(f"line {lineno}: {exc}") from exc
            if rec.seq != expected:
                raise SeqGap(f"line {lineno}: expected seq {expected}, got {rec.seq}")
            expected += 1
            yield rec
