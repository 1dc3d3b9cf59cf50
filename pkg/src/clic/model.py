"""Component typology, capability taxonomy, SLA terms, and slot matching.

All types in this module are immutable values: they can be copied and
shared between concurrent activities freely.  The typology is closed:
three component kinds times two natures gives exactly six classes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Mapping, Optional, Sequence, Tuple

__all__ = [
    "ComponentKind",
    "Nature",
    "NatureConstraint",
    "DATA_TYPES",
    "CapabilityPath",
    "SlaTerms",
    "ComponentDescriptor",
    "AttributePredicate",
    "SlotQuery",
    "ValidationReport",
    "validate_descriptor",
    "capability_subsumes",
    "matches",
]


class ComponentKind(str, Enum):
    SENSING = "sensing"
    PROCESSING = "processing"
    ACTUATION = "actuation"


class Nature(str, Enum):
    HUMAN = "human"
    MACHINE = "machine"


class NatureConstraint(str, Enum):
    ANY = "any"
    HUMAN = "human"
    MACHINE = "machine"

    def admits(self, nature: Nature) -> bool:
        return self is NatureConstraint.ANY or self.value == nature.value


#: Closed per-deployment vocabulary for edge type checking.
DATA_TYPES = frozenset(
    {"image", "text", "position", "occupancy", "route", "signal-plan", "alarm", "audio"}
)

_SEGMENT_RE = re.compile(r"^[a-z0-9-]+$")
MAX_CAPABILITY_DEPTH = 8


@dataclass(frozen=True, order=True)
class CapabilityPath:
    """Dot-path in the capability taxonomy, e.g. ``sense.vision.camera``.

    Subsumption is prefix order: a path subsumes all of its extensions,
    including itself.
    """

    segments: Tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("capability path needs at least one segment")
        if len(self.segments) > MAX_CAPABILITY_DEPTH:
            raise ValueError(f"capability path deeper than {MAX_CAPABILITY_DEPTH}")
        for seg in self.segments:
            if not _SEGMENT_RE.match(seg):
                raise ValueError(f"bad capability segment {seg!r}")

    @classmethod
    def parse(cls, text: str) -> "CapabilityPath":
        return cls(tuple(text.split(".")))

    def subsumes(self, other: "CapabilityPath") -> bool:
        return self.segments == other.segments[: len(self.segments)]

    def __str__(self) -> str:
        return ".".join(self.segments)


def capability_subsumes(a: CapabilityPath, b: CapabilityPath) -> bool:
    """True iff ``a`` is a (possibly equal) prefix of ``b``."""
    return a.subsumes(b)


@dataclass(frozen=True)
class SlaTerms:
    """Posted or negotiated service terms.

    Prices are credits per message; capacity is messages per second;
    times are logical milliseconds.
    """

    price: float
    max_latency: int
    min_quality: float
    capacity: float
    term: Tuple[int, int]
    breach_penalty: float = 0.0
    early_termination_penalty: float = 0.0
    availability_window: Optional[Tuple[int, int]] = None

    def covers(self, term: Tuple[int, int]) -> bool:
        """Whether this component is available throughout ``term``."""
        lo, hi = self.term
        if not (lo <= term[0] and term[1] <= hi):
            return False
        if self.availability_window is not None:
            a, b = self.availability_window
            if not (a <= term[0] and term[1] <= b):
                return False
        return True

    def to_json(self) -> dict:
        out: dict = {
            "price": self.price,
            "max_latency": self.max_latency,
            "min_quality": self.min_quality,
            "capacity": self.capacity,
            "term": list(self.term),
            "breach_penalty": self.breach_penalty,
            "early_termination_penalty": self.early_termination_penalty,
        }
        if self.availability_window is not None:
            out["availability_window"] = list(self.availability_window)
        return out

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "SlaTerms":
        win = obj.get("availability_window")
        return cls(
            price=float(obj["price"]),
            max_latency=int(obj["max_latency"]),
            min_quality=float(obj["min_quality"]),
            capacity=float(obj["capacity"]),
            term=(int(obj["term"][0]), int(obj["term"][1])),
            breach_penalty=float(obj.get("breach_penalty", 0.0)),
            early_termination_penalty=float(obj.get("early_termination_penalty", 0.0)),
            availability_window=None if win is None else (int(win[0]), int(win[1])),
        )


def _freeze_attributes(attrs: Any) -> Tuple[Tuple[str, Any], ...]:
    if isinstance(attrs, Mapping):
        items = attrs.items()
    else:
        items = list(attrs)
    return tuple(sorted((str(k), v) for k, v in items))


@dataclass(frozen=True)
class ComponentDescriptor:
    """A pool member: what it is, what it can do, and on what terms."""

    id: str
    kind: ComponentKind
    nature: Nature
    capability: CapabilityPath
    posted_terms: SlaTerms
    endpoint: str
    input_type: Optional[str] = None
    output_type: Optional[str] = None
    location: Optional[str] = None
    attributes: Tuple[Tuple[str, Any], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributes", _freeze_attributes(self.attributes))

    @property
    def attribute_map(self) -> dict:
        return dict(self.attributes)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "nature": self.nature.value,
            "capability": str(self.capability),
            "input_type": self.input_type,
            "output_type": self.output_type,
            "location": self.location,
            "attributes": {k: v for k, v in self.attributes},
            "posted_terms": self.posted_terms.to_json(),
            "endpoint": self.endpoint,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "ComponentDescriptor":
        return cls(
            id=obj["id"],
            kind=ComponentKind(obj["kind"]),
            nature=Nature(obj["nature"]),
            capability=CapabilityPath.parse(obj["capability"]),
            input_type=obj.get("input_type"),
            output_type=obj.get("output_type"),
            location=obj.get("location"),
            attributes=_freeze_attributes(obj.get("attributes", {})),
            posted_terms=SlaTerms.from_json(obj["posted_terms"]),
            endpoint=obj["endpoint"],
        )


@dataclass(frozen=True)
class AttributePredicate:
    """A single constraint on a descriptor attribute.

    ``op`` is one of ``eq``, ``le``, ``ge``, ``within`` (region
    membership: the descriptor's location must be in ``value``).
    """

    key: str
    op: str
    value: Any

    OPS = ("eq", "le", "ge", "within")

    def holds(self, d: ComponentDescriptor) -> bool:
        if self.op == "within":
            return d.location in self.value
        actual = d.attribute_map.get(self.key)
        if actual is None:
            return False
        if self.op == "eq":
            return actual == self.value
        if self.op == "le":
            return actual <= self.value
        if self.op == "ge":
            return actual >= self.value
        raise ValueError(f"unknown predicate op {self.op!r}")

    def to_json(self) -> dict:
        return {"key": self.key, "op": self.op, "value": self.value}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "AttributePredicate":
        return cls(key=obj["key"], op=obj["op"], value=obj["value"])


@dataclass(frozen=True)
class SlotQuery:
    """Partial description of the component wanted for one slot."""

    kind: ComponentKind
    capability: CapabilityPath
    max_price: float
    min_quality: float
    max_latency: int
    term: Tuple[int, int]
    nature: NatureConstraint = NatureConstraint.ANY
    attribute_predicates: Tuple[AttributePredicate, ...] = ()

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "nature": self.nature.value,
            "capability": str(self.capability),
            "attribute_predicates": [p.to_json() for p in self.attribute_predicates],
            "max_price": self.max_price,
            "min_quality": self.min_quality,
            "max_latency": self.max_latency,
            "term": list(self.term),
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "SlotQuery":
        return cls(
            kind=ComponentKind(obj["kind"]),
            nature=NatureConstraint(obj.get("nature", "any")),
            capability=CapabilityPath.parse(obj["capability"]),
            attribute_predicates=tuple(
                AttributePredicate.from_json(p)
                for p in obj.get("attribute_predicates", [])
            ),
            max_price=float(obj["max_price"]),
            min_quality=float(obj["min_quality"]),
            max_latency=int(obj["max_latency"]),
            term=(int(obj["term"][0]), int(obj["term"][1])),
        )


@dataclass(frozen=True)
class ValidationReport:
    """Collected invariant violations; empty means well-formed."""

    violations: Tuple[Tuple[str, str], ...] = ()

    def __bool__(self) -> bool:  # truthy when there are problems
        return bool(self.violations)

    @property
    def codes(self) -> Tuple[str, ...]:
        return tuple(code for code, _ in self.violations)

    def __iter__(self):
        return iter(self.violations)


def validate_descriptor(d: ComponentDescriptor) -> ValidationReport:
    """Report every violated descriptor invariant; never raises."""
    problems: list[Tuple[str, str]] = []

    def bad(code: str, msg: str) -> None:
        problems.append((code, msg))

    if d.kind is ComponentKind.SENSING and d.input_type is not None:
        bad("sensing-has-input", "sensing components take no informational input")
    if d.kind is not ComponentKind.SENSING and d.input_type is None:
        bad("missing-input-type", f"{d.kind.value} components need an input_type")
    if d.kind is ComponentKind.ACTUATION and d.output_type is not None:
        bad("actuation-has-output", "actuation components produce no informational output")
    if d.kind is not ComponentKind.ACTUATION and d.output_type is None:
        bad("missing-output-type", f"{d.kind.value} components need an output_type")
    for label, value in (("input_type", d.input_type), ("output_type", d.output_type)):
        if value is not None and value not in DATA_TYPES:
            bad("unknown-data-type", f"{label} {value!r} not in deployment vocabulary")

    t = d.posted_terms
    if t.price < 0:
        bad("negative-price", "price must be >= 0")
    if not (0.0 <= t.min_quality <= 1.0):
        bad("quality-out-of-range", "min_quality must be in [0,1]")
    if t.capacity <= 0:
        bad("nonpositive-capacity", "capacity must be > 0")
    if t.term[0] >= t.term[1]:
        bad("empty-term", "term start must precede term end")
    if t.breach_penalty < 0 or t.early_termination_penalty < 0:
        bad("negative-penalty", "penalties must be >= 0")
    if t.max_latency < 0:
        bad("negative-latency", "max_latency must be >= 0")
    if t.availability_window is not None and t.availability_window[0] >= t.availability_window[1]:
        bad("empty-availability-window", "availability window start must precede end")

    return ValidationReport(tuple(problems))


def matches(d: ComponentDescriptor, q: SlotQuery) -> bool:
    """Whether descriptor ``d`` fulfills the slot query ``q``."""
    if d.kind is not q.kind:
        return False
    if not q.nature.admits(d.nature):
        return False
    if not q.capability.subsumes(d.capability):
        return False
    if not all(p.holds(d) for p in q.attribute_predicates):
        return False
    t = d.posted_terms
    if t.price > q.max_price:
        return False
    if t.min_quality < q.min_quality:
        return False
    if t.max_latency > q.max_latency:
        return False
    if not t.covers(q.term):
        return False
    return True
