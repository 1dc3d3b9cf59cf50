"""The component pool: registration, availability, and slot queries.

The pool is a single-writer state machine; every mutation appends one
event to the log, so a replay of the log reconstructs the exact pool
state.  Query results are totally ordered (price asc, reliability
desc, id asc) to keep procurement replay-deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from .events import EventLog
from .model import ComponentDescriptor, SlaTerms, SlotQuery, matches, validate_descriptor
from .qos import Observation, QosEstimate, estimate_qos

__all__ = [
    "EntryStatus",
    "PoolEntry",
    "ComponentPool",
    "RegistryError",
    "DuplicateId",
    "UnknownId",
    "InvalidDescriptor",
    "CapacityBelowAllocated",
]


class RegistryError(Exception):
    pass


class DuplicateId(RegistryError):
    pass


class UnknownId(RegistryError):
    pass


class InvalidDescriptor(RegistryError):
    def __init__(self, report):
        super().__init__(f"invalid descriptor: {list(report.codes)}")
        self.report = report


class CapacityBelowAllocated(RegistryError):
    pass


class EntryStatus(str, Enum):
    AVAILABLE = "available"
    RESERVED = "reserved"
    SERVING = "serving"
    OFFLINE = "offline"


# Contract states that still pin capacity on the component.
_ACTIVE_CONTRACT_STATES = frozenset({"reserved", "serving", "draining"})
_SERVING_CONTRACT_STATES = frozenset({"serving", "draining"})


@dataclass
class PoolEntry:
    descriptor: ComponentDescriptor
    registered_at: int
    qos: QosEstimate = field(default_factory=QosEstimate)
    offline: bool = False
    grants: Dict[str, float] = field(default_factory=dict)  # ref -> msgs/s
    contracts: Dict[str, dict] = field(default_factory=dict)  # contract_id -> {state, term}

    @property
    def allocated_rate(self) -> float:
        return sum(self.grants.values())

    @property
    def residual_capacity(self) -> float:
        return self.descriptor.posted_terms.capacity - self.allocated_rate

    @property
    def status(self) -> EntryStatus:
        if self.offline:
            return EntryStatus.OFFLINE
        states = {c["state"] for c in self.contracts.values()}
        if states & _SERVING_CONTRACT_STATES:
            return EntryStatus.SERVING
        if "reserved" in states:
            return EntryStatus.RESERVED
        return EntryStatus.AVAILABLE

    def snapshot(self) -> dict:
        return {
            "descriptor": self.descriptor.to_json(),
            "registered_at": self.registered_at,
            "qos": self.qos.to_json(),
            "status": self.status.value,
            "allocated_rate": self.allocated_rate,
            "grants": dict(sorted(self.grants.items())),
            "contracts": {k: self.contracts[k] for k in sorted(self.contracts)},
        }


class ComponentPool:
    def __init__(self, log: Optional[EventLog] = None, clock: Optional[Callable[[], int]] = None):
        self._clock = clock or (lambda: 0)
        self._log = log
        self.entries: Dict[str, PoolEntry] = {}

    # -- event plumbing ------------------------------------------------

    def _emit(self, type: str, payload: dict) -> None:
        if self._log is not None:
            self._log.append(type, payload)

    # -- registration --------------------------------------------------

    def register(self, d: ComponentDescriptor) -> PoolEntry:
        report = validate_descriptor(d)
        if report:
            raise InvalidDescriptor(report)
        existing = self.entries.get(d.id)
        if existing is not None and not existing.offline:
            if existing.descriptor == d:
                return existing  # idempotent re-registration
            raise DuplicateId(d.id)
        entry = PoolEntry(descriptor=d, registered_at=self._clock())
        self.entries[d.id] = entry
        self._emit("ComponentRegistered", {"descriptor": d.to_json()})
        return entry

    def deregister(self, component_id: str) -> List[str]:
        """Flip the entry offline; returns contract ids that lost their
        component (the monitor consumes the matching events)."""
        entry = self._get(component_id)
        entry.offline = True
        affected = sorted(
            cid for cid, c in entry.contracts.items()
            if c["state"] in _ACTIVE_CONTRACT_STATES
        )
        self._emit("ComponentDeregistered", {"id": component_id})
        for cid in affected:
            self._emit("ComponentUnavailable", {"id": component_id, "contract_id": cid})
        return affected

    def query(self, q: SlotQuery) -> List[PoolEntry]:
        hits = [
            e for e in self.entries.values()
            if not e.offline and e.residual_capacity > 0 and matches(e.descriptor, q)
        ]
        hits.sort(
            key=lambda e: (
                e.descriptor.posted_terms.price,
                -e.qos.reliability,
                e.descriptor.id,
            )
        )
        return hits

    def update_availability(
        self,
        component_id: str,
        window: Optional[Tuple[int, int]] = None,
        capacity: Optional[float] = None,
    ) -> PoolEntry:
        entry = self._get(component_id)
        terms = entry.descriptor.posted_terms
        if capacity is not None and capacity < entry.allocated_rate:
            raise CapacityBelowAllocated(
                f"{component_id}: capacity {capacity} < allocated {entry.allocated_rate}"
            )
        new_terms = replace(
            terms,
            capacity=terms.capacity if capacity is None else capacity,
            availability_window=terms.availability_window if window is None else window,
        )
        entry.descriptor = replace(entry.descriptor, posted_terms=new_terms)
        self._emit(
            "AvailabilityUpdated",
            {
                "id": component_id,
                "window": None if window is None else list(window),
                "capacity": capacity,
            },
        )
        if window is not None:
            for cid, c in sorted(entry.contracts.items()):
                if c["state"] not in _ACTIVE_CONTRACT_STATES:
                    continue
                t0, t1 = c["term"]
                if not (window[0] <= t0 and t1 <= window[1]):
                    self._emit(
                        "AvailabilityWarning",
                        {"id": component_id, "contract_id": cid,
                         "window": list(window), "contract_term": [t0, t1]},
                    )
        return entry

    # -- capacity and contract tracking --------------------------------

    def allocate(self, component_id: str, rate: float, ref: str) -> None:
        entry = self._get(component_id)
        if ref in entry.grants:
            raise RegistryError(f"duplicate grant ref {ref}")
        if rate > entry.residual_capacity + 1e-9:
            raise CapacityBelowAllocated(
                f"{component_id}: rate {rate} exceeds residual {entry.residual_capacity}"
            )
        entry.grants[ref] = rate
        self._emit("CapacityAllocated", {"id": component_id, "ref": ref, "rate": rate})

    def release(self, component_id: str, ref: str) -> None:
        entry = self._get(component_id)
        if ref not in entry.grants:
            raise RegistryError(f"unknown grant ref {ref}")
        del entry.grants[ref]
        self._emit("CapacityReleased", {"id": component_id, "ref": ref})

    def note_contract(self, component_id: str, contract_id: str, state: str, term: Tuple[int, int]) -> None:
        """Record a contract's lifecycle state against its component."""
        entry = self._get(component_id)
        entry.contracts[contract_id] = {"state": state, "term": [term[0], term[1]]}

    def record_observation(
        self,
        component_id: str,
        obs: Observation,
        max_latency: Optional[int] = None,
        min_quality: Optional[float] = None,
    ) -> QosEstimate:
        entry = self._get(component_id)
        entry.qos = estimate_qos(entry.qos, obs, max_latency=max_latency, min_quality=min_quality)
        return entry.qos

    # -- snapshots -----------------------------------------------------

    def snapshot(self) -> dict:
        return {cid: self.entries[cid].snapshot() for cid in sorted(self.entries)}

    def _get(self, component_id: str) -> PoolEntry:
        entry = self.entries.get(component_id)
        if entry is None:
            raise UnknownId(component_id)
        return entry
