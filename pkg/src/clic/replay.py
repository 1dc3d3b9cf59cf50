"""Deterministic replay: rebuild orchestrator state from an event log.

The log is the source of truth; this module folds the records back
into a component pool and contract book and hashes the result.  A
healthy log replays to exactly the state hash the live run recorded in
its ``RunCompleted`` event.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional

from .events import EventRecord, read_log, state_hash
from .model import ComponentDescriptor, SlaTerms
from .procurement import Contract, ContractState
from .qos import Observation, ObsKind
from .registry import ComponentPool, PoolEntry

__all__ = ["ReplayResult", "ReplayDivergence", "rebuild_state", "replay_records", "replay_file"]


class ReplayDivergence(Exception):
    """The replayed state hash does not match the recorded one."""


@dataclass(frozen=True)
class ReplayResult:
    events: int
    state_hash: str
    recorded_hash: Optional[str]

    @property
    def match(self) -> bool:
        return self.recorded_hash is not None and self.state_hash == self.recorded_hash


def rebuild_state(records: Iterable[EventRecord]) -> tuple[ComponentPool, dict, Optional[str], int]:
    """Fold records into (pool, contracts, recorded_hash, count).

    Only state-bearing events matter; decision records (auctions,
    negotiations, breaches, swaps) are narration over the same state
    changes and are skipped.
    """
    pool = ComponentPool()
    contracts: dict[str, Contract] = {}
    recorded: Optional[str] = None
    count = 0

    for rec in records:
        count += 1
        t, p = rec.type, rec.payload
        if t == "ComponentRegistered":
            d = ComponentDescriptor.from_json(p["descriptor"])
            pool.entries[d.id] = PoolEntry(descriptor=d, registered_at=rec.ts)
        elif t == "ComponentDeregistered":
            pool.entries[p["id"]].offline = True
        elif t == "AvailabilityUpdated":
            win = p.get("window")
            pool.update_availability(
                p["id"],
                window=None if win is None else (win[0], win[1]),
                capacity=p.get("capacity"),
            )
        elif t == "CapacityAllocated":
            pool.entries[p["id"]].grants[p["ref"]] = p["rate"]
        elif t == "CapacityReleased":
            del pool.entries[p["id"]].grants[p["ref"]]
        elif t == "ContractProposed":
            c = Contract(
                contract_id=p["contract_id"],
                component_id=p["component_id"],
                system_id=p["system_id"],
                slot_id=p["slot_id"],
                terms=SlaTerms.from_json(p["terms"]),
                agreed_price=p["agreed_price"],
                created_at=p["created_at"],
                state=ContractState(p["state"]),
            )
            contracts[c.contract_id] = c
            pool.note_contract(c.component_id, c.contract_id, c.state.value, c.terms.term)
        elif t == "ContractState":
            c = contracts[p["contract_id"]]
            c.state = ContractState(p["state"])
            pool.note_contract(c.component_id, c.contract_id, c.state.value, c.terms.term)
        elif t == "Observation":
            c = contracts[p["contract_id"]]
            pool.record_observation(
                c.component_id,
                Observation(p["contract_id"], p["ts"], ObsKind(p["kind"]), p["value"]),
                max_latency=c.terms.max_latency,
                min_quality=c.terms.min_quality,
            )
        elif t == "RunCompleted":
            recorded = p.get("state_hash")
    return pool, contracts, recorded, count


def replay_records(records: Iterable[EventRecord]) -> ReplayResult:
    pool, contracts, recorded, count = rebuild_state(records)
    snapshot = {
        "pool": pool.snapshot(),
        "contracts": {cid: contracts[cid].snapshot() for cid in sorted(contracts)},
    }
    return ReplayResult(events=count, state_hash=state_hash(snapshot), recorded_hash=recorded)


def replay_file(path: Path, strict: bool = True) -> ReplayResult:
    """Replay a JSONL log file; with ``strict`` a hash mismatch raises."""
    result = replay_records(read_log(path))
    if strict and result.recorded_hash is not None and not result.match:
        raise ReplayDivergence(
            f"{path}: replayed {result.state_hash}, recorded {result.recorded_hash}"
        )
    return result
