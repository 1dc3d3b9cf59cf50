"""Component pool: registration lifecycle, queries, capacity grants."""

import pytest

from clic.events import EventLog
from clic.model import (
    CapabilityPath,
    ComponentDescriptor,
    ComponentKind,
    Nature,
    SlaTerms,
    SlotQuery,
)
from clic.qos import Observation, ObsKind
from clic.registry import (
    CapacityBelowAllocated,
    ComponentPool,
    DuplicateId,
    EntryStatus,
    InvalidDescriptor,
    RegistryError,
    UnknownId,
)


def descriptor(id="cam-1", price=2.0, capacity=5.0, **kw) -> ComponentDescriptor:
    base = dict(
        id=id,
        kind=ComponentKind.SENSING,
        nature=Nature.MACHINE,
        capability=CapabilityPath.parse("sense.vision.camera"),
        posted_terms=SlaTerms(price=price, max_latency=100, min_quality=0.8,
                              capacity=capacity, term=(0, 10_000)),
        endpoint=f"sim://{id}",
        output_type="image",
    )
    base.update(kw)
    return ComponentDescriptor(**base)


def query(**kw) -> SlotQuery:
    base = dict(
        kind=ComponentKind.SENSING,
        capability=CapabilityPath.parse("sense.vision"),
        max_price=5.0,
        min_quality=0.5,
        max_latency=500,
        term=(0, 5_000),
    )
    base.update(kw)
    return SlotQuery(**base)


class TestRegistration:
    def test_register_and_query(self):
        pool = ComponentPool()
        pool.register(descriptor())
        assert [e.descriptor.id for e in pool.query(query())] == ["cam-1"]

    def test_invalid_descriptor_rejected(self):
        pool = ComponentPool()
        with pytest.raises(InvalidDescriptor) as err:
            pool.register(descriptor(input_type="image"))
        assert "sensing-has-input" in err.value.report.codes

    def test_identical_reregistration_is_idempotent(self):
        pool = ComponentPool(log=(log := EventLog()))
        pool.register(descriptor())
        pool.register(descriptor())
        assert sum(r.type == "ComponentRegistered" for r in log.records) == 1

    def test_conflicting_reregistration_rejected(self):
        pool = ComponentPool()
        pool.register(descriptor())
        with pytest.raises(DuplicateId):
            pool.register(descriptor(price=9.9))

    def test_offline_id_can_be_reused(self):
        pool = ComponentPool()
        pool.register(descriptor())
        pool.deregister("cam-1")
        entry = pool.register(descriptor(price=3.0))
        assert entry.descriptor.posted_terms.price == 3.0
        assert entry.status is EntryStatus.AVAILABLE


class TestDeregistration:
    def test_entry_goes_offline(self):
        pool = ComponentPool()
        pool.register(descriptor())
        pool.deregister("cam-1")
        assert pool.entries["cam-1"].status is EntryStatus.OFFLINE
        assert pool.query(query()) == []

    def test_reports_active_contracts(self):
        pool = ComponentPool(log=(log := EventLog()))
        pool.register(descriptor())
        pool.note_contract("cam-1", "c1", "serving", (0, 100))
        pool.note_contract("cam-1", "c2", "cancelled", (0, 100))
        assert pool.deregister("cam-1") == ["c1"]
        assert any(r.type == "ComponentUnavailable" and r.payload["contract_id"] == "c1"
                   for r in log.records)

    def test_unknown_id(self):
        with pytest.raises(UnknownId):
            ComponentPool().deregister("ghost")


class TestQueryOrdering:
    def test_price_then_reliability_then_id(self):
        pool = ComponentPool()
        pool.register(descriptor(id="b", price=2.0))
        pool.register(descriptor(id="a", price=2.0))
        pool.register(descriptor(id="c", price=1.0))
        # Give b a worse reliability than a.
        pool.record_observation("b", Observation("b", 0, ObsKind.HEARTBEAT_MISSED, 0))
        ids = [e.descriptor.id for e in pool.query(query())]
        assert ids == ["c", "a", "b"]

    def test_fully_allocated_excluded(self):
        pool = ComponentPool()
        pool.register(descriptor(capacity=1.0))
        pool.allocate("cam-1", 1.0, "g1")
        assert pool.query(query()) == []


class TestAvailability:
    def test_capacity_update(self):
        pool = ComponentPool()
        pool.register(descriptor())
        entry = pool.update_availability("cam-1", capacity=9.0)
        assert entry.descriptor.posted_terms.capacity == 9.0

    def test_cannot_shrink_below_allocated(self):
        pool = ComponentPool()
        pool.register(descriptor(capacity=5.0))
        pool.allocate("cam-1", 3.0, "g1")
        with pytest.raises(CapacityBelowAllocated):
            pool.update_availability("cam-1", capacity=2.0)

    def test_window_shrink_warns_affected_contracts(self):
        pool = ComponentPool(log=(log := EventLog()))
        pool.register(descriptor())
        pool.note_contract("cam-1", "c1", "serving", (0, 100))
        pool.update_availability("cam-1", window=(50, 200))
        warns = [r for r in log.records if r.type == "AvailabilityWarning"]
        assert len(warns) == 1 and warns[0].payload["contract_id"] == "c1"

    def test_window_covering_contract_is_quiet(self):
        pool = ComponentPool(log=(log := EventLog()))
        pool.register(descriptor())
        pool.note_contract("cam-1", "c1", "serving", (10, 90))
        pool.update_availability("cam-1", window=(0, 100))
        assert not any(r.type == "AvailabilityWarning" for r in log.records)


class TestCapacity:
    def test_allocate_release_roundtrip(self):
        pool = ComponentPool()
        pool.register(descriptor(capacity=5.0))
        pool.allocate("cam-1", 2.0, "g1")
        assert pool.entries["cam-1"].residual_capacity == pytest.approx(3.0)
        pool.release("cam-1", "g1")
        assert pool.entries["cam-1"].residual_capacity == pytest.approx(5.0)

    def test_over_allocation_rejected(self):
        pool = ComponentPool()
        pool.register(descriptor(capacity=5.0))
        with pytest.raises(CapacityBelowAllocated):
            pool.allocate("cam-1", 6.0, "g1")

    def test_duplicate_ref_rejected(self):
        pool = ComponentPool()
        pool.register(descriptor())
        pool.allocate("cam-1", 1.0, "g1")
        with pytest.raises(RegistryError):
            pool.allocate("cam-1", 1.0, "g1")

    def test_release_unknown_ref(self):
        pool = ComponentPool()
        pool.register(descriptor())
        with pytest.raises(RegistryError):
            pool.release("cam-1", "nope")


class TestStatus:
    def test_contract_states_drive_status(self):
        pool = ComponentPool()
        pool.register(descriptor())
        entry = pool.entries["cam-1"]
        assert entry.status is EntryStatus.AVAILABLE
        pool.note_contract("cam-1", "c1", "reserved", (0, 100))
        assert entry.status is EntryStatus.RESERVED
        pool.note_contract("cam-1", "c1", "serving", (0, 100))
        assert entry.status is EntryStatus.SERVING
        pool.note_contract("cam-1", "c1", "completed", (0, 100))
        assert entry.status is EntryStatus.AVAILABLE


class TestSnapshot:
    def test_snapshot_is_sorted_and_json_safe(self):
        import json

        pool = ComponentPool()
        pool.register(descriptor(id="b"))
        pool.register(descriptor(id="a"))
        snap = pool.snapshot()
        assert list(snap) == ["a", "b"]
        json.dumps(snap)  # must be serializable
