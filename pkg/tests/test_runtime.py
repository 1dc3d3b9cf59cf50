"""Hub routing: channel sequencing, pausing, sharing, fan-out."""

import json

import pytest

from clic.blueprint import parse_blueprint
from clic.clock import EventLoop
from clic.model import (
    CapabilityPath,
    ComponentDescriptor,
    ComponentKind,
    Nature,
    SlaTerms,
)
from clic.procurement import ContractBook, ContractState
from clic.registry import ComponentPool
from clic.runtime import (
    BeforeStartTime,
    BufferOverflow,
    ComponentRuntime,
    ContractWrongState,
    InsufficientCapacity,
    MissingContract,
    PipelinePhase,
    Router,
    ShareMode,
    SourceNotServing,
    TypeMismatch,
    WrongPhase,
)


def descriptor(id, kind=ComponentKind.SENSING, capacity=10.0, **kw):
    base = dict(
        id=id,
        kind=kind,
        nature=Nature.MACHINE,
        capability=CapabilityPath.parse("sense.vision.camera"),
        posted_terms=SlaTerms(price=2.0, max_latency=100, min_quality=0.8,
                              capacity=capacity, term=(0, 10_000)),
        endpoint=f"sim://{id}",
        output_type="image",
    )
    if kind is ComponentKind.PROCESSING:
        base.update(capability=CapabilityPath.parse("process.vision"),
                    input_type="image", output_type="alarm")
    if kind is ComponentKind.ACTUATION:
        base.update(capability=CapabilityPath.parse("act.audio.alarm"),
                    input_type="alarm", output_type=None)
    base.update(kw)
    return ComponentDescriptor(**base)


def blueprint(system_id="sys-1"):
    def q(kind, cap):
        return {"kind": kind, "nature": "any", "capability": cap,
                "max_price": 5.0, "min_quality": 0.5, "max_latency": 500,
                "term": [0, 5000]}
    return parse_blueprint(json.dumps({
        "$schema": "clic-blueprint/1",
        "system_id": system_id,
        "slots": [
            {"slot_id": "cam", "query": q("sensing", "sense.vision")},
            {"slot_id": "proc", "query": q("processing", "process.vision")},
            {"slot_id": "act", "query": q("actuation", "act.audio")},
        ],
        "edges": [
            {"from_slot": "cam", "to_slot": "proc", "data_type": "image"},
            {"from_slot": "proc", "to_slot": "act", "data_type": "alarm"},
        ],
        "start_time": 0,
        "end_time": 5000,
    }))


class Rig:
    def __init__(self, buffer_size=1024):
        self.loop = EventLoop()
        self.pool = ComponentPool()
        self.book = ContractBook(self.pool)
        self.router = Router(self.pool, self.book, self.loop,
                             buffer_size=buffer_size)
        self.pool.register(descriptor("cam-1"))
        self.pool.register(descriptor("proc-1", kind=ComponentKind.PROCESSING))
        self.pool.register(descriptor("act-1", kind=ComponentKind.ACTUATION))
        self.contracts = {}
        for slot, cid in (("cam", "cam-1"), ("proc", "proc-1"), ("act", "act-1")):
            c = self.book.create(cid, "sys-1", slot,
                                 self.pool.entries[cid].descriptor.posted_terms, 2.0)
            self.book.transition(c.contract_id, ContractState.RESERVED)
            self.contracts[slot] = c

    def pipeline(self, start=True):
        p = self.router.bind(blueprint(), self.contracts)
        if start:
            self.router.start(p)
        return p


class TestBindStart:
    def test_bind_requires_all_contracts(self):
        rig = Rig()
        partial = {k: v for k, v in rig.contracts.items() if k != "act"}
        with pytest.raises(MissingContract):
            rig.router.bind(blueprint(), partial)

    def test_bind_requires_reserved_state(self):
        rig = Rig()
        rig.book.transition(rig.contracts["cam"].contract_id, ContractState.SERVING)
        with pytest.raises(ContractWrongState):
            rig.router.bind(blueprint(), rig.contracts)

    def test_start_flips_contracts_to_serving(self):
        rig = Rig()
        p = rig.pipeline()
        assert p.phase is PipelinePhase.FLOWING
        assert all(c.state is ContractState.SERVING
                   for c in rig.contracts.values())

    def test_start_before_window_rejected(self):
        rig = Rig()
        bp = blueprint()
        from dataclasses import replace
        bp = replace(bp, start_time=100)
        p = rig.router.bind(bp, rig.contracts)
        with pytest.raises(BeforeStartTime):
            rig.router.start(p)

    def test_double_start_rejected(self):
        rig = Rig()
        p = rig.pipeline()
        with pytest.raises(WrongPhase):
            rig.router.start(p)


class TestRouting:
    def test_seq_assigned_at_enqueue_fifo_delivery(self):
        rig = Rig()
        p = rig.pipeline()
        ch = p.channels[("cam", "proc")]
        for i in range(3):
            m = rig.router.route(p, ("cam", "proc"), {"i": i})
            assert m.seq == i + 1
        assert ch.observed_seqs == [1, 2, 3]
        assert ch.delivered == 3

    def test_channels_number_independently(self):
        rig = Rig()
        p = rig.pipeline()
        rig.router.route(p, ("cam", "proc"), {})
        m = rig.router.route(p, ("proc", "act"), {})
        assert m.seq == 1

    def test_type_checked_route(self):
        rig = Rig()
        p = rig.pipeline()
        with pytest.raises(TypeMismatch):
            rig.router.route_typed(p, ("cam", "proc"), {}, "alarm")

    def test_paused_channel_buffers_and_keeps_numbering(self):
        rig = Rig()
        p = rig.pipeline()
        ch = p.channels[("cam", "proc")]
        rig.router.route(p, ("cam", "proc"), {"i": 0})
        rig.router.pause(p)
        rig.router.route(p, ("cam", "proc"), {"i": 1})
        assert len(ch.buffer) == 1 and ch.delivered == 1
        rig.router.resume(p)
        assert ch.observed_seqs == [1, 2]

    def test_buffer_overflow(self):
        rig = Rig(buffer_size=2)
        p = rig.pipeline()
        rig.router.pause(p)
        rig.router.route(p, ("cam", "proc"), {})
        rig.router.route(p, ("cam", "proc"), {})
        with pytest.raises(BufferOverflow):
            rig.router.route(p, ("cam", "proc"), {})
        # The failed enqueue must not consume a sequence number.
        rig.router.resume(p)
        m = rig.router.route(p, ("cam", "proc"), {})
        assert m.seq == 3

    def test_route_on_stopped_pipeline_rejected(self):
        rig = Rig()
        p = rig.pipeline()
        rig.router.stop(p)
        with pytest.raises(WrongPhase):
            rig.router.route(p, ("cam", "proc"), {})


class TestHandlers:
    def test_handler_runs_after_latency_and_emits_downstream(self):
        rig = Rig()
        rig.router.register_runtime(ComponentRuntime(
            "proc-1",
            handler=lambda payload, emit: emit({"alarm": payload["i"]}, quality=0.9),
            latency_ms=50,
        ))
        p = rig.pipeline()
        rig.router.route(p, ("cam", "proc"), {"i": 7})
        act_ch = p.channels[("proc", "act")]
        assert act_ch.delivered == 0
        rig.loop.run_until(50)
        assert act_ch.delivered == 1

    def test_dead_component_never_completes(self):
        rig = Rig()
        rt = ComponentRuntime("proc-1", handler=lambda pl, emit: emit(pl),
                              latency_ms=50)
        rig.router.register_runtime(rt)
        p = rig.pipeline()
        rig.router.route(p, ("cam", "proc"), {})
        rt.kill()
        rig.loop.run_until(1000)
        assert p.channels[("proc", "act")].delivered == 0
        assert len(rt.pending) == 1

    def test_on_delivery_hook_sees_contract(self):
        rig = Rig()
        seen = []
        rig.router.on_delivery = lambda cid, comp, msg: seen.append((cid, comp, msg.seq))
        p = rig.pipeline()
        rig.router.route(p, ("cam", "proc"), {})
        assert seen == [(rig.contracts["proc"].contract_id, "proc-1", 1)]


class TestStop:
    def test_stop_drains_and_completes(self):
        rig = Rig()
        p = rig.pipeline()
        rig.router.pause(p)
        rig.router.route(p, ("cam", "proc"), {})
        rig.router.stop(p)
        assert p.phase is PipelinePhase.STOPPED
        assert p.channels[("cam", "proc")].delivered == 1
        assert all(c.state is ContractState.COMPLETED
                   for c in rig.contracts.values())


class TestSharing:
    def test_output_share_fans_out_to_grantee(self):
        rig = Rig()
        p1 = rig.pipeline()
        # Second pipeline reuses cam-1 for its sensing slot.
        c2 = {}
        for slot, cid in (("cam", "cam-1"), ("proc", "proc-1"), ("act", "act-1")):
            c = rig.book.create(cid, "sys-2", slot,
                                rig.pool.entries[cid].descriptor.posted_terms, 2.0)
            rig.book.transition(c.contract_id, ContractState.RESERVED)
            c2[slot] = c
        p2 = rig.router.bind(blueprint("sys-2"), c2)
        grant = rig.router.attach_output_share("cam-1", "sys-2", "cam")
        assert grant.mode is ShareMode.OUTPUT
        p2.phase = PipelinePhase.FLOWING  # only the shared slot is live
        rig.router.component_emit("cam-1", {"frame": 1})
        assert p1.channels[("cam", "proc")].delivered == 1
        assert p2.channels[("cam", "proc")].delivered == 1

    def test_output_share_requires_serving_source(self):
        rig = Rig()
        rig.pipeline(start=False)
        with pytest.raises(SourceNotServing):
            rig.router.attach_output_share("cam-1", "sys-1", "cam")

    def test_timeshare_pins_and_releases_capacity(self):
        rig = Rig()
        rig.pipeline()
        grant = rig.router.allocate_timeshare("cam-1", "sys-2", 3.0)
        entry = rig.pool.entries["cam-1"]
        base = entry.allocated_rate
        assert grant.rate == 3.0
        rig.router.release_grant(grant.grant_id)
        assert entry.allocated_rate == pytest.approx(base - 3.0)

    def test_timeshare_rejects_over_capacity(self):
        rig = Rig()
        rig.pipeline()
        with pytest.raises(InsufficientCapacity):
            rig.router.allocate_timeshare("cam-1", "sys-2", 100.0)
