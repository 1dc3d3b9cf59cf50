"""Live pipelines: binding, message routing, output- and time-sharing.

Messages are routed through the orchestrator hub, never peer to peer:
that is what makes SLA measurement, buffering for hot swap, and
deterministic replay possible.  Each channel assigns strictly
increasing sequence numbers at enqueue time and delivers FIFO, so a
consumer that observes 1..n with no gap has provably lost nothing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Deque, Dict, List, Optional, Tuple

from .blueprint import BlueprintSpec
from .clock import EventLoop
from .events import EventLog
from .procurement import Contract, ContractBook, ContractState
from .registry import ComponentPool

__all__ = [
    "DEFAULT_BUFFER_SIZE",
    "Message",
    "Channel",
    "PipelinePhase",
    "PipelineInstance",
    "ShareGrant",
    "ComponentRuntime",
    "Router",
    "RuntimeError_",
    "MissingContract",
    "ContractWrongState",
    "BeforeStartTime",
    "WrongPhase",
    "TypeMismatch",
    "BufferOverflow",
    "SourceNotServing",
    "InsufficientCapacity",
]

DEFAULT_BUFFER_SIZE = 1024


class RuntimeError_(Exception):
    pass


class MissingContract(RuntimeError_):
    pass


class ContractWrongState(RuntimeError_):
    pass


class BeforeStartTime(RuntimeError_):
    pass


class WrongPhase(RuntimeError_):
    pass


class TypeMismatch(RuntimeError_):
    pass


class BufferOverflow(RuntimeError_):
    pass


class SourceNotServing(RuntimeError_):
    pass


class InsufficientCapacity(RuntimeError_):
    pass


@dataclass(frozen=True)
class Message:
    channel: Tuple[str, str, str]  # (system_id, from_slot, to_slot)
    seq: int
    data_type: str
    payload: object
    produced_at: int
    quality: Optional[float] = None


@dataclass
class Channel:
    system_id: str
    from_slot: str
    to_slot: str
    data_type: str
    buffer_size: int = DEFAULT_BUFFER_SIZE
    next_seq: int = 1
    paused: bool = False
    buffer: Deque[Message] = field(default_factory=deque)
    enqueued: int = 0
    delivered: int = 0
    observed_seqs: List[int] = field(default_factory=list)

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.system_id, self.from_slot, self.to_slot)

    def snapshot(self) -> dict:
        return {
            "from_slot": self.from_slot,
            "to_slot": self.to_slot,
            "data_type": self.data_type,
            "next_seq": self.next_seq,
            "paused": self.paused,
            "buffered": len(self.buffer),
            "enqueued": self.enqueued,
            "delivered": self.delivered,
        }


class PipelinePhase(str, Enum):
    BOUND = "bound"
    FLOWING = "flowing"
    PAUSED = "paused"
    STOPPED = "stopped"


@dataclass
class PipelineInstance:
    system_id: str
    blueprint: BlueprintSpec
    binding: Dict[str, str]  # slot_id -> contract_id
    channels: Dict[Tuple[str, str], Channel]  # (from_slot, to_slot) -> channel
    phase: PipelinePhase = PipelinePhase.BOUND

    def inbound(self, slot_id: str) -> List[Channel]:
        return [c for c in self.channels.values() if c.to_slot == slot_id]

    def outbound(self, slot_id: str) -> List[Channel]:
        return [c for c in self.channels.values() if c.from_slot == slot_id]

    def snapshot(self) -> dict:
        return {
            "system_id": self.system_id,
            "phase": self.phase.value,
            "binding": dict(sorted(self.binding.items())),
            "channels": {
                f"{k[0]}->{k[1]}": self.channels[k].snapshot()
                for k in sorted(self.channels)
            },
        }


class ShareMode(str, Enum):
    OUTPUT = "output-share"
    TIME = "time-share"


@dataclass(frozen=True)
class ShareGrant:
    grant_id: str
    component_id: str
    grantee_system: str
    mode: ShareMode
    slot_id: Optional[str] = None  # grantee slot, output share only
    rate: float = 0.0  # time share only


@dataclass
class _Job:
    msg: Message
    due: Optional[int]  # None for dead components: never completes


class ComponentRuntime:
    """Simulated endpoint of one component.

    ``handler(payload, emit)`` maps an input payload to zero or more
    outputs by calling ``emit(payload, quality=None)``.  Sensing
    components have no handler and emit when externally driven.
    """

    def __init__(
        self,
        component_id: str,
        handler: Optional[Callable[[object, Callable], None]] = None,
        latency_ms: int = 0,
    ):
        self.component_id = component_id
        self.handler = handler
        self.latency_ms = latency_ms
        self.alive = True
        self.pending: List[_Job] = []

    def kill(self) -> None:
        """Fault injection: stop processing and heartbeating."""
        self.alive = False
        for job in self.pending:
            job.due = None

    def next_due(self) -> Optional[int]:
        dues = [j.due for j in self.pending if j.due is not None]
        return min(dues) if dues else None

    def take_pending_inputs(self) -> List[Message]:
        msgs = [j.msg for j in self.pending]
        self.pending.clear()
        return msgs


class Router:
    """The orchestration hub: owns pipelines, channels, and grants."""

    def __init__(
        self,
        pool: ComponentPool,
        book: ContractBook,
        loop: EventLoop,
        log: Optional[EventLog] = None,
        buffer_size: int = DEFAULT_BUFFER_SIZE,
    ):
        self.pool = pool
        self.book = book
        self.loop = loop
        self._log = log
        self.buffer_size = buffer_size
        self.pipelines: Dict[str, PipelineInstance] = {}
        self.runtimes: Dict[str, ComponentRuntime] = {}
        self.grants: Dict[str, ShareGrant] = {}
        self._grant_counter = 0
        #: Observation hook: (contract_id, component_id, message) on delivery.
        self.on_delivery: Optional[Callable[[str, str, Message], None]] = None

    def _emit(self, type: str, payload: dict) -> None:
        if self._log is not None:
            self._log.append(type, payload)

    def register_runtime(self, rt: ComponentRuntime) -> None:
        self.runtimes[rt.component_id] = rt

    # -- lifecycle -----------------------------------------------------

    def bind(self, b: BlueprintSpec, contracts: Dict[str, Contract]) -> PipelineInstance:
        for slot in b.slots:
            c = contracts.get(slot.slot_id)
            if c is None:
                raise MissingContract(slot.slot_id)
            if c.state is not ContractState.RESERVED:
                raise ContractWrongState(f"{c.contract_id} is {c.state.value}")
        channels = {
            (e.from_slot, e.to_slot): Channel(
                system_id=b.system_id,
                from_slot=e.from_slot,
                to_slot=e.to_slot,
                data_type=e.data_type,
                buffer_size=self.buffer_size,
            )
            for e in b.edges
        }
        p = PipelineInstance(
            system_id=b.system_id,
            blueprint=b,
            binding={s: c.contract_id for s, c in contracts.items()},
            channels=channels,
        )
        self.pipelines[b.system_id] = p
        self._emit(
            "PipelineBound",
            {"system_id": b.system_id, "binding": dict(sorted(p.binding.items()))},
        )
        return p

    def start(self, p: PipelineInstance) -> PipelineInstance:
        if p.phase is not PipelinePhase.BOUND:
            raise WrongPhase(f"{p.system_id} is {p.phase.value}")
        if self.loop.now < p.blueprint.start_time:
            raise BeforeStartTime(
                f"now {self.loop.now} < start_time {p.blueprint.start_time}"
            )
        for slot_id in sorted(p.binding):
            self.book.transition(p.binding[slot_id], ContractState.SERVING)
        p.phase = PipelinePhase.FLOWING
        for slot_id in sorted(p.binding):
            c = self.book.contracts[p.binding[slot_id]]
            self._emit(
                "StartSignal", {"system_id": p.system_id, "component_id": c.component_id}
            )
        return p

    def pause(self, p: PipelineInstance) -> None:
        if p.phase is not PipelinePhase.FLOWING:
            raise WrongPhase(f"{p.system_id} is {p.phase.value}")
        p.phase = PipelinePhase.PAUSED
        for ch in p.channels.values():
            ch.paused = True

    def resume(self, p: PipelineInstance) -> None:
        if p.phase is not PipelinePhase.PAUSED:
            raise WrongPhase(f"{p.system_id} is {p.phase.value}")
        p.phase = PipelinePhase.FLOWING
        for key in sorted(p.channels):
            self.resume_channel(p.channels[key])

    def stop(self, p: PipelineInstance) -> PipelineInstance:
        if p.phase not in (PipelinePhase.FLOWING, PipelinePhase.PAUSED):
            raise WrongPhase(f"{p.system_id} is {p.phase.value}")
        # Drain every buffered message before closing.
        for key in sorted(p.channels):
            ch = p.channels[key]
            ch.paused = False
            while ch.buffer:
                self._deliver(p, ch, ch.buffer.popleft())
        for slot_id in sorted(p.binding):
            c = self.book.contracts[p.binding[slot_id]]
            if c.state is ContractState.SERVING:
                self.book.transition(c.contract_id, ContractState.COMPLETED)
            elif c.state is ContractState.RESERVED:  # e.g. output-share grantee
                self.book.transition(c.contract_id, ContractState.CANCELLED)
        # Time-share grants held by this system are released with it.
        for gid in sorted(self.grants):
            g = self.grants[gid]
            if g.grantee_system == p.system_id:
                self.release_grant(gid)
        p.phase = PipelinePhase.STOPPED
        self._emit("PipelineStopped", {"system_id": p.system_id})
        return p

    # -- routing -------------------------------------------------------

    def route(self, p: PipelineInstance, channel_key: Tuple[str, str], payload: object,
              quality: Optional[float] = None) -> Message:
        """Enqueue one message on a channel; assigns the next seq."""
        if p.phase not in (PipelinePhase.FLOWING, PipelinePhase.PAUSED):
            raise WrongPhase(f"{p.system_id} is {p.phase.value}")
        ch = p.channels[channel_key]
        msg = Message(
            channel=(p.system_id, ch.from_slot, ch.to_slot),
            seq=ch.next_seq,
            data_type=ch.data_type,
            payload=payload,
            produced_at=self.loop.now,
            quality=quality,
        )
        if ch.paused or p.phase is PipelinePhase.PAUSED:
            if len(ch.buffer) >= ch.buffer_size:
                raise BufferOverflow(f"channel {ch.key} buffer full ({ch.buffer_size})")
            ch.next_seq += 1
            ch.enqueued += 1
            ch.buffer.append(msg)
        else:
            ch.next_seq += 1
            ch.enqueued += 1
            self._deliver(p, ch, msg)
        return msg

    def route_typed(self, p: PipelineInstance, channel_key: Tuple[str, str],
                    payload: object, data_type: str,
                    quality: Optional[float] = None) -> Message:
        ch = p.channels[channel_key]
        if data_type != ch.data_type:
            raise TypeMismatch(f"{data_type!r} on {ch.data_type!r} channel {ch.key}")
        return self.route(p, channel_key, payload, quality)

    def resume_channel(self, ch: Channel) -> None:
        ch.paused = False
        p = self.pipelines[ch.system_id]
        while ch.buffer and not ch.paused:
            self._deliver(p, ch, ch.buffer.popleft())

    def _deliver(self, p: PipelineInstance, ch: Channel, msg: Message) -> None:
        ch.delivered += 1
        ch.observed_seqs.append(msg.seq)
        contract_id = p.binding.get(ch.to_slot)
        if contract_id is None:
            return
        contract = self.book.contracts[contract_id]
        if self.on_delivery is not None:
            self.on_delivery(contract_id, contract.component_id, msg)
        rt = self.runtimes.get(contract.component_id)
        if rt is None or rt.handler is None:
            return
        due = self.loop.now + rt.latency_ms if rt.alive else None
        job = _Job(msg=msg, due=due)
        rt.pending.append(job)
        if due is not None:
            self.loop.at(due, lambda: self._complete_job(rt, job))

    def _complete_job(self, rt: ComponentRuntime, job: _Job) -> None:
        if job not in rt.pending:
            return  # taken for replay or component swapped out
        if not rt.alive or job.due is None:
            return
        rt.pending.remove(job)

        def emit(payload: object, quality: Optional[float] = None) -> None:
            self.component_emit(rt.component_id, payload, quality)

        rt.handler(job.msg.payload, emit)

    def deliver_direct(self, p: PipelineInstance, slot_id: str, msg: Message) -> None:
        """Re-inject a drained input straight to the slot's current
        component (hot-swap replay path)."""
        contract = self.book.contracts[p.binding[slot_id]]
        rt = self.runtimes.get(contract.component_id)
        if rt is None or rt.handler is None:
            return
        due = self.loop.now + rt.latency_ms if rt.alive else None
        job = _Job(msg=msg, due=due)
        rt.pending.append(job)
        if due is not None:
            self.loop.at(due, lambda: self._complete_job(rt, job))

    def component_emit(self, component_id: str, payload: object,
                       quality: Optional[float] = None) -> List[Message]:
        """Fan an output of a component into every pipeline it serves,
        plus every output-share grantee; each channel numbers its own
        stream independently."""
        sent: List[Message] = []
        for system_id in self.pipelines:
            p = self.pipelines[system_id]
            if p.phase not in (PipelinePhase.FLOWING, PipelinePhase.PAUSED):
                continue
            for slot_id in sorted(p.binding):
                contract = self.book.contracts[p.binding[slot_id]]
                if contract.component_id != component_id:
                    continue
                serving = contract.state in (ContractState.SERVING, ContractState.DRAINING)
                shared = any(
                    g.mode is ShareMode.OUTPUT
                    and g.component_id == component_id
                    and g.grantee_system == system_id
                    and g.slot_id == slot_id
                    for g in self.grants.values()
                )
                if not (serving or shared):
                    continue
                for ch in p.outbound(slot_id):
                    sent.append(self.route(p, (ch.from_slot, ch.to_slot), payload, quality))
        return sent

    # -- sharing -------------------------------------------------------

    def attach_output_share(self, source_component: str, grantee_system: str,
                            grantee_slot: str) -> ShareGrant:
        serving = any(
            c.component_id == source_component and c.state is ContractState.SERVING
            for c in self.book.contracts.values()
        )
        if not serving:
            raise SourceNotServing(source_component)
        p = self.pipelines[grantee_system]
        contract = self.book.contracts[p.binding[grantee_slot]]
        if contract.component_id != source_component:
            raise SourceNotServing(
                f"grantee slot {grantee_slot} is not bound to {source_component}"
            )
        if contract.state is not ContractState.RESERVED:
            raise ContractWrongState(f"{contract.contract_id} is {contract.state.value}")
        grant = self._new_grant(source_component, grantee_system,
                                ShareMode.OUTPUT, slot_id=grantee_slot)
        return grant

    def allocate_timeshare(self, component_id: str, grantee_system: str,
                           rate: float) -> ShareGrant:
        entry = self.pool.entries.get(component_id)
        if entry is None or entry.residual_capacity < rate - 1e-9:
            raise InsufficientCapacity(
                f"{component_id}: requested {rate}, residual "
                f"{entry.residual_capacity if entry else 0}"
            )
        grant = self._new_grant(component_id, grantee_system, ShareMode.TIME, rate=rate)
        self.pool.allocate(component_id, rate, grant.grant_id)
        return grant

    def release_grant(self, grant_id: str) -> None:
        grant = self.grants.pop(grant_id)
        if grant.mode is ShareMode.TIME:
            self.pool.release(grant.component_id, grant_id)
        self._emit("ShareReleased", {"grant_id": grant_id})

    def _new_grant(self, component_id: str, grantee_system: str, mode: ShareMode,
                   slot_id: Optional[str] = None, rate: float = 0.0) -> ShareGrant:
        self._grant_counter += 1
        grant = ShareGrant(
            grant_id=f"g{self._grant_counter:04d}",
            component_id=component_id,
            grantee_system=grantee_system,
            mode=mode,
            slot_id=slot_id,
            rate=rate,
        )
        self.grants[grant.grant_id] = grant
        self._emit(
            "ShareGranted",
            {
                "grant_id": grant.grant_id,
                "component_id": component_id,
                "grantee_system": grantee_system,
                "mode": mode.value,
                "slot_id": slot_id,
                "rate": rate,
            },
        )
        return grant

    # -- snapshots -----------------------------------------------------

    def snapshot(self) -> dict:
        return {
            sid: self.pipelines[sid].snapshot() for sid in sorted(self.pipelines)
        }
