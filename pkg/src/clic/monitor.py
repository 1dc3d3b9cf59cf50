"""SLA monitoring: observation windows, heartbeat liveness, breach
verdicts, replacement decisions at procurement epochs, and the
zero-loss hot-swap protocol.

The swap protocol pauses the slot's inbound channels, drains in-flight
work out of the old component (with a timeout for dead components,
whose unacknowledged inputs are replayed to the replacement), rebinds,
and resumes.  Channel sequence numbering makes any message loss across
the swap observable downstream.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Optional, Tuple

from .clock import EventLoop
from .events import EventLog
from .procurement import Contract, ContractBook, ContractState
from .qos import (
    BreachReason,
    ComplianceVerdict,
    ObsKind,
    Observation,
    evaluate_sla,
)
from .registry import ComponentPool
from .runtime import Message, PipelineInstance, Router

__all__ = ["MonitorConfig", "SwapReport", "Monitor", "hot_swap"]


@dataclass(frozen=True)
class MonitorConfig:
    alpha: float = 0.1
    window: int = 20
    heartbeat_ms: int = 1000
    k_missed: int = 3
    drain_timeout_ms: int = 5000
    epoch_s: int = 10

    @classmethod
    def from_mapping(cls, obj: dict) -> "MonitorConfig":
        known = {f: obj[f] for f in
                 ("alpha", "window", "heartbeat_ms", "k_missed",
                  "drain_timeout_ms", "epoch_s") if f in obj}
        return cls(**known)


@dataclass(frozen=True)
class SwapReport:
    system_id: str
    slot_id: str
    old_contract: str
    new_contract: str
    buffered: int
    replayed: int
    duration_ms: int
    timed_out: bool

    def to_json(self) -> dict:
        return {
            "system_id": self.system_id,
            "slot_id": self.slot_id,
            "old_contract": self.old_contract,
            "new_contract": self.new_contract,
            "buffered": self.buffered,
            "replayed": self.replayed,
            "duration_ms": self.duration_ms,
            "timed_out": self.timed_out,
        }


def hot_swap(
    router: Router,
    p: PipelineInstance,
    slot_id: str,
    new_contract: Contract,
    drain_timeout_ms: int = 5000,
    log: Optional[EventLog] = None,
) -> SwapReport:
    """Replace the slot's serving component without losing a message.

    Protocol: pause inbound channels; drain in-flight inputs out of the
    old component (its outputs keep flowing downstream); transition old
    to draining, new to serving; rebind; replay anything the old
    component never acknowledged; resume.
    """
    book = router.book
    loop = router.loop
    old_contract = book.contracts[p.binding[slot_id]]
    if old_contract.state is not ContractState.SERVING:
        raise ValueError(f"old contract {old_contract.contract_id} is not serving")
    if new_contract.state is not ContractState.RESERVED:
        raise ValueError(f"new contract {new_contract.contract_id} is not reserved")

    t0 = loop.now
    inbound = p.inbound(slot_id)
    for ch in inbound:
        ch.paused = True
    book.transition(old_contract.contract_id, ContractState.DRAINING)

    old_rt = router.runtimes.get(old_contract.component_id)
    deadline = t0 + drain_timeout_ms
    timed_out = False
    while old_rt is not None and old_rt.pending:
        due = old_rt.next_due()
        if due is None or due > deadline:
            timed_out = True
            break
        loop.run_until(due)

    replayed_msgs: List[Message] = []
    if old_rt is not None and old_rt.pending:
        timed_out = True
        loop.run_until(deadline)  # honor the full drain window
        replayed_msgs = old_rt.take_pending_inputs()

    book.transition(new_contract.contract_id, ContractState.SERVING)
    p.binding[slot_id] = new_contract.contract_id
    book.transition(old_contract.contract_id, ContractState.SUPERSEDED)

    for msg in replayed_msgs:
        router.deliver_direct(p, slot_id, msg)

    buffered = sum(len(ch.buffer) for ch in inbound)
    for ch in sorted(inbound, key=lambda c: c.key):
        router.resume_channel(ch)

    report = SwapReport(
        system_id=p.system_id,
        slot_id=slot_id,
        old_contract=old_contract.contract_id,
        new_contract=new_contract.contract_id,
        buffered=buffered,
        replayed=len(replayed_msgs),
        duration_ms=loop.now - t0,
        timed_out=timed_out,
    )
    if log is not None:
        log.append("HotSwap", report.to_json())
    return report


class Monitor:
    """Consumes the observation stream and raises breach verdicts.

    Per contract it keeps a bounded window of observations; heartbeat
    checks run on the loop every heartbeat period.  When a verdict is a
    breach, the configured callback decides and executes replacement.
    """

    def __init__(
        self,
        pool: ComponentPool,
        book: ContractBook,
        loop: EventLoop,
        log: Optional[EventLog] = None,
        config: MonitorConfig = MonitorConfig(),
    ):
        self.pool = pool
        self.book = book
        self.loop = loop
        self._log = log
        self.config = config
        self.windows: Dict[str, Deque[Observation]] = {}
        self.last_heartbeat: Dict[str, int] = {}
        self.missed_runs: Dict[str, int] = {}
        self.breached: set = set()
        #: Called with (contract, verdict) on breach.
        self.on_breach: Optional[Callable[[Contract, ComplianceVerdict], None]] = None

    def _emit(self, type: str, payload: dict) -> None:
        if self._log is not None:
            self._log.append(type, payload)

    def observe(self, obs: Observation) -> None:
        contract = self.book.contracts.get(obs.contract_id)
        if contract is None or contract.state not in (
            ContractState.SERVING, ContractState.DRAINING
        ):
            return
        window = self.windows.setdefault(
            obs.contract_id, deque(maxlen=self.config.window)
        )
        window.append(obs)
        self._emit("Observation", obs.to_json())
        self.pool.record_observation(
            contract.component_id,
            obs,
            max_latency=contract.terms.max_latency,
            min_quality=contract.terms.min_quality,
        )
        self._check(contract)

    def observe_message(self, contract_id: str, component_id: str, msg: Message) -> None:
        """Delivery hook for the router: latency plus optional quality."""
        self.observe(
            Observation(contract_id, self.loop.now, ObsKind.LATENCY,
                        float(self.loop.now - msg.produced_at))
        )
        if msg.quality is not None:
            self.observe(
                Observation(contract_id, self.loop.now, ObsKind.QUALITY, msg.quality)
            )

    def heartbeat(self, component_id: str) -> None:
        self.last_heartbeat[component_id] = self.loop.now
        self.missed_runs[component_id] = 0
        for c in self._active_contracts(component_id):
            self.observe(
                Observation(c.contract_id, self.loop.now, ObsKind.HEARTBEAT_RECEIVED)
            )

    def check_heartbeats(self) -> None:
        """Run once per heartbeat period: flag components gone quiet."""
        now = self.loop.now
        period = self.config.heartbeat_ms
        for component_id in sorted(self.pool.entries):
            entry = self.pool.entries[component_id]
            if entry.offline:
                continue
            contracts = self._active_contracts(component_id)
            if not contracts:
                continue
            last = self.last_heartbeat.get(component_id)
            if last is not None and now - last < period:
                continue
            self.missed_runs[component_id] = self.missed_runs.get(component_id, 0) + 1
            for c in contracts:
                self.observe(
                    Observation(c.contract_id, now, ObsKind.HEARTBEAT_MISSED)
                )

    def schedule_heartbeat_checks(self, until: int) -> None:
        period = self.config.heartbeat_ms
        t = self.loop.now + period
        while t <= until:
            self.loop.at(t, self.check_heartbeats)
            t += period

    def _active_contracts(self, component_id: str) -> List[Contract]:
        return sorted(
            (
                c for c in self.book.contracts.values()
                if c.component_id == component_id
                and c.state in (ContractState.SERVING, ContractState.DRAINING)
            ),
            key=lambda c: c.contract_id,
        )

    def _check(self, contract: Contract) -> None:
        if contract.contract_id in self.breached:
            return
        window = self.windows[contract.contract_id]
        verdict = evaluate_sla(
            contract.contract_id,
            (window[0].ts, window[-1].ts),
            list(window),
            max_latency=contract.terms.max_latency,
            min_quality=contract.terms.min_quality,
            k_missed=self.config.k_missed,
        )
        if verdict.compliant:
            return
        self.breached.add(contract.contract_id)
        self._emit("Breach", verdict.to_json())
        if self.on_breach is not None:
            self.on_breach(contract, verdict)
