"""Seeded urban traffic-control scenario.

A grid of intersections, each with a north-south and an east-west
queue, is monitored by machine cameras, an aggregated probe-vehicle
feed, and paid human congestion reports.  The readings flow through a
procured pipeline (sensors -> occupancy fusion -> signal optimization
-> traffic lights) and the lights' green splits feed back into the
road model.  A fault schedule can kill or degrade components mid-run;
the monitor detects the breach, buys a replacement, and hot-swaps it
in without message loss.

Every stochastic draw comes from one seeded RNG (plus per-worker
derived streams), so a (config, seed) pair reproduces the run — and
its event log — byte for byte.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Deque, Dict, List, Mapping, Optional, Tuple

from .blueprint import BlueprintSpec, Edge, Slot
from .clock import EventLoop
from .events import EventLog, EventRecord, state_hash
from .gateway import Gateway, OfferOutcomeKind, SimulatedWorker, TaskOffer, WorkerProfile
from .goals import Direction, Goal, GoalKind, GoalManager
from .model import (
    AttributePredicate,
    CapabilityPath,
    ComponentDescriptor,
    ComponentKind,
    Nature,
    NatureConstraint,
    SlaTerms,
    SlotQuery,
)
from .monitor import Monitor, MonitorConfig, SwapReport, hot_swap
from .procurement import (
    ContractBook,
    ContractState,
    InsufficiencyEscalation,
    ProcurementAgent,
    SystemContractSet,
)
from .qos import (
    BreachReason,
    NoCandidate,
    Observation,
    ObsKind,
    ReplacementTrigger,
    decide_replacement,
)
from .registry import ComponentPool
from .runtime import ComponentRuntime, Message, Router

__all__ = [
    "ScenarioConfig",
    "ScenarioResult",
    "RoadWorld",
    "EmptyReports",
    "fuse_occupancy",
    "split_for",
    "optimize_signals",
    "poisson",
    "run_scenario",
    "congested_config",
]

MIN_SPLIT = 0.1
MAX_SPLIT = 0.9


class EmptyReports(Exception):
    pass


# ---------------------------------------------------------------------------
# Pure control laws (oracle-testable)
# ---------------------------------------------------------------------------

def fuse_occupancy(readings: List[Tuple[float, float]]) -> float:
    """Reliability-weighted mean of (value, weight) readings.

    With all weights zero the plain mean is used, so a segment whose
    every source has decayed to zero reliability still fuses.
    """
    if not readings:
        raise EmptyReports("fusion needs at least one report")
    total_w = sum(w for _, w in readings)
    if total_w <= 0:
        return sum(v for v, _ in readings) / len(readings)
    return sum(v * w for v, w in readings) / total_w


def split_for(occ_ns: float, occ_ew: float) -> float:
    """Green share for the NS direction, clamped to [0.1, 0.9]."""
    total = occ_ns + occ_ew
    if total == 0:
        return 0.5
    return min(MAX_SPLIT, max(MIN_SPLIT, occ_ns / total))


def optimize_signals(
    estimates: Mapping[str, Mapping[str, float]],
    pollution_weight: float,
    base_cycle_s: float = 60.0,
    pollution_cycle_step_s: float = 30.0,
    pollution_threshold: float = 0.4,
    fixed: bool = False,
) -> Dict[str, Dict[str, float]]:
    """Per-intersection signal plans from fused occupancy estimates.

    Splits are occupancy-proportional (clamped); when the composite
    goal puts more than ``pollution_threshold`` of its weight on the
    pollution metric, cycles lengthen by the configured step so lights
    change phase less often.
    """
    cycle = base_cycle_s
    if abs(pollution_weight) > pollution_threshold:
        cycle += pollution_cycle_step_s
    plans: Dict[str, Dict[str, float]] = {}
    for j, occ in sorted(estimates.items()):
        split = 0.5 if fixed else split_for(occ["ns"], occ["ew"])
        plans[j] = {"split": split, "cycle_s": cycle}
    return plans


def poisson(rng: random.Random, lam: float) -> int:
    """Knuth's product method; exact for the small rates used here."""
    limit = math.exp(-lam)
    k, p = 0, 1.0
    while True:
        p *= rng.random()
        if p <= limit:
            return k
        k += 1


# ---------------------------------------------------------------------------
# Road model
# ---------------------------------------------------------------------------

@dataclass
class _Approach:
    queue: Deque[int] = field(default_factory=deque)  # arrival step per vehicle
    service_credit: float = 0.0


class RoadWorld:
    """Occupancy queue model of ``n`` signalized intersections.

    Per step each intersection admits Poisson arrivals, splits them NS
    vs EW by the configured bias, and serves each approach up to its
    share of the saturation flow (fractional service accumulates as
    credit).  Vehicles remember their arrival step, so transit time and
    satisfaction are exact per vehicle.
    """

    def __init__(self, n: int, arrival_rate: float, ns_bias: float,
                 saturation: float, queue_capacity: int, rng: random.Random):
        self.n = n
        self.arrival_rate = arrival_rate
        self.ns_bias = ns_bias
        self.saturation = saturation
        self.queue_capacity = queue_capacity
        self.rng = rng
        self.splits: Dict[int, float] = {i: 0.5 for i in range(n)}
        self.ns = [_Approach() for _ in range(n)]
        self.ew = [_Approach() for _ in range(n)]
        self.step_count = 0
        self.spawned = 0
        self.departed = 0
        self.total_wait_steps = 0
        self.satisfaction_sum = 0.0
        self.queue_steps = 0

    def occupancy(self, i: int) -> Tuple[float, float]:
        cap = self.queue_capacity
        return (
            min(1.0, len(self.ns[i].queue) / cap),
            min(1.0, len(self.ew[i].queue) / cap),
        )

    def step(self) -> None:
        s = self.step_count
        for i in range(self.n):
            for _ in range(poisson(self.rng, self.arrival_rate)):
                side = self.ns[i] if self.rng.random() < self.ns_bias else self.ew[i]
                side.queue.append(s)
                self.spawned += 1
            g = self.splits[i]
            self._serve(self.ns[i], g * self.saturation, s)
            self._serve(self.ew[i], (1.0 - g) * self.saturation, s)
            self.queue_steps += len(self.ns[i].queue) + len(self.ew[i].queue)
        self.step_count += 1

    def _serve(self, a: _Approach, rate: float, s: int) -> None:
        a.service_credit = min(a.service_credit + rate, rate + self.saturation)
        while a.service_credit >= 1.0 and a.queue:
            a.service_credit -= 1.0
            arrived = a.queue.popleft()
            wait = s - arrived
            self.departed += 1
            self.total_wait_steps += wait
            self.satisfaction_sum += 1.0 / (1.0 + wait)

    @property
    def in_flight(self) -> int:
        return sum(len(self.ns[i].queue) + len(self.ew[i].queue) for i in range(self.n))

    def metrics(self, step_s: float) -> Dict[str, float]:
        free_flow = 1.0  # steps to cross on green
        if self.departed:
            avg_transit = (free_flow + self.total_wait_steps / self.departed) * step_s
            satisfaction = self.satisfaction_sum / self.departed
        else:
            avg_transit = free_flow * step_s
            satisfaction = 1.0
        denom = max(1, self.step_count) * self.n * self.queue_capacity
        return {
            "avg_transit_time": avg_transit,
            "throughput": float(self.departed),
            "pollution_index": min(1.0, self.queue_steps / denom),
            "driver_satisfaction": min(1.0, max(0.0, satisfaction)),
        }


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FaultSpec:
    at_ms: int
    component_id: str
    action: str  # "kill" | "degrade"

    def to_json(self) -> dict:
        return {"at_ms": self.at_ms, "component_id": self.component_id, "action": self.action}


@dataclass(frozen=True)
class ScenarioConfig:
    grid: int = 8  # side length; grid x grid intersections
    camera_stride: int = 4  # a camera every this many intersections
    duration_s: int = 600
    step_s: int = 2
    sensor_period_s: int = 4
    arrival_rate: float = 3.0
    ns_bias: float = 0.75
    saturation: float = 4.0
    queue_capacity: int = 20
    control: str = "adaptive"  # "adaptive" | "fixed"
    base_cycle_s: float = 60.0
    pollution_cycle_step_s: float = 30.0
    pollution_threshold: float = 0.4
    report_period_s: int = 60
    report_deadline_ms: int = 20000
    worker_error_rate: float = 0.05
    faults: Tuple[FaultSpec, ...] = ()
    spare_camera_intersections: Tuple[int, ...] = ()
    spare_fusion: bool = True
    goals: Tuple[Mapping[str, Any], ...] = ()
    monitor: MonitorConfig = MonitorConfig()

    @property
    def duration_ms(self) -> int:
        return self.duration_s * 1000

    @property
    def n_intersections(self) -> int:
        return self.grid * self.grid

    @property
    def camera_intersections(self) -> Tuple[int, ...]:
        return tuple(range(0, self.n_intersections, self.camera_stride))

    def to_json(self) -> dict:
        return {
            "grid": self.grid,
            "camera_stride": self.camera_stride,
            "duration_s": self.duration_s,
            "step_s": self.step_s,
            "sensor_period_s": self.sensor_period_s,
            "arrival_rate": self.arrival_rate,
            "ns_bias": self.ns_bias,
            "saturation": self.saturation,
            "queue_capacity": self.queue_capacity,
            "control": self.control,
            "base_cycle_s": self.base_cycle_s,
            "pollution_cycle_step_s": self.pollution_cycle_step_s,
            "pollution_threshold": self.pollution_threshold,
            "report_period_s": self.report_period_s,
            "report_deadline_ms": self.report_deadline_ms,
            "worker_error_rate": self.worker_error_rate,
            "faults": [f.to_json() for f in self.faults],
            "spare_camera_intersections": list(self.spare_camera_intersections),
            "spare_fusion": self.spare_fusion,
            "goals": [dict(g) for g in self.goals],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "ScenarioConfig":
        kwargs: Dict[str, Any] = {}
        for key in ("grid", "camera_stride", "duration_s", "step_s", "sensor_period_s",
                    "arrival_rate", "ns_bias", "saturation", "queue_capacity",
                    "control", "base_cycle_s", "pollution_cycle_step_s",
                    "pollution_threshold", "report_period_s", "report_deadline_ms",
                    "worker_error_rate", "spare_fusion"):
            if key in obj:
                kwargs[key] = obj[key]
        if "faults" in obj:
            kwargs["faults"] = tuple(
                FaultSpec(int(f["at_ms"]), f["component_id"], f["action"])
                for f in obj["faults"]
            )
        if "spare_camera_intersections" in obj:
            kwargs["spare_camera_intersections"] = tuple(obj["spare_camera_intersections"])
        if "goals" in obj:
            kwargs["goals"] = tuple(dict(g) for g in obj["goals"])
        if "monitor" in obj:
            kwargs["monitor"] = MonitorConfig.from_mapping(obj["monitor"])
        return cls(**kwargs)


def congested_config(control: str = "adaptive") -> ScenarioConfig:
    """Reference fixture: a congested grid with a camera death and a
    fusion quality fault mid-run."""
    return ScenarioConfig(
        control=control,
        faults=(
            FaultSpec(120_000, "cam-i8", "kill"),
            FaultSpec(300_000, "fuse-1", "degrade"),
        ),
        spare_camera_intersections=(8,),
        goals=(
            {"goal_id": "city-flow", "metric": "avg_transit_time",
             "direction": "minimize", "weight": 3.0, "tier": 1, "owner": "operator"},
            {"goal_id": "city-air", "metric": "pollution_index",
             "direction": "minimize", "weight": 1.0, "tier": 1, "owner": "operator"},
        ),
    )


# ---------------------------------------------------------------------------
# Scenario run
# ---------------------------------------------------------------------------

@dataclass
class ScenarioResult:
    seed: int
    metrics: Dict[str, float]
    state_hash: str
    swaps: List[SwapReport]
    escalations: List[dict]
    channels_ok: bool
    channel_report: Dict[str, dict]
    records: List[EventRecord]
    mean_cycle_s: float = 0.0
    log_path: Optional[str] = None


def _terms(price: float, quality: float, duration_ms: int, capacity: float = 3.0,
           max_latency: int = 2000, breach_penalty: float = 5.0,
           early_termination_penalty: float = 10.0) -> SlaTerms:
    return SlaTerms(
        price=price,
        max_latency=max_latency,
        min_quality=quality,
        capacity=capacity,
        term=(0, duration_ms),
        breach_penalty=breach_penalty,
        early_termination_penalty=early_termination_penalty,
    )


def _build_pool(pool: ComponentPool, cfg: ScenarioConfig) -> None:
    d = cfg.duration_ms
    for i in cfg.camera_intersections:
        pool.register(ComponentDescriptor(
            id=f"cam-i{i}",
            kind=ComponentKind.SENSING,
            nature=Nature.MACHINE,
            capability=CapabilityPath.parse("sense.vision.camera.traffic"),
            posted_terms=_terms(2.0, 0.8, d),
            endpoint=f"sim://cam-i{i}",
            output_type="occupancy",
            location=f"i{i}",
        ))
    for i in cfg.spare_camera_intersections:
        pool.register(ComponentDescriptor(
            id=f"cam-x{i}",
            kind=ComponentKind.SENSING,
            nature=Nature.MACHINE,
            capability=CapabilityPath.parse("sense.vision.camera.traffic"),
            posted_terms=_terms(3.0, 0.8, d),
            endpoint=f"sim://cam-x{i}",
            output_type="occupancy",
            location=f"i{i}",
        ))
    pool.register(ComponentDescriptor(
        id="gps-1",
        kind=ComponentKind.SENSING,
        nature=Nature.MACHINE,
        capability=CapabilityPath.parse("sense.position.gps"),
        posted_terms=_terms(1.5, 0.7, d),
        endpoint="sim://gps-1",
        output_type="occupancy",
    ))
    pool.register(ComponentDescriptor(
        id="h-rep-1",
        kind=ComponentKind.SENSING,
        nature=Nature.HUMAN,
        capability=CapabilityPath.parse("sense.report.traffic"),
        posted_terms=_terms(1.0, 0.6, d),
        endpoint="gateway://h-rep-1",
        output_type="occupancy",
    ))
    fusions = [("fuse-1", 5.0)] + ([("fuse-2", 6.0)] if cfg.spare_fusion else [])
    for fid, price in fusions:
        pool.register(ComponentDescriptor(
            id=fid,
            kind=ComponentKind.PROCESSING,
            nature=Nature.MACHINE,
            capability=CapabilityPath.parse("process.fusion.occupancy"),
            posted_terms=_terms(price, 0.7, d),
            endpoint=f"sim://{fid}",
            input_type="occupancy",
            output_type="occupancy",
        ))
    pool.register(ComponentDescriptor(
        id="plan-1",
        kind=ComponentKind.PROCESSING,
        nature=Nature.MACHINE,
        capability=CapabilityPath.parse("process.traffic.signal-optimization"),
        posted_terms=_terms(4.0, 0.7, d),
        endpoint="sim://plan-1",
        input_type="occupancy",
        output_type="signal-plan",
    ))
    pool.register(ComponentDescriptor(
        id="lights-1",
        kind=ComponentKind.ACTUATION,
        nature=Nature.MACHINE,
        capability=CapabilityPath.parse("act.traffic.signal"),
        posted_terms=_terms(2.5, 0.7, d),
        endpoint="sim://lights-1",
        input_type="signal-plan",
    ))


def _build_blueprint(cfg: ScenarioConfig) -> BlueprintSpec:
    d = cfg.duration_ms
    term = (0, d)

    def q(kind: ComponentKind, cap: str, nature: NatureConstraint = NatureConstraint.MACHINE,
          quality: float = 0.5, preds: Tuple[AttributePredicate, ...] = ()) -> SlotQuery:
        return SlotQuery(
            kind=kind,
            capability=CapabilityPath.parse(cap),
            max_price=20.0,
            min_quality=quality,
            max_latency=5000,
            term=term,
            nature=nature,
            attribute_predicates=preds,
        )

    slots: List[Slot] = []
    edges: List[Edge] = []
    for i in cfg.camera_intersections:
        sid = f"cam-{i:02d}"
        slots.append(Slot(sid, q(
            ComponentKind.SENSING, "sense.vision.camera.traffic",
            preds=(AttributePredicate("location", "within", [f"i{i}"]),),
        )))
        edges.append(Edge(sid, "fuse", "occupancy"))
    slots.append(Slot("gps", q(ComponentKind.SENSING, "sense.position.gps")))
    edges.append(Edge("gps", "fuse", "occupancy"))
    slots.append(Slot("report", q(
        ComponentKind.SENSING, "sense.report.traffic", nature=NatureConstraint.HUMAN
    )))
    edges.append(Edge("report", "fuse", "occupancy"))
    slots.append(Slot("fuse", q(ComponentKind.PROCESSING, "process.fusion.occupancy")))
    slots.append(Slot("plan", q(
        ComponentKind.PROCESSING, "process.traffic.signal-optimization"
    )))
    edges.append(Edge("fuse", "plan", "occupancy"))
    slots.append(Slot("lights", q(ComponentKind.ACTUATION, "act.traffic.signal")))
    edges.append(Edge("plan", "lights", "signal-plan"))

    return BlueprintSpec(
        system_id="traffic-grid",
        slots=tuple(slots),
        edges=tuple(edges),
        start_time=0,
        end_time=d,
    )


def run_scenario(cfg: ScenarioConfig, seed: int,
                 log_path: Optional[str] = None) -> ScenarioResult:
    loop = EventLoop()
    log = EventLog(path=log_path, clock=lambda: loop.now)
    rng = random.Random(seed)

    pool = ComponentPool(log, clock=lambda: loop.now)
    book = ContractBook(pool, log, clock=lambda: loop.now)
    router = Router(pool, book, loop, log)
    monitor = Monitor(pool, book, loop, log, cfg.monitor)
    gateway = Gateway(log, clock=lambda: loop.now)
    goal_mgr = GoalManager(log)

    log.append("RunStarted", {"seed": seed, "config": cfg.to_json()})

    _build_pool(pool, cfg)
    blueprint = _build_blueprint(cfg)
    agent = ProcurementAgent(pool, book, log)
    outcome = agent.procure_system(blueprint)
    if isinstance(outcome, InsufficiencyEscalation):
        raise RuntimeError(f"scenario pool cannot staff the blueprint: {outcome.reasons}")
    assert isinstance(outcome, SystemContractSet)

    world = RoadWorld(cfg.n_intersections, cfg.arrival_rate, cfg.ns_bias,
                      cfg.saturation, cfg.queue_capacity, rng)
    degraded: Dict[str, bool] = {}
    swaps: List[SwapReport] = []
    escalations: List[dict] = []

    # -- component behaviors -------------------------------------------

    fusion_state: Dict[Tuple[int, str], Dict[str, float]] = {}

    fused_cache: Dict[str, Dict[str, float]] = {}

    def fusion_handler_for(fid: str):
        # Estimates are re-fused only for the intersections the incoming
        # report covers; others keep their last fused value.
        def handler(payload, emit):
            src = payload["source"]
            for i_str, vals in sorted(payload["readings"].items()):
                i = int(i_str)
                for direction in ("ns", "ew"):
                    fusion_state.setdefault((i, direction), {})[src] = float(vals[direction])
                fused_cache[i_str] = {
                    direction: fuse_occupancy([
                        (v, pool.entries[s].qos.reliability)
                        for s, v in sorted(fusion_state[(i, direction)].items())
                    ])
                    for direction in ("ns", "ew")
                }
            quality = 0.4 if degraded.get(fid) else 0.95
            emit({"occupancy": dict(fused_cache)}, quality=quality)
        return handler

    emitted_cycles: List[float] = []

    def plan_handler(payload, emit):
        plans = optimize_signals(
            payload["occupancy"],
            pollution_weight=goal_mgr.composite.weight("pollution_index"),
            base_cycle_s=cfg.base_cycle_s,
            pollution_cycle_step_s=cfg.pollution_cycle_step_s,
            pollution_threshold=cfg.pollution_threshold,
            fixed=cfg.control == "fixed",
        )
        for plan in plans.values():
            emitted_cycles.append(plan["cycle_s"])
        emit({"plans": plans}, quality=0.95)

    def lights_handler(payload, emit):
        for j, plan in payload["plans"].items():
            world.splits[int(j)] = float(plan["split"])

    for i in cfg.camera_intersections:
        router.register_runtime(ComponentRuntime(f"cam-i{i}", latency_ms=0))
    for i in cfg.spare_camera_intersections:
        router.register_runtime(ComponentRuntime(f"cam-x{i}", latency_ms=0))
    router.register_runtime(ComponentRuntime("gps-1", latency_ms=0))
    router.register_runtime(ComponentRuntime("fuse-1", fusion_handler_for("fuse-1"), latency_ms=50))
    if cfg.spare_fusion:
        router.register_runtime(ComponentRuntime("fuse-2", fusion_handler_for("fuse-2"), latency_ms=50))
    router.register_runtime(ComponentRuntime("plan-1", plan_handler, latency_ms=50))
    router.register_runtime(ComponentRuntime("lights-1", lights_handler, latency_ms=20))

    pipeline = router.bind(blueprint, outcome.contracts)
    router.start(pipeline)

    # Quality is charged to the producing slot's contract, latency to
    # the consuming one.
    def on_delivery(contract_id: str, component_id: str, msg: Message) -> None:
        monitor.observe(Observation(
            contract_id, loop.now, ObsKind.LATENCY, float(loop.now - msg.produced_at)
        ))
        if msg.quality is not None:
            system_id, from_slot, _ = msg.channel
            producer = router.pipelines[system_id].binding.get(from_slot)
            if producer is not None:
                monitor.observe(Observation(producer, loop.now, ObsKind.QUALITY, msg.quality))

    router.on_delivery = on_delivery

    # -- breach -> replacement -> hot swap ------------------------------

    def repair(contract, verdict) -> None:
        slot_id = contract.slot_id
        if pipeline.binding.get(slot_id) != contract.contract_id:
            return  # already swapped out
        if contract.state is not ContractState.SERVING:
            return
        query = blueprint.slot(slot_id).query
        market = [
            (e.descriptor.id, e.descriptor.posted_terms.price)
            for e in pool.query(query)
            if e.descriptor.id != contract.component_id
        ]
        trigger = (
            ReplacementTrigger.UNAVAILABLE
            if verdict.breach is BreachReason.UNAVAILABLE
            else ReplacementTrigger.BREACH
        )
        horizon = max(1.0, (cfg.duration_ms - loop.now) / (cfg.sensor_period_s * 1000))
        try:
            decision = decide_replacement(
                contract.contract_id, contract.agreed_price,
                contract.terms.early_termination_penalty,
                contract.terms.breach_penalty,
                trigger, market, horizon,
            )
        except NoCandidate:
            esc = {"contract_id": contract.contract_id, "slot_id": slot_id,
                   "reason": "no-replacement-candidate"}
            escalations.append(esc)
            log.append("Escalation", esc)
            return
        log.append("ReplacementDecision", decision.to_json())
        entry = pool.entries[decision.candidate]
        terms = replace(
            entry.descriptor.posted_terms,
            term=query.term,
            min_quality=max(entry.descriptor.posted_terms.min_quality, query.min_quality),
        )
        new_contract = book.create(
            decision.candidate, pipeline.system_id, slot_id, terms,
            entry.descriptor.posted_terms.price,
        )
        book.transition(new_contract.contract_id, ContractState.RESERVED)
        report = hot_swap(router, pipeline, slot_id, new_contract,
                          drain_timeout_ms=cfg.monitor.drain_timeout_ms, log=log)
        swaps.append(report)

    monitor.on_breach = lambda c, v: loop.after(0, lambda: repair(c, v))

    # -- goals ---------------------------------------------------------

    for g in cfg.goals:
        goal_mgr.add_goal(Goal(
            goal_id=g["goal_id"],
            kind=GoalKind(g.get("kind", "preset")),
            metric=g["metric"],
            direction=Direction(g["direction"]),
            weight=float(g["weight"]),
            tier=int(g.get("tier", 1)),
            owner=g.get("owner", "operator"),
            energy_cost=float(g.get("energy_cost", 0.0)),
        ))
    goal_mgr.emit_parameter_updates({"plan": lambda msg: None})

    # -- schedules -----------------------------------------------------

    duration = cfg.duration_ms
    step_ms = cfg.step_s * 1000
    for t in range(step_ms, duration + 1, step_ms):
        loop.at(t, world.step)

    camera_slots = sorted(s.slot_id for s in blueprint.slots if s.slot_id.startswith("cam-"))

    def noisy(value: float, spread: float) -> float:
        return round(min(1.0, max(0.0, value + rng.uniform(-spread, spread))), 6)

    def sensor_tick() -> None:
        for slot_id in camera_slots:
            contract = book.contracts[pipeline.binding[slot_id]]
            rt = router.runtimes.get(contract.component_id)
            if contract.state is not ContractState.SERVING or rt is None or not rt.alive:
                continue
            i = int(slot_id.split("-")[1])
            occ_ns, occ_ew = world.occupancy(i)
            router.component_emit(contract.component_id, {
                "source": contract.component_id,
                "readings": {str(i): {"ns": noisy(occ_ns, 0.05),
                                      "ew": noisy(occ_ew, 0.05)}},
            }, quality=0.9)
        gps = book.contracts[pipeline.binding["gps"]]
        if gps.state is ContractState.SERVING:
            readings = {}
            for i in range(cfg.n_intersections):
                occ_ns, occ_ew = world.occupancy(i)
                readings[str(i)] = {"ns": noisy(occ_ns, 0.1), "ew": noisy(occ_ew, 0.1)}
            router.component_emit("gps-1", {"source": "gps-1", "readings": readings},
                                  quality=0.8)

    sensor_ms = cfg.sensor_period_s * 1000
    for t in range(sensor_ms, duration + 1, sensor_ms):
        loop.at(t, sensor_tick)

    # -- human congestion reports through the gateway ------------------

    profile = WorkerProfile(
        worker_id="h-rep-1",
        capability=CapabilityPath.parse("sense.report.traffic"),
        reservation_price=0.8,
        latency_range=(500, 5000),
        error_rate=cfg.worker_error_rate,
        posted_quality=0.8,
    )
    worker = SimulatedWorker(profile, random.Random(f"{seed}:h-rep-1"))
    gateway.connect_worker(worker)
    human_contract = outcome.contracts["report"]
    gateway.on_unpaid = lambda cid: monitor.observe(
        Observation(cid, loop.now, ObsKind.HEARTBEAT_MISSED)
    )
    task_counter = [0]

    def report_tick() -> None:
        if human_contract.state is not ContractState.SERVING:
            return
        task_counter[0] += 1
        i = task_counter[0] % cfg.n_intersections
        occ_ns, occ_ew = world.occupancy(i)
        truth = (occ_ns + occ_ew) / 2.0
        offer = TaskOffer(
            task_id=f"t{task_counter[0]:03d}",
            description=f"report congestion at intersection i{i}",
            input_payload={"intersection": i},
            offered_price=human_contract.agreed_price,
            deadline=loop.now + cfg.report_deadline_ms,
            max_latency=cfg.report_deadline_ms,
            min_quality=human_contract.terms.min_quality,
            countdown_start=loop.now,
            contract_id=human_contract.contract_id,
        )
        out = gateway.offer_task("h-rep-1", offer)
        if out.kind is not OfferOutcomeKind.ACCEPTED:
            return
        payload, ts, quality = worker.submission(offer, truth=truth)

        def settle() -> None:
            verdict = gateway.submit_result(offer.task_id, payload, loop.now, quality)
            if verdict.paid and human_contract.state is ContractState.SERVING:
                router.component_emit("h-rep-1", {
                    "source": "h-rep-1",
                    "readings": {str(i): {"ns": payload["value"],
                                          "ew": payload["value"]}},
                }, quality=quality)

        loop.at(min(ts, duration), settle)

    report_ms = cfg.report_period_s * 1000
    for t in range(report_ms, duration + 1, report_ms):
        loop.at(t, report_tick)

    # -- heartbeats and liveness checks --------------------------------

    hb_ms = cfg.monitor.heartbeat_ms

    def heartbeat_tick() -> None:
        for cid in sorted(router.runtimes):
            if router.runtimes[cid].alive:
                monitor.heartbeat(cid)
        monitor.heartbeat("h-rep-1")  # the gateway session keeps it live

    for t in range(hb_ms, duration + 1, hb_ms):
        loop.at(t, heartbeat_tick)
    monitor.schedule_heartbeat_checks(duration)

    # -- fault schedule ------------------------------------------------

    def inject(fault: FaultSpec) -> None:
        log.append("FaultInjected", fault.to_json())
        if fault.action == "kill":
            rt = router.runtimes.get(fault.component_id)
            if rt is not None:
                rt.kill()
        elif fault.action == "degrade":
            degraded[fault.component_id] = True
        else:
            raise ValueError(f"unknown fault action {fault.action!r}")

    for fault in cfg.faults:
        loop.at(fault.at_ms, lambda f=fault: inject(f))

    # -- run -----------------------------------------------------------

    loop.run_until(duration)
    router.stop(pipeline)

    channel_report = {
        f"{k[0]}->{k[1]}": {
            "enqueued": pipeline.channels[k].enqueued,
            "delivered": pipeline.channels[k].delivered,
            "gap_free": pipeline.channels[k].observed_seqs
            == list(range(1, pipeline.channels[k].delivered + 1)),
        }
        for k in sorted(pipeline.channels)
    }
    channels_ok = all(
        c["gap_free"] and c["enqueued"] == c["delivered"]
        for c in channel_report.values()
    )

    metrics = world.metrics(cfg.step_s)
    metrics["replacement_count"] = float(len(swaps))
    metrics["messages_lost"] = 0.0 if channels_ok else float(sum(
        c["enqueued"] - c["delivered"] for c in channel_report.values()
    ))
    assert world.spawned == world.departed + world.in_flight
    final_hash = state_hash({"pool": pool.snapshot(), "contracts": book.snapshot()})
    log.append("RunCompleted", {
        "seed": seed,
        "metrics": metrics,
        "state_hash": final_hash,
        "channels_ok": channels_ok,
        "swaps": [s.to_json() for s in swaps],
    })
    log.close()

    return ScenarioResult(
        seed=seed,
        metrics=metrics,
        state_hash=final_hash,
        swaps=swaps,
        escalations=escalations,
        channels_ok=channels_ok,
        channel_report=channel_report,
        records=list(log.records),
        mean_cycle_s=(sum(emitted_cycles) / len(emitted_cycles)) if emitted_cycles else 0.0,
        log_path=log_path,
    )
