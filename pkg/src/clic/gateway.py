"""Real-time human services interfacing: task offers under countdown
deadlines, counter-offers into negotiation, and strict
no-pay-after-deadline settlement.

The session machine is transport-agnostic: the TCP/WebSocket servers
(`clic.gateway_server`) and the scripted simulated workers feed it the
same message schema, so a live client and a simulated worker producing
the same message sequence leave byte-identical event logs behind.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from .events import EventLog
from .model import CapabilityPath

__all__ = [
    "TaskOffer",
    "WorkerProfile",
    "OfferOutcomeKind",
    "OfferOutcome",
    "PaymentReason",
    "PaymentVerdict",
    "SimulatedWorker",
    "GatewayWorkerSeller",
    "Gateway",
    "UnknownTask",
    "WorkerDisconnected",
]


class UnknownTask(Exception):
    pass


class WorkerDisconnected(Exception):
    pass


@dataclass(frozen=True)
class TaskOffer:
    task_id: str
    description: str
    input_payload: object
    offered_price: float
    deadline: int  # logical ms, inclusive
    max_latency: int
    min_quality: float
    countdown_start: int
    contract_id: Optional[str] = None

    def __post_init__(self) -> None:
        if self.deadline <= self.countdown_start:
            raise ValueError("deadline must be after countdown start")

    def to_json(self) -> dict:
        return {
            "type": "task_offer",
            "task_id": self.task_id,
            "description": self.description,
            "input": self.input_payload,
            "offered_price": self.offered_price,
            "deadline": self.deadline,
            "sla": {"max_latency": self.max_latency, "min_quality": self.min_quality},
            "countdown_start": self.countdown_start,
        }


@dataclass(frozen=True)
class WorkerProfile:
    worker_id: str
    capability: CapabilityPath
    reservation_price: float
    accept_probability: float = 1.0
    latency_range: Tuple[int, int] = (100, 1000)
    error_rate: float = 0.0
    posted_quality: float = 0.9
    do_not_disturb: bool = False

    def __post_init__(self) -> None:
        if not (0.0 <= self.accept_probability <= 1.0):
            raise ValueError("accept_probability must be in [0,1]")
        if not (0.0 <= self.error_rate <= 1.0):
            raise ValueError("error_rate must be in [0,1]")
        if self.latency_range[0] > self.latency_range[1]:
            raise ValueError("latency range must be ordered")


class OfferOutcomeKind(str, Enum):
    ACCEPTED = "accepted"
    DECLINED = "declined"
    COUNTER = "counter"
    NO_RESPONSE = "no-response"


@dataclass(frozen=True)
class OfferOutcome:
    kind: OfferOutcomeKind
    counter_price: Optional[float] = None
    counter_quality: Optional[float] = None

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.kind is OfferOutcomeKind.COUNTER:
            out["counter"] = {"price": self.counter_price, "quality": self.counter_quality}
        return out


class PaymentReason(str, Enum):
    ON_TIME = "on-time"
    AFTER_DEADLINE = "after-deadline"
    QUALITY_REJECTED = "quality-rejected"


@dataclass(frozen=True)
class PaymentVerdict:
    task_id: str
    paid: bool
    amount: float
    reason: PaymentReason

    def __post_init__(self) -> None:
        if not self.paid and self.amount != 0:
            raise ValueError("unpaid verdicts carry zero amount")

    def to_json(self) -> dict:
        return {
            "type": "payment_verdict",
            "task_id": self.task_id,
            "paid": self.paid,
            "amount": self.amount,
            "reason": self.reason.value,
        }


class SimulatedWorker:
    """Scripted worker with a private seeded RNG stream.

    Policy: declines when do-not-disturb; at or above the reservation
    price accepts with the profile's probability, below it counters at
    the reservation; once accepted, submits after one latency draw,
    with an error-rate chance of sub-floor quality.
    """

    def __init__(self, profile: WorkerProfile, rng: random.Random):
        self.profile = profile
        self.rng = rng

    def respond(self, offer: TaskOffer) -> OfferOutcome:
        p = self.profile
        if p.do_not_disturb:
            return OfferOutcome(OfferOutcomeKind.DECLINED)
        if offer.offered_price >= p.reservation_price:
            if self.rng.random() < p.accept_probability:
                return OfferOutcome(OfferOutcomeKind.ACCEPTED)
            return OfferOutcome(OfferOutcomeKind.DECLINED)
        return OfferOutcome(
            OfferOutcomeKind.COUNTER,
            counter_price=p.reservation_price,
            counter_quality=p.posted_quality,
        )

    def submission(self, offer: TaskOffer, truth: Optional[float] = None) -> Tuple[object, int, float]:
        """(payload, submit_ts, quality) for an accepted offer."""
        p = self.profile
        delay = self.rng.randint(p.latency_range[0], p.latency_range[1])
        ts = offer.countdown_start + delay
        if self.rng.random() < p.error_rate:
            quality = round(offer.min_quality * self.rng.uniform(0.0, 0.9), 6)
        else:
            quality = round(self.rng.uniform(offer.min_quality, 1.0), 6)
        if truth is None:
            payload = {"answer": round(self.rng.random(), 6)}
        else:
            # Noisy human estimate of the ground truth, clamped to [0,1].
            noise = self.rng.uniform(-0.2, 0.2)
            payload = {"value": round(min(1.0, max(0.0, truth + noise)), 6)}
        return payload, ts, quality


@dataclass
class GatewayWorkerSeller:
    """Negotiation counterpart backed by a worker: counters at the
    private reservation price from the first round."""

    reservation: float
    quality: float

    def planned_offer(self, k: int, rounds: int) -> float:
        return self.reservation


@dataclass
class _TaskState:
    offer: TaskOffer
    worker_id: str
    outcome: Optional[OfferOutcome] = None
    verdict: Optional[PaymentVerdict] = None


class Gateway:
    """Task lifecycle bookkeeping shared by all transports."""

    def __init__(
        self,
        log: Optional[EventLog] = None,
        clock: Optional[Callable[[], int]] = None,
    ):
        self._log = log
        self._clock = clock or (lambda: 0)
        self.workers: Dict[str, SimulatedWorker] = {}
        self.tasks: Dict[str, _TaskState] = {}
        #: Called with the task's contract_id on every unpaid verdict.
        self.on_unpaid: Optional[Callable[[str], None]] = None
        #: Called with (owner, goal message) on participant goal submissions.
        self.on_goal: Optional[Callable[[str, dict], None]] = None

    def _emit(self, type: str, payload: dict, ts: Optional[int] = None) -> None:
        if self._log is not None:
            self._log.append(type, payload, ts=ts)

    def connect_worker(self, worker: SimulatedWorker) -> None:
        self.workers[worker.profile.worker_id] = worker

    # -- offers --------------------------------------------------------

    def offer_task(self, worker_id: str, offer: TaskOffer) -> OfferOutcome:
        """Offer to a simulated worker; the outcome is immediate (live
        clients respond through record_response instead)."""
        worker = self.workers.get(worker_id)
        if worker is None:
            raise WorkerDisconnected(worker_id)
        self._open_task(worker_id, offer)
        outcome = worker.respond(offer)
        return self.record_response(offer.task_id, outcome, ts=offer.countdown_start)

    def open_task(self, worker_id: str, offer: TaskOffer) -> None:
        """Register an offer for a live (transport-connected) worker."""
        self._open_task(worker_id, offer)

    def _open_task(self, worker_id: str, offer: TaskOffer) -> None:
        if offer.task_id in self.tasks:
            raise ValueError(f"task {offer.task_id} already offered")
        self.tasks[offer.task_id] = _TaskState(offer=offer, worker_id=worker_id)
        self._emit(
            "TaskOffered",
            {"worker_id": worker_id, **offer.to_json()},
            ts=offer.countdown_start,
        )

    def record_response(self, task_id: str, outcome: OfferOutcome,
                        ts: Optional[int] = None) -> OfferOutcome:
        state = self._task(task_id)
        if state.outcome is not None:
            raise ValueError(f"task {task_id} already answered")
        at = self._clock() if ts is None else ts
        if at > state.offer.deadline and outcome.kind is not OfferOutcomeKind.NO_RESPONSE:
            outcome = OfferOutcome(OfferOutcomeKind.NO_RESPONSE)
        state.outcome = outcome
        self._emit(
            "OfferOutcome",
            {"task_id": task_id, "worker_id": state.worker_id, **outcome.to_json()},
            ts=at,
        )
        return outcome

    def expire(self, task_id: str, ts: Optional[int] = None) -> OfferOutcome:
        """Deadline passed with no reply."""
        state = self._task(task_id)
        if state.outcome is not None:
            return state.outcome
        return self.record_response(
            task_id, OfferOutcome(OfferOutcomeKind.NO_RESPONSE),
            ts=state.offer.deadline if ts is None else ts,
        )

    # -- settlement ----------------------------------------------------

    def submit_result(self, task_id: str, payload: object, ts: int,
                      quality: float) -> PaymentVerdict:
        """Settle a submission: pay only on-time, at-quality delivery.

        The deadline is inclusive: a submission at exactly the deadline
        is paid.
        """
        state = self._task(task_id)
        if state.outcome is None or state.outcome.kind is not OfferOutcomeKind.ACCEPTED:
            raise UnknownTask(f"task {task_id} was never accepted")
        if state.verdict is not None:
            raise ValueError(f"task {task_id} already settled")
        offer = state.offer
        if ts > offer.deadline:
            verdict = PaymentVerdict(task_id, False, 0.0, PaymentReason.AFTER_DEADLINE)
        elif quality < offer.min_quality:
            verdict = PaymentVerdict(task_id, False, 0.0, PaymentReason.QUALITY_REJECTED)
        else:
            verdict = PaymentVerdict(
                task_id, True, offer.offered_price, PaymentReason.ON_TIME
            )
        state.verdict = verdict
        self._emit(
            "TaskSettled",
            {"worker_id": state.worker_id, "payload": payload,
             "quality": quality, "submitted_at": ts, **verdict.to_json()},
            ts=max(ts, offer.countdown_start),
        )
        if not verdict.paid and self.on_unpaid is not None and offer.contract_id:
            self.on_unpaid(offer.contract_id)
        return verdict

    def run_simulated_task(self, worker_id: str, offer: TaskOffer,
                           truth: Optional[float] = None):
        """Offer, scripted response, and settlement in one shot.

        Returns (outcome, verdict_or_None, payload_or_None).
        """
        outcome = self.offer_task(worker_id, offer)
        if outcome.kind is not OfferOutcomeKind.ACCEPTED:
            return outcome, None, None
        worker = self.workers[worker_id]
        payload, ts, quality = worker.submission(offer, truth=truth)
        verdict = self.submit_result(offer.task_id, payload, ts, quality)
        return outcome, verdict, payload

    # -- transport messages --------------------------------------------

    def handle_message(self, worker_id: str, msg: dict, ts: Optional[int] = None) -> List[dict]:
        """Process one wire message from a client; returns replies.

        Unknown message types are answered, not dropped.
        """
        mtype = msg.get("type")
        if mtype == "heartbeat":
            return []
        if mtype == "goal":
            if self.on_goal is not None:
                self.on_goal(worker_id, msg)
            self._emit("ParticipantGoal", {"worker_id": worker_id, "goal": {
                k: v for k, v in msg.items() if k != "type"
            }}, ts=ts)
            return []
        if mtype == "offer_response":
            task_id = msg.get("task_id", "")
            if task_id not in self.tasks:
                return [{"type": "error", "code": "unknown-task", "task_id": task_id}]
            response = msg.get("response", {})
            if "accept" in response:
                outcome = OfferOutcome(OfferOutcomeKind.ACCEPTED)
            elif "decline" in response:
                outcome = OfferOutcome(OfferOutcomeKind.DECLINED)
            elif "counter" in response:
                counter = response["counter"]
                outcome = OfferOutcome(
                    OfferOutcomeKind.COUNTER,
                    counter_price=counter.get("price"),
                    counter_quality=counter.get("quality"),
                )
            else:
                return [{"type": "error", "code": "bad-response", "task_id": task_id}]
            self.record_response(task_id, outcome, ts=ts)
            return []
        if mtype == "task_result":
            task_id = msg.get("task_id", "")
            if task_id not in self.tasks:
                return [{"type": "error", "code": "unknown-task", "task_id": task_id}]
            at = ts if ts is not None else int(msg.get("ts", self._clock()))
            try:
                verdict = self.submit_result(
                    task_id, msg.get("payload"), at, float(msg.get("quality", 1.0))
                )
            except (UnknownTask, ValueError) as exc:
                return [{"type": "error", "code": "bad-submission",
                         "task_id": task_id, "detail": str(exc)}]
            replies = [verdict.to_json()]
            if not verdict.paid:
                replies.append({
                    "type": "sla_violation_notice",
                    "task_id": task_id,
                    "reason": verdict.reason.value,
                })
            return replies
        return [{"type": "error", "code": "unknown-type"}]

    def _task(self, task_id: str) -> _TaskState:
        state = self.tasks.get(task_id)
        if state is None:
            raise UnknownTask(task_id)
        return state
