"""QoS estimation from history, SLA compliance verdicts, and the
economics of component replacement.

Everything here is a pure function over immutable values; the stateful
observation plumbing lives in `clic.monitor`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import List, Optional, Sequence, Tuple

__all__ = [
    "ObsKind",
    "Observation",
    "QosEstimate",
    "ComplianceVerdict",
    "BreachReason",
    "ReplacementAction",
    "ReplacementDecision",
    "ReplacementTrigger",
    "NoCandidate",
    "estimate_qos",
    "evaluate_sla",
    "decide_replacement",
    "p95_rank",
]

DEFAULT_ALPHA = 0.1
DEFAULT_WINDOW = 20
DEFAULT_K_MISSED = 3


class ObsKind(str, Enum):
    LATENCY = "latency"
    QUALITY = "quality"
    HEARTBEAT_RECEIVED = "heartbeat-received"
    HEARTBEAT_MISSED = "heartbeat-missed"
    OVERFLOW = "overflow"


@dataclass(frozen=True)
class Observation:
    contract_id: str
    ts: int
    kind: ObsKind
    value: float = 0.0  # latency ms or quality; unused for heartbeats

    def __post_init__(self) -> None:
        if self.kind is ObsKind.LATENCY and self.value < 0:
            raise ValueError("latency must be >= 0")
        if self.kind is ObsKind.QUALITY and not (0.0 <= self.value <= 1.0):
            raise ValueError("quality must be in [0,1]")

    def to_json(self) -> dict:
        return {
            "contract_id": self.contract_id,
            "ts": self.ts,
            "kind": self.kind.value,
            "value": self.value,
        }


@dataclass(frozen=True)
class QosEstimate:
    """Exponentially smoothed reliability and expected quality."""

    reliability: float = 1.0
    expected_quality: float = 1.0
    n: int = 0
    alpha: float = DEFAULT_ALPHA

    def to_json(self) -> dict:
        return {
            "reliability": self.reliability,
            "expected_quality": self.expected_quality,
            "n": self.n,
            "alpha": self.alpha,
        }


def estimate_qos(
    est: QosEstimate,
    obs: Observation,
    max_latency: Optional[int] = None,
    min_quality: Optional[float] = None,
) -> QosEstimate:
    """Fold one observation into the estimate.

    Reliability tracks a success indicator: 1 for compliant-contributing
    observations (heartbeat received, latency within bound, quality at
    or above floor), 0 for misses, overflows, and out-of-bound values.
    Quality observations also update the expected quality.
    """
    a = est.alpha
    r, q = est.reliability, est.expected_quality
    if obs.kind is ObsKind.QUALITY:
        q = (1 - a) * q + a * obs.value
        if min_quality is not None:
            x = 1.0 if obs.value >= min_quality else 0.0
            r = (1 - a) * r + a * x
    elif obs.kind is ObsKind.LATENCY:
        ok = max_latency is None or obs.value <= max_latency
        r = (1 - a) * r + a * (1.0 if ok else 0.0)
    elif obs.kind is ObsKind.HEARTBEAT_RECEIVED:
        r = (1 - a) * r + a * 1.0
    else:  # missed heartbeat or overflow
        r = (1 - a) * r + a * 0.0
    # Convex combinations of in-range values stay in range.
    return QosEstimate(reliability=r, expected_quality=q, n=est.n + 1, alpha=a)


class BreachReason(str, Enum):
    LATENCY_EXCEEDED = "latency-exceeded"
    QUALITY_BELOW_FLOOR = "quality-below-floor"
    UNAVAILABLE = "unavailable"


@dataclass(frozen=True)
class ComplianceVerdict:
    contract_id: str
    window: Tuple[int, int]
    breach: Optional[BreachReason]  # None means compliant
    evidence: dict

    @property
    def compliant(self) -> bool:
        return self.breach is None

    def to_json(self) -> dict:
        return {
            "contract_id": self.contract_id,
            "window": list(self.window),
            "status": "compliant" if self.compliant else f"breach:{self.breach.value}",
            "evidence": self.evidence,
        }


def p95_rank(n: int) -> int:
    """1-based order statistic used for the small-sample p95."""
    return max(1, math.ceil(0.95 * n))


def evaluate_sla(
    contract_id: str,
    window: Tuple[int, int],
    observations: Sequence[Observation],
    max_latency: int,
    min_quality: float,
    k_missed: int = DEFAULT_K_MISSED,
) -> ComplianceVerdict:
    """Judge one observation window against the contract terms.

    Breach checks, in order of severity: unavailability (k consecutive
    missed heartbeats), p95 latency over bound, mean quality below
    floor.
    """
    latencies = sorted(o.value for o in observations if o.kind is ObsKind.LATENCY)
    qualities = [o.value for o in observations if o.kind is ObsKind.QUALITY]

    consecutive = 0
    worst_run = 0
    for o in observations:
        if o.kind is ObsKind.HEARTBEAT_MISSED:
            consecutive += 1
            worst_run = max(worst_run, consecutive)
        elif o.kind is ObsKind.HEARTBEAT_RECEIVED:
            consecutive = 0

    if worst_run >= k_missed:
        return ComplianceVerdict(
            contract_id, window, BreachReason.UNAVAILABLE,
            {"consecutive_missed": worst_run},
        )
    if latencies:
        p95 = latencies[p95_rank(len(latencies)) - 1]
        if p95 > max_latency:
            return ComplianceVerdict(
                contract_id, window, BreachReason.LATENCY_EXCEEDED,
                {"p95_latency": p95, "samples": len(latencies)},
            )
    if qualities:
        mean_q = sum(qualities) / len(qualities)
        if mean_q < min_quality:
            return ComplianceVerdict(
                contract_id, window, BreachReason.QUALITY_BELOW_FLOOR,
                {"mean_quality": mean_q, "samples": len(qualities)},
            )
    return ComplianceVerdict(contract_id, window, None, {"observations": len(observations)})


class ReplacementTrigger(str, Enum):
    BREACH = "breach"
    UNAVAILABLE = "unavailable"
    CONTRACT_END = "contract-end"
    ECONOMIC = "economic"


class ReplacementAction(str, Enum):
    KEEP = "keep"
    REPLACE = "replace"


class NoCandidate(Exception):
    """Breach replacement with an empty market; escalates to L3."""


@dataclass(frozen=True)
class ReplacementDecision:
    contract_id: str
    action: ReplacementAction
    trigger: ReplacementTrigger
    candidate: Optional[str] = None
    expected_saving: float = 0.0
    penalty_due: float = 0.0

    def to_json(self) -> dict:
        return {
            "contract_id": self.contract_id,
            "action": self.action.value,
            "trigger": self.trigger.value,
            "candidate": self.candidate,
            "expected_saving": self.expected_saving,
            "penalty_due": self.penalty_due,
        }


def decide_replacement(
    contract_id: str,
    agreed_price: float,
    early_termination_penalty: float,
    breach_penalty: float,
    trigger: ReplacementTrigger,
    market: Sequence[Tuple[str, float]],
    horizon_messages: float,
) -> ReplacementDecision:
    """Pick Keep or Replace for one contract.

    Breach/unavailability replace unconditionally (provider owes the
    breach penalty); contract end always re-procures; the economic case
    replaces only when the projected saving against the market's
    second-lowest price beats the early-termination penalty.
    """
    ranked = sorted(market, key=lambda c: (c[1], c[0]))
    if trigger in (ReplacementTrigger.BREACH, ReplacementTrigger.UNAVAILABLE):
        if not ranked:
            raise NoCandidate(contract_id)
        best_id, best_price = ranked[0]
        return ReplacementDecision(
            contract_id, ReplacementAction.REPLACE, trigger,
            candidate=best_id,
            expected_saving=max(0.0, (agreed_price - best_price) * horizon_messages),
            penalty_due=breach_penalty,
        )
    if trigger is ReplacementTrigger.CONTRACT_END:
        return ReplacementDecision(
            contract_id, ReplacementAction.REPLACE, trigger,
            candidate=ranked[0][0] if ranked else None,
        )
    # Economic: compare against expected auction payment, i.e. the
    # second-lowest market price (reserve logic handled upstream).
    if not ranked:
        return ReplacementDecision(contract_id, ReplacementAction.KEEP, trigger)
    expected_price = ranked[1][1] if len(ranked) > 1 else ranked[0][1]
    saving = (agreed_price - expected_price) * horizon_messages
    if saving > early_termination_penalty:
        return ReplacementDecision(
            contract_id, ReplacementAction.REPLACE, trigger,
            candidate=ranked[0][0],
            expected_saving=saving,
            penalty_due=early_termination_penalty,
        )
    return ReplacementDecision(
        contract_id, ReplacementAction.KEEP, trigger,
        expected_saving=saving, penalty_due=early_termination_penalty,
    )
