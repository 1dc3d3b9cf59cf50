"""Run-time goal management: preset and dynamic goals, conflict
detection, arbitration into a composite objective, and parameter
pushes to running pipelines.

Arbitration is lexicographic over priority tiers.  Within a tier each
goal contributes a signed weight damped by its energy cost, and the
tier is normalized so absolute weights sum to one; scaling all weights
in a tier therefore never changes the composite.  Mutually impossible
pairs are resolved by suppressing the less important side, never by
compromise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, List, Mapping, Optional, Tuple

from .events import EventLog, canonical_json

__all__ = [
    "Direction",
    "GoalKind",
    "Goal",
    "ConflictKind",
    "ConflictEntry",
    "CompositeGoal",
    "GoalManager",
    "UnknownMetric",
    "UnknownGoalId",
    "METRIC_VOCABULARY",
    "ANTAGONISTIC_METRIC_PAIRS",
    "detect_conflicts",
    "arbitrate",
]

#: Closed per-deployment metric vocabulary.
METRIC_VOCABULARY = frozenset(
    {
        "avg_transit_time",
        "own_transit_time",
        "throughput",
        "pollution_index",
        "driver_satisfaction",
    }
)

#: Static table of metric pairs that pull against each other.
ANTAGONISTIC_METRIC_PAIRS: FrozenSet[FrozenSet[str]] = frozenset(
    {
        frozenset({"avg_transit_time", "pollution_index"}),
        frozenset({"throughput", "pollution_index"}),
    }
)

DEFAULT_DYNAMIC_WEIGHT_CAP = 0.5


class Direction(str, Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"


class GoalKind(str, Enum):
    PRESET = "preset"
    DYNAMIC = "dynamic"


class UnknownMetric(Exception):
    pass


class UnknownGoalId(Exception):
    pass


@dataclass(frozen=True)
class Goal:
    goal_id: str
    kind: GoalKind
    metric: str
    direction: Direction
    weight: float
    tier: int
    owner: str
    energy_cost: float = 0.0

    def __post_init__(self) -> None:
        if self.weight < 0:
            raise ValueError("weight must be >= 0")
        if self.energy_cost < 0:
            raise ValueError("energy cost must be >= 0")


class ConflictKind(str, Enum):
    ANTAGONISTIC = "antagonistic"
    MUTUALLY_IMPOSSIBLE = "mutually-impossible"


@dataclass(frozen=True)
class ConflictEntry:
    goal_a: str
    goal_b: str
    kind: ConflictKind

    def to_json(self) -> dict:
        return {"goal_a": self.goal_a, "goal_b": self.goal_b, "kind": self.kind.value}


@dataclass(frozen=True)
class CompositeGoal:
    """Normalized signed weight vector per tier, in tier order."""

    tiers: Tuple[Tuple[int, Tuple[Tuple[str, float], ...]], ...]
    conflicts: Tuple[ConflictEntry, ...]
    suppressed: Tuple[str, ...]

    def weight(self, metric: str) -> float:
        """Signed weight of a metric in its most important tier."""
        for _, weights in self.tiers:
            for m, w in weights:
                if m == metric:
                    return w
        return 0.0

    def to_json(self) -> dict:
        return {
            "tiers": [
                {"tier": t, "weights": {m: w for m, w in ws}} for t, ws in self.tiers
            ],
            "conflicts": [c.to_json() for c in self.conflicts],
            "suppressed": list(self.suppressed),
        }


def detect_conflicts(goals: List[Goal]) -> List[ConflictEntry]:
    """Opposite directions on one metric are mutually impossible; pairs
    from the static table are antagonistic."""
    out: List[ConflictEntry] = []
    ordered = sorted(goals, key=lambda g: g.goal_id)
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a.metric == b.metric and a.direction is not b.direction:
                out.append(ConflictEntry(a.goal_id, b.goal_id, ConflictKind.MUTUALLY_IMPOSSIBLE))
            elif frozenset({a.metric, b.metric}) in ANTAGONISTIC_METRIC_PAIRS:
                out.append(ConflictEntry(a.goal_id, b.goal_id, ConflictKind.ANTAGONISTIC))
    return out


def _suppression_order(g: Goal) -> Tuple[int, float, str]:
    # Less important first: higher tier number, higher energy, higher id.
    return (g.tier, g.energy_cost, g.goal_id)


def arbitrate(
    goals: List[Goal],
    dynamic_weight_cap: float = DEFAULT_DYNAMIC_WEIGHT_CAP,
) -> CompositeGoal:
    conflicts = detect_conflicts(goals)

    suppressed: List[str] = []
    active: Dict[str, Goal] = {g.goal_id: g for g in goals}
    for c in conflicts:
        if c.kind is not ConflictKind.MUTUALLY_IMPOSSIBLE:
            continue
        if c.goal_a not in active or c.goal_b not in active:
            continue
        a, b = active[c.goal_a], active[c.goal_b]
        loser = max(a, b, key=_suppression_order)
        del active[loser.goal_id]
        suppressed.append(loser.goal_id)

    by_tier: Dict[int, List[Goal]] = {}
    for g in active.values():
        by_tier.setdefault(g.tier, []).append(g)

    tiers: List[Tuple[int, Tuple[Tuple[str, float], ...]]] = []
    for tier in sorted(by_tier):
        tier_goals = by_tier[tier]
        contributions: Dict[str, float] = {}
        preset_mass = sum(
            g.weight / (1.0 + g.energy_cost)
            for g in tier_goals if g.kind is GoalKind.PRESET
        )
        dynamic_mass = sum(
            g.weight / (1.0 + g.energy_cost)
            for g in tier_goals if g.kind is GoalKind.DYNAMIC
        )
        # Dynamic goals may claim at most the configured fraction of a
        # mixed tier's mass.
        dyn_scale = 1.0
        if preset_mass > 0 and dynamic_mass > 0:
            cap_mass = dynamic_weight_cap / (1.0 - dynamic_weight_cap) * preset_mass
            if dynamic_mass > cap_mass:
                dyn_scale = cap_mass / dynamic_mass
        for g in tier_goals:
            sign = 1.0 if g.direction is Direction.MAXIMIZE else -1.0
            contrib = sign * g.weight / (1.0 + g.energy_cost)
            if g.kind is GoalKind.DYNAMIC:
                contrib *= dyn_scale
            contributions[g.metric] = contributions.get(g.metric, 0.0) + contrib
        total = sum(abs(w) for w in contributions.values())
        if total == 0:
            continue
        weights = tuple(
            (m, contributions[m] / total) for m in sorted(contributions)
        )
        tiers.append((tier, weights))

    return CompositeGoal(
        tiers=tuple(tiers),
        conflicts=tuple(conflicts),
        suppressed=tuple(sorted(suppressed)),
    )


class GoalManager:
    """Holds the goal set; re-arbitrates after every mutation and pushes
    deduplicated parameter updates to flowing pipelines."""

    def __init__(
        self,
        log: Optional[EventLog] = None,
        dynamic_weight_cap: float = DEFAULT_DYNAMIC_WEIGHT_CAP,
    ):
        self._log = log
        self.dynamic_weight_cap = dynamic_weight_cap
        self.goals: Dict[str, Goal] = {}
        self.composite: CompositeGoal = arbitrate([], dynamic_weight_cap)
        self._last_pushed: Dict[str, str] = {}  # target -> canonical weights

    def _emit(self, type: str, payload: dict) -> None:
        if self._log is not None:
            self._log.append(type, payload)

    def add_goal(self, g: Goal) -> CompositeGoal:
        if g.metric not in METRIC_VOCABULARY:
            raise UnknownMetric(g.metric)
        self.goals[g.goal_id] = g
        self._emit("GoalAdded", {
            "goal_id": g.goal_id, "kind": g.kind.value, "metric": g.metric,
            "direction": g.direction.value, "weight": g.weight,
            "tier": g.tier, "owner": g.owner, "energy_cost": g.energy_cost,
        })
        return self._rearbitrate()

    def remove_goal(self, goal_id: str) -> CompositeGoal:
        if goal_id not in self.goals:
            raise UnknownGoalId(goal_id)
        del self.goals[goal_id]
        self._emit("GoalRemoved", {"goal_id": goal_id})
        return self._rearbitrate()

    def _rearbitrate(self) -> CompositeGoal:
        before = set(self.composite.suppressed)
        self.composite = arbitrate(
            sorted(self.goals.values(), key=lambda g: g.goal_id),
            self.dynamic_weight_cap,
        )
        for goal_id in self.composite.suppressed:
            if goal_id not in before:
                self._emit("Suppression", {"goal_id": goal_id})
        return self.composite

    def emit_parameter_updates(self, targets: Mapping[str, Callable[[dict], None]]) -> int:
        """Push the composite weight vector to each flowing target's
        control channel; no-op updates are suppressed.

        ``targets`` maps target id to a send callable.  Returns the
        number of messages actually sent.
        """
        vector = self.composite.to_json()["tiers"]
        encoded = canonical_json(vector)
        sent = 0
        for target_id in sorted(targets):
            if self._last_pushed.get(target_id) == encoded:
                continue
            targets[target_id]({"type": "params", "weights": vector})
            self._last_pushed[target_id] = encoded
            self._emit("ParamsUpdated", {"target": target_id, "weights": vector})
            sent += 1
        return sent
