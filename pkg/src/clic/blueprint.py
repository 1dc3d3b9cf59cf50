"""Blueprint parsing and validation, plus translation of high-level
goal statements into blueprints through a plan library.

A blueprint is a partially specified pipeline: typed slots joined by a
DAG of typed edges.  A goal statement names a predicate from the plan
library together with typed arguments; translation instantiates the
library template and folds the stated constraints (budget, deadline,
quality floor) into the slot queries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Any, Dict, List, Mapping, Optional, Tuple

import jsonschema

from .model import (
    ComponentKind,
    DATA_TYPES,
    SlotQuery,
    ValidationReport,
)

__all__ = [
    "BlueprintSpec",
    "Slot",
    "Edge",
    "TeleologicalSpec",
    "PlanLibrary",
    "BlueprintSyntaxError",
    "UnknownGoal",
    "BindingError",
    "parse_blueprint",
    "validate_blueprint",
    "translate_teleological",
]


class BlueprintSyntaxError(Exception):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


class UnknownGoal(Exception):
    pass


class BindingError(Exception):
    pass


@dataclass(frozen=True)
class Slot:
    slot_id: str
    query: SlotQuery

    def to_json(self) -> dict:
        return {"slot_id": self.slot_id, "query": self.query.to_json()}


@dataclass(frozen=True)
class Edge:
    from_slot: str
    to_slot: str
    data_type: str

    def to_json(self) -> dict:
        return {"from_slot": self.from_slot, "to_slot": self.to_slot, "data_type": self.data_type}


@dataclass(frozen=True)
class BlueprintSpec:
    system_id: str
    slots: Tuple[Slot, ...]
    edges: Tuple[Edge, ...]
    start_time: int
    end_time: int
    budget: Optional[float] = None

    def slot(self, slot_id: str) -> Slot:
        for s in self.slots:
            if s.slot_id == slot_id:
                return s
        raise KeyError(slot_id)

    def to_json(self) -> dict:
        return {
            "$schema": "clic-blueprint/1",
            "system_id": self.system_id,
            "slots": [s.to_json() for s in self.slots],
            "edges": [e.to_json() for e in self.edges],
            "start_time": self.start_time,
            "end_time": self.end_time,
            "budget": self.budget,
        }


_SCHEMA = json.loads(
    resources.files("clic").joinpath("schemas/blueprint.schema.json").read_text()
)
_VALIDATOR = jsonschema.Draft202012Validator(_SCHEMA)


def parse_blueprint(text: str) -> BlueprintSpec:
    """Syntax-only parse: schema conformance, no structural validation."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BlueprintSyntaxError(f"line {exc.lineno}", exc.msg) from exc
    return blueprint_from_json(obj)


def blueprint_from_json(obj: Any) -> BlueprintSpec:
    errors = sorted(_VALIDATOR.iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "$" + "".join(f"[{p!r}]" for p in err.absolute_path)
        raise BlueprintSyntaxError(path, err.message)
    return BlueprintSpec(
        system_id=obj["system_id"],
        slots=tuple(
            Slot(slot_id=s["slot_id"], query=SlotQuery.from_json(s["query"]))
            for s in obj["slots"]
        ),
        edges=tuple(
            Edge(from_slot=e["from_slot"], to_slot=e["to_slot"], data_type=e["data_type"])
            for e in obj["edges"]
        ),
        start_time=obj["start_time"],
        end_time=obj["end_time"],
        budget=obj.get("budget"),
    )


def validate_blueprint(spec: BlueprintSpec) -> ValidationReport:
    """Structural invariants: DAG, degree rules, edge typing, time order."""
    problems: List[Tuple[str, str]] = []

    def bad(code: str, msg: str) -> None:
        problems.append((code, msg))

    ids = [s.slot_id for s in spec.slots]
    if len(set(ids)) != len(ids):
        bad("duplicate-slot", "slot ids must be unique")
    declared = set(ids)

    if spec.start_time >= spec.end_time:
        bad("time-order", "start_time must precede end_time")

    indeg: Dict[str, int] = {s: 0 for s in declared}
    outdeg: Dict[str, int] = {s: 0 for s in declared}
    adj: Dict[str, List[str]] = {s: [] for s in declared}
    in_types: Dict[str, set] = {s: set() for s in declared}
    out_types: Dict[str, set] = {s: set() for s in declared}
    for e in spec.edges:
        if e.from_slot not in declared or e.to_slot not in declared:
            bad("dangling-edge", f"edge {e.from_slot}->{e.to_slot} references undeclared slot")
            continue
        indeg[e.to_slot] += 1
        outdeg[e.from_slot] += 1
        adj[e.from_slot].append(e.to_slot)
        in_types[e.to_slot].add(e.data_type)
        out_types[e.from_slot].add(e.data_type)
        if e.data_type not in DATA_TYPES:
            bad("unknown-data-type", f"edge type {e.data_type!r} not in vocabulary")

    # Kahn's algorithm; leftover nodes mean a cycle.
    work = dict(indeg)
    queue = sorted(s for s, d in work.items() if d == 0)
    seen = 0
    while queue:
        node = queue.pop(0)
        seen += 1
        for nxt in adj[node]:
            work[nxt] -= 1
            if work[nxt] == 0:
                queue.append(nxt)
    if seen != len(declared):
        bad("cycle", "edge topology must be a DAG")

    for s in spec.slots:
        sid = s.slot_id
        kind = s.query.kind
        if kind is ComponentKind.SENSING and indeg.get(sid, 0) != 0:
            bad("sensing-in-degree", f"sensing slot {sid} must have in-degree 0")
        if kind is ComponentKind.ACTUATION and outdeg.get(sid, 0) != 0:
            bad("actuation-out-degree", f"actuation slot {sid} must have out-degree 0")
        if kind is ComponentKind.PROCESSING:
            if indeg.get(sid, 0) < 1:
                bad("processing-in-degree", f"processing slot {sid} needs at least one input")
            if outdeg.get(sid, 0) < 1:
                bad("processing-out-degree", f"processing slot {sid} needs at least one output")
        if len(in_types.get(sid, set())) > 1:
            bad("mixed-input-types", f"slot {sid} receives more than one data type")
        if len(out_types.get(sid, set())) > 1:
            bad("mixed-output-types", f"slot {sid} emits more than one data type")

    return ValidationReport(tuple(problems))


# ---------------------------------------------------------------------------
# Goal statements and the plan library
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TeleologicalSpec:
    goal: str
    args: Mapping[str, Any]
    budget: Optional[float] = None
    deadline: Optional[int] = None
    min_quality: Optional[float] = None

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "TeleologicalSpec":
        constraints = obj.get("constraints", {})
        return cls(
            goal=obj["goal"],
            args=dict(obj.get("args", {})),
            budget=constraints.get("budget"),
            deadline=constraints.get("deadline"),
            min_quality=constraints.get("min_quality"),
        )


_PARAM_TYPES = {
    "string": str,
    "region": str,
    "number": (int, float),
}


@dataclass(frozen=True)
class PlanLibrary:
    """Goal predicate -> blueprint template with parameter placeholders."""

    templates: Mapping[str, dict]

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "PlanLibrary":
        return cls(templates=dict(obj["templates"]))

    @classmethod
    def load(cls, path) -> "PlanLibrary":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    @classmethod
    def builtin(cls) -> "PlanLibrary":
        text = resources.files("clic").joinpath("data/plan_library.json").read_text()
        return cls.from_json(json.loads(text))


def _substitute(node: Any, args: Mapping[str, Any]) -> Any:
    if isinstance(node, str):
        out = node
        for name, value in args.items():
            out = out.replace("{" + name + "}", str(value))
        return out
    if isinstance(node, list):
        return [_substitute(x, args) for x in node]
    if isinstance(node, dict):
        return {k: _substitute(v, args) for k, v in node.items()}
    return node


def translate_teleological(t: TeleologicalSpec, lib: PlanLibrary) -> BlueprintSpec:
    """Instantiate the template for ``t.goal`` and fold its constraints.

    The budget is split equally across slots as each slot's max_price;
    a quality floor raises every slot's min_quality; a deadline caps
    end_time.
    """
    template = lib.templates.get(t.goal)
    if template is None:
        raise UnknownGoal(t.goal)

    params: Mapping[str, str] = template.get("params", {})
    missing = set(params) - set(t.args)
    extra = set(t.args) - set(params)
    if missing or extra:
        raise BindingError(f"missing={sorted(missing)} unexpected={sorted(extra)}")
    for name, ptype in params.items():
        want = _PARAM_TYPES.get(ptype)
        if want is None:
            raise BindingError(f"template parameter {name} has unknown type {ptype}")
        if not isinstance(t.args[name], want):
            raise BindingError(f"argument {name} must be of type {ptype}")

    doc = _substitute(json.loads(json.dumps(template["blueprint"])), t.args)

    n_slots = max(1, len(doc.get("slots", [])))
    for slot in doc.get("slots", []):
        if t.budget is not None:
            slot["query"]["max_price"] = t.budget / n_slots
        if t.min_quality is not None:
            slot["query"]["min_quality"] = max(
                slot["query"]["min_quality"], t.min_quality
            )
    if t.budget is not None:
        doc["budget"] = t.budget
    if t.deadline is not None:
        doc["end_time"] = min(doc["end_time"], t.deadline)
        for slot in doc.get("slots", []):
            slot["query"]["term"][1] = min(slot["query"]["term"][1], t.deadline)

    spec = blueprint_from_json(doc)
    report = validate_blueprint(spec)
    if report:
        raise BindingError(f"instantiated template is invalid: {list(report.codes)}")
    return spec
