"""HTTP face of the registry and procurement front end.

Request/response JSON over the documented endpoints; in simulation
mode the same operations are driven as events on the logical clock, so
this layer stays a thin adapter over `ComponentPool`,
`ProcurementAgent`, and the event log.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Optional

from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import JSONResponse

from .blueprint import (
    BindingError,
    BlueprintSyntaxError,
    PlanLibrary,
    TeleologicalSpec,
    UnknownGoal,
    blueprint_from_json,
    translate_teleological,
)
from .clock import EventLoop
from .events import EventLog
from .model import ComponentDescriptor, SlotQuery
from .procurement import (
    ContractBook,
    InsufficiencyEscalation,
    InvalidBlueprint,
    ProcurementAgent,
    SystemContractSet,
)
from .registry import (
    CapacityBelowAllocated,
    ComponentPool,
    DuplicateId,
    InvalidDescriptor,
    UnknownId,
)

__all__ = ["create_app"]


def create_app(log_path: Optional[str] = None,
               plan_library: Optional[PlanLibrary] = None) -> FastAPI:
    loop = EventLoop()
    log = EventLog(path=Path(log_path) if log_path else None, clock=lambda: loop.now)
    pool = ComponentPool(log, clock=lambda: loop.now)
    book = ContractBook(pool, log, clock=lambda: loop.now)
    agent = ProcurementAgent(pool, book, log)
    plans = plan_library or PlanLibrary.builtin()

    app = FastAPI(title="clic registry")
    app.state.pool = pool
    app.state.book = book
    app.state.log = log
    app.state.loop = loop

    @app.post("/components")
    async def register_component(request: Request):
        body = await request.json()
        try:
            entry = pool.register(ComponentDescriptor.from_json(body))
        except InvalidDescriptor as exc:
            return JSONResponse(
                status_code=400,
                content={"error": "invalid-descriptor",
                         "codes": list(exc.report.codes)},
            )
        except DuplicateId as exc:
            return JSONResponse(
                status_code=409, content={"error": "duplicate-id", "id": str(exc)}
            )
        except (KeyError, ValueError, TypeError) as exc:
            return JSONResponse(
                status_code=400, content={"error": "malformed-descriptor",
                                          "detail": str(exc)}
            )
        return {"registered": entry.descriptor.id, "status": entry.status.value}

    @app.delete("/components/{component_id}")
    async def deregister_component(component_id: str):
        try:
            affected = pool.deregister(component_id)
        except UnknownId:
            raise HTTPException(status_code=404, detail="unknown component")
        return {"deregistered": component_id, "affected_contracts": affected}

    @app.get("/components")
    async def query_components(query: Optional[str] = Query(default=None)):
        if query is None:
            return {
                "components": [
                    pool.entries[cid].snapshot() for cid in sorted(pool.entries)
                ]
            }
        try:
            q = SlotQuery.from_json(json.loads(query))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=f"bad query: {exc}")
        return {"components": [e.snapshot() for e in pool.query(q)]}

    @app.patch("/components/{component_id}/availability")
    async def update_availability(component_id: str, request: Request):
        body = await request.json()
        win = body.get("window")
        try:
            entry = pool.update_availability(
                component_id,
                window=None if win is None else (int(win[0]), int(win[1])),
                capacity=body.get("capacity"),
            )
        except UnknownId:
            raise HTTPException(status_code=404, detail="unknown component")
        except CapacityBelowAllocated as exc:
            return JSONResponse(
                status_code=409,
                content={"error": "capacity-below-allocated", "detail": str(exc)},
            )
        return entry.snapshot()

    @app.post("/components/{component_id}/heartbeat")
    async def heartbeat(component_id: str):
        if component_id not in pool.entries:
            raise HTTPException(status_code=404, detail="unknown component")
        log.append("Heartbeat", {"id": component_id})
        return {"ok": True}

    @app.post("/systems")
    async def submit_system(request: Request):
        body = await request.json()
        try:
            if "teleological" in body:
                spec = translate_teleological(
                    TeleologicalSpec.from_json(body["teleological"]), plans
                )
            else:
                spec = blueprint_from_json(body.get("blueprint", body))
        except (BlueprintSyntaxError, UnknownGoal, BindingError,
                KeyError, ValueError, TypeError) as exc:
            return JSONResponse(
                status_code=400, content={"error": "invalid-blueprint",
                                          "detail": str(exc)}
            )
        try:
            outcome = agent.procure_system(spec)
        except InvalidBlueprint as exc:
            return JSONResponse(
                status_code=400,
                content={"error": "invalid-blueprint",
                         "codes": list(exc.report.codes)},
            )
        if isinstance(outcome, InsufficiencyEscalation):
            return JSONResponse(
                status_code=409,
                content={
                    "error": "insufficiency-escalation",
                    "system_id": outcome.system_id,
                    "failed_slots": list(outcome.failed_slots),
                    "reasons": dict(outcome.reasons),
                },
            )
        assert isinstance(outcome, SystemContractSet)
        return {
            "system_id": outcome.system_id,
            "total_price": outcome.total_price,
            "contracts": {
                slot: c.snapshot() for slot, c in sorted(outcome.contracts.items())
            },
        }

    @app.get("/systems/{system_id}")
    async def system_status(system_id: str):
        contracts = book.for_system(system_id)
        if not contracts:
            raise HTTPException(status_code=404, detail="unknown system")
        return {
            "system_id": system_id,
            "contracts": {
                c.slot_id: c.snapshot()
                for c in sorted(contracts, key=lambda c: c.contract_id)
            },
        }

    return app
