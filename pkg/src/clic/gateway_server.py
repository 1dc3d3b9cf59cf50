"""Network transports for the gateway: newline-delimited JSON over TCP
for programmatic clients and the identical schema over a WebSocket at
``/ws`` for the browser console.

Both transports feed the same `Gateway` core and, in deterministic
mode, take logical timestamps from the messages themselves — which is
what lets a scripted console session and a simulated worker leave
byte-identical event logs.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

from .events import canonical_json
from .gateway import Gateway, TaskOffer

__all__ = ["GatewayServer", "offer_from_json"]


def offer_from_json(obj: Mapping[str, Any]) -> TaskOffer:
    sla = obj.get("sla", {})
    return TaskOffer(
        task_id=obj["task_id"],
        description=obj.get("description", ""),
        input_payload=obj.get("input"),
        offered_price=float(obj["offered_price"]),
        deadline=int(obj["deadline"]),
        max_latency=int(sla.get("max_latency", 0)),
        min_quality=float(sla.get("min_quality", 0.0)),
        countdown_start=int(obj.get("countdown_start", 0)),
        contract_id=obj.get("contract_id"),
    )


@dataclass
class _Session:
    worker_id: Optional[str] = None
    offers_sent: bool = False


class GatewayServer:
    """Session handling shared by the TCP and WebSocket endpoints.

    ``script`` is a list of task-offer JSON objects pushed to a worker
    as soon as it identifies itself (first message carrying a
    ``worker_id``).  In deterministic mode message ``ts`` fields are
    authoritative; otherwise wall-clock ms are stamped on receipt.
    """

    def __init__(
        self,
        gateway: Gateway,
        script: Optional[Sequence[Mapping[str, Any]]] = None,
        deterministic: bool = True,
    ):
        self.gateway = gateway
        self.script = list(script or [])
        self.deterministic = deterministic
        self._started = time.monotonic()

    def open_session(self) -> _Session:
        return _Session()

    def _now_ms(self) -> int:
        return int((time.monotonic() - self._started) * 1000)

    def handle(self, session: _Session, msg: Mapping[str, Any]) -> List[dict]:
        """One inbound message -> ordered replies."""
        if not isinstance(msg, Mapping) or "type" not in msg:
            return [{"type": "error", "code": "unknown-type"}]
        replies: List[dict] = []
        if session.worker_id is None:
            worker_id = msg.get("worker_id")
            if not worker_id:
                return [{"type": "error", "code": "no-worker-id"}]
            session.worker_id = str(worker_id)
        if not session.offers_sent:
            session.offers_sent = True
            for obj in self.script:
                offer = offer_from_json(obj)
                self.gateway.open_task(session.worker_id, offer)
                replies.append(offer.to_json())
        ts = int(msg["ts"]) if self.deterministic and "ts" in msg else (
            None if self.deterministic else self._now_ms()
        )
        replies.extend(self.gateway.handle_message(session.worker_id, dict(msg), ts=ts))
        return replies

    # -- TCP -----------------------------------------------------------

    async def handle_stream(self, reader: asyncio.StreamReader,
                            writer: asyncio.StreamWriter) -> None:
        session = self.open_session()
        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                line = line.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                except json.JSONDecodeError:
                    replies = [{"type": "error", "code": "bad-json"}]
                else:
                    replies = self.handle(session, msg)
                for reply in replies:
                    writer.write(canonical_json(reply).encode() + b"\n")
                await writer.drain()
        finally:
            writer.close()

    async def serve_tcp(self, host: str, port: int) -> asyncio.AbstractServer:
        return await asyncio.start_server(self.handle_stream, host, port)

    # -- WebSocket -----------------------------------------------------

    async def handle_ws(self, connection) -> None:
        request_path = getattr(getattr(connection, "request", None), "path", "/ws")
        if request_path.split("?")[0] != "/ws":
            await connection.close(code=1008, reason="unknown path")
            return
        session = self.open_session()
        async for raw in connection:
            try:
                msg = json.loads(raw)
            except json.JSONDecodeError:
                replies = [{"type": "error", "code": "bad-json"}]
            else:
                replies = self.handle(session, msg)
            for reply in replies:
                await connection.send(canonical_json(reply))

    async def serve_ws(self, host: str, port: int):
        import websockets

        return await websockets.serve(self.handle_ws, host, port)

    async def serve_forever(self, host: str, tcp_port: int,
                            ws_port: Optional[int] = None) -> None:
        tcp = await self.serve_tcp(host, tcp_port)
        ws = await self.serve_ws(host, ws_port) if ws_port is not None else None
        try:
            await asyncio.Event().wait()
        finally:
            tcp.close()
            await tcp.wait_closed()
            if ws is not None:
                ws.close()
                await ws.wait_closed()
