"""Backend driver for the console log-equivalence test.

``session`` prints the fixture: the task offer (as the gateway would
push it over the socket) plus the response and submission a simulated
worker with the same seed would produce.  The console test drives the
UI state machine with those inputs and captures every frame it emits.

``check`` reads those captured frames from stdin, feeds them through
the real gateway transport handler, runs the equivalent fully simulated
worker session, and compares the two event logs byte for byte.
"""

import json
import random
import sys

from clic.events import EventLog, canonical_json
from clic.gateway import Gateway, SimulatedWorker, WorkerProfile
from clic.gateway_server import GatewayServer, offer_from_json
from clic.model import CapabilityPath

SEED = "7:w1"

OFFER = {
    "task_id": "t1",
    "description": "confirm the person sighting at i3",
    "input": {"frame": "frame-0041", "intersection": "i3"},
    "offered_price": 3.0,
    "deadline": 9_000,
    "sla": {"max_latency": 9_000, "min_quality": 0.6},
    "countdown_start": 0,
    "contract_id": "c0001",
}


def make_worker() -> SimulatedWorker:
    profile = WorkerProfile(
        worker_id="w1",
        capability=CapabilityPath.parse("sense.vision.recognize"),
        reservation_price=2.0,
        accept_probability=1.0,
        latency_range=(100, 1000),
        error_rate=0.0,
        posted_quality=0.9,
    )
    return SimulatedWorker(profile, random.Random(SEED))


def simulated_log() -> list:
    log = EventLog()
    gateway = Gateway(log=log)
    gateway.connect_worker(make_worker())
    gateway.run_simulated_task("w1", offer_from_json(OFFER))
    return [canonical_json(r.to_json()) for r in log.records]


def cmd_session() -> int:
    worker = make_worker()
    task = offer_from_json(OFFER)
    outcome = worker.respond(task)
    payload, ts, quality = worker.submission(task)
    print(json.dumps({
        "offer": task.to_json(),
        "outcome": outcome.to_json(),
        "payload": payload,
        "submit_ts": ts,
        "quality": quality,
    }))
    return 0


def cmd_check() -> int:
    frames = [json.loads(line) for line in sys.stdin if line.strip()]
    log = EventLog()
    server = GatewayServer(Gateway(log), script=[OFFER])
    session = server.open_session()
    for frame in frames:
        for reply in server.handle(session, frame):
            if reply.get("type") == "error":
                print(f"gateway rejected frame: {reply}")
                return 1
    scripted = [canonical_json(r.to_json()) for r in log.records]
    expected = simulated_log()
    if scripted == expected:
        print("MATCH")
        return 0
    print("MISMATCH")
    for a, b in zip(scripted, expected):
        if a != b:
            print(f"console:   {a}")
            print(f"simulated: {b}")
    if len(scripted) != len(expected):
        print(f"lengths differ: console {len(scripted)}, simulated {len(expected)}")
    return 1


def main() -> int:
    if len(sys.argv) != 2 or sys.argv[1] not in {"session", "check"}:
        print("usage: log_equivalence.py {session|check}", file=sys.stderr)
        return 2
    return cmd_session() if sys.argv[1] == "session" else cmd_check()


if __name__ == "__main__":
    sys.exit(main())
