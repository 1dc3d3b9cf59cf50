"""Operator command line.

Config precedence: explicit flags beat ``CLIC_*`` environment
variables, which beat the ``--config`` file, which beats built-in
defaults.  Exit codes: 0 ok, 2 validation error, 3 insufficiency
escalation, 4 I/O error.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ESCALATION = 3
EXIT_IO = 4


def _load_config_file(ctx: click.Context, param: click.Parameter, value):
    if value is None:
        return None
    try:
        with open(value, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        _fail(f"cannot read config: {exc}")
        raise click.exceptions.Exit(EXIT_IO)
    except json.JSONDecodeError as exc:
        _fail(f"bad config file: {exc}")
        raise click.exceptions.Exit(EXIT_VALIDATION)
    # Nested sections become default maps for the matching subcommands.
    ctx.default_map = data
    return value


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)


def _read_json(path: str):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@click.group(context_settings={"auto_envvar_prefix": "CLIC"})
@click.option("--config", type=click.Path(), callback=_load_config_file,
              expose_value=False, is_eager=True,
              help="JSON config file with per-command default sections.")
def main() -> None:
    """Composable human-machine service systems on demand."""


# -- registry ---------------------------------------------------------------

@main.group()
def registry() -> None:
    """Component registry service."""


@registry.command("serve")
@click.option("--port", default=8400, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--log", "log_file", type=click.Path(), default=None,
              help="JSONL event log path.")
def registry_serve(port: int, host: str, log_file: str | None) -> None:
    """Serve the registry HTTP API."""
    import uvicorn

    from .service import create_app

    try:
        app = create_app(log_path=log_file)
    except OSError as exc:
        _fail(f"cannot open log: {exc}")
        sys.exit(EXIT_IO)
    uvicorn.run(app, host=host, port=port, log_level="warning")


# -- component --------------------------------------------------------------

@main.group()
def component() -> None:
    """Component-side operations."""


@component.command("run")
@click.option("--descriptor", required=True, type=click.Path())
@click.option("--registry", "registry_addr", required=True,
              help="Registry base URL, e.g. http://127.0.0.1:8400")
@click.option("--heartbeats", default=0, show_default=True,
              help="Number of heartbeats to send after registering.")
@click.option("--heartbeat-interval", default=1.0, show_default=True)
def component_run(descriptor: str, registry_addr: str, heartbeats: int,
                  heartbeat_interval: float) -> None:
    """Register a component and keep it heartbeating."""
    import time

    import httpx

    try:
        body = _read_json(descriptor)
    except OSError as exc:
        _fail(f"cannot read descriptor: {exc}")
        sys.exit(EXIT_IO)
    except json.JSONDecodeError as exc:
        _fail(f"descriptor is not valid JSON: {exc}")
        sys.exit(EXIT_VALIDATION)
    try:
        resp = httpx.post(f"{registry_addr}/components", json=body, timeout=10.0)
    except httpx.HTTPError as exc:
        _fail(f"registry unreachable: {exc}")
        sys.exit(EXIT_IO)
    if resp.status_code >= 400:
        _fail(f"registration rejected: {resp.text}")
        sys.exit(EXIT_VALIDATION)
    click.echo(json.dumps(resp.json()))
    cid = body.get("id")
    for _ in range(heartbeats):
        time.sleep(heartbeat_interval)
        try:
            httpx.post(f"{registry_addr}/components/{cid}/heartbeat", timeout=10.0)
        except httpx.HTTPError as exc:
            _fail(f"heartbeat failed: {exc}")
            sys.exit(EXIT_IO)
    sys.exit(EXIT_OK)


# -- submit / status --------------------------------------------------------

@main.command("submit")
@click.option("--blueprint", "blueprint_file", type=click.Path(), default=None)
@click.option("--teleological", "teleological_file", type=click.Path(), default=None)
@click.option("--plans", "plans_file", type=click.Path(), default=None,
              help="Plan library for teleological submissions.")
@click.option("--registry", "registry_addr", required=True)
def submit(blueprint_file: str | None, teleological_file: str | None,
           plans_file: str | None, registry_addr: str) -> None:
    """Submit a blueprint or a goal statement for procurement."""
    import httpx

    if (blueprint_file is None) == (teleological_file is None):
        _fail("exactly one of --blueprint or --teleological is required")
        sys.exit(EXIT_VALIDATION)
    try:
        if blueprint_file is not None:
            payload = {"blueprint": _read_json(blueprint_file)}
        else:
            spec = _read_json(teleological_file)
            if plans_file is not None:
                # Translate locally against the given library, then
                # submit the concrete blueprint.
                from .blueprint import (
                    BindingError,
                    PlanLibrary,
                    TeleologicalSpec,
                    UnknownGoal,
                    translate_teleological,
                )

                try:
                    bp = translate_teleological(
                        TeleologicalSpec.from_json(spec), PlanLibrary.load(plans_file)
                    )
                except (UnknownGoal, BindingError, KeyError, ValueError) as exc:
                    _fail(f"cannot translate goal statement: {exc}")
                    sys.exit(EXIT_VALIDATION)
                payload = {"blueprint": bp.to_json()}
            else:
                payload = {"teleological": spec}
    except OSError as exc:
        _fail(f"cannot read input: {exc}")
        sys.exit(EXIT_IO)
    except json.JSONDecodeError as exc:
        _fail(f"input is not valid JSON: {exc}")
        sys.exit(EXIT_VALIDATION)
    try:
        resp = httpx.post(f"{registry_addr}/systems", json=payload, timeout=30.0)
    except httpx.HTTPError as exc:
        _fail(f"registry unreachable: {exc}")
        sys.exit(EXIT_IO)
    if resp.status_code == 409:
        click.echo(resp.text)
        sys.exit(EXIT_ESCALATION)
    if resp.status_code >= 400:
        _fail(f"submission rejected: {resp.text}")
        sys.exit(EXIT_VALIDATION)
    click.echo(json.dumps(resp.json(), indent=2))
    sys.exit(EXIT_OK)


@main.command("status")
@click.option("--system", "system_id", required=True)
@click.option("--registry", "registry_addr", required=True)
def status(system_id: str, registry_addr: str) -> None:
    """Show the contract set of a submitted system."""
    import httpx

    try:
        resp = httpx.get(f"{registry_addr}/systems/{system_id}", timeout=10.0)
    except httpx.HTTPError as exc:
        _fail(f"registry unreachable: {exc}")
        sys.exit(EXIT_IO)
    if resp.status_code == 404:
        _fail(f"unknown system {system_id}")
        sys.exit(EXIT_VALIDATION)
    click.echo(json.dumps(resp.json(), indent=2))
    sys.exit(EXIT_OK)


# -- simulation -------------------------------------------------------------

@main.group()
def sim() -> None:
    """Deterministic scenario simulation."""


@sim.command("run")
@click.option("--scenario", "scenario", type=click.Path(), default=None,
              help="Scenario config JSON; defaults to the congested fixture.")
@click.option("--seed", default=1, show_default=True)
@click.option("--out", "out", type=click.Path(), default=None,
              help="Event log output path (JSONL).")
def sim_run(scenario: str | None, seed: int, out: str | None) -> None:
    """Run the traffic scenario and print its metrics."""
    from .scenario import ScenarioConfig, congested_config, run_scenario

    if scenario is None:
        cfg = congested_config()
    else:
        try:
            cfg = ScenarioConfig.from_json(_read_json(scenario))
        except OSError as exc:
            _fail(f"cannot read scenario: {exc}")
            sys.exit(EXIT_IO)
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            _fail(f"bad scenario config: {exc}")
            sys.exit(EXIT_VALIDATION)
    try:
        result = run_scenario(cfg, seed, log_path=out)
    except OSError as exc:
        _fail(f"cannot write log: {exc}")
        sys.exit(EXIT_IO)
    click.echo(json.dumps({
        "seed": result.seed,
        "metrics": result.metrics,
        "state_hash": result.state_hash,
        "channels_ok": result.channels_ok,
        "swaps": [s.to_json() for s in result.swaps],
        "escalations": result.escalations,
    }, indent=2))
    sys.exit(EXIT_OK)


# -- replay -----------------------------------------------------------------

@main.command("replay")
@click.option("--log", "log_file", required=True, type=click.Path())
def replay_cmd(log_file: str) -> None:
    """Rebuild state from an event log and verify its hash."""
    from .events import CorruptLog, SeqGap
    from .replay import ReplayDivergence, replay_file

    try:
        result = replay_file(Path(log_file), strict=True)
    except FileNotFoundError as exc:
        _fail(str(exc))
        sys.exit(EXIT_IO)
    except (CorruptLog, SeqGap) as exc:
        _fail(f"log invalid: {exc}")
        sys.exit(EXIT_VALIDATION)
    except ReplayDivergence as exc:
        _fail(str(exc))
        sys.exit(EXIT_VALIDATION)
    click.echo(json.dumps({
        "events": result.events,
        "state_hash": result.state_hash,
        "recorded_hash": result.recorded_hash,
        "match": result.match,
    }, indent=2))
    sys.exit(EXIT_OK)


# -- gateway ----------------------------------------------------------------

@main.group()
def gateway() -> None:
    """Human task gateway."""


@gateway.command("serve")
@click.option("--port", default=8500, show_default=True, help="TCP ndjson port.")
@click.option("--ws-port", default=None, type=int, help="WebSocket port for /ws.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--script", "script_file", type=click.Path(), default=None,
              help="Task offers to push to connecting workers.")
@click.option("--log", "log_file", type=click.Path(), default=None)
def gateway_serve(port: int, ws_port: int | None, host: str,
                  script_file: str | None, log_file: str | None) -> None:
    """Serve the gateway protocol over TCP and WebSocket."""
    from .events import EventLog
    from .gateway import Gateway
    from .gateway_server import GatewayServer

    script = None
    if script_file is not None:
        try:
            script = _read_json(script_file)
        except OSError as exc:
            _fail(f"cannot read script: {exc}")
            sys.exit(EXIT_IO)
        except json.JSONDecodeError as exc:
            _fail(f"bad script file: {exc}")
            sys.exit(EXIT_VALIDATION)
        if isinstance(script, dict):
            script = script.get("offers", [])
    try:
        log = EventLog(path=Path(log_file)) if log_file else EventLog()
    except OSError as exc:
        _fail(f"cannot open log: {exc}")
        sys.exit(EXIT_IO)
    server = GatewayServer(Gateway(log), script=script)
    try:
        asyncio.run(server.serve_forever(host, port, ws_port))
    except KeyboardInterrupt:
        pass
    finally:
        log.close()
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
