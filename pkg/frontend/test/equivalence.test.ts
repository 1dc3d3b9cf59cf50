// A scripted console session must leave the very same orchestrator
// event log as a simulated worker doing the same thing. The backend
// driver prints the fixture (the offer plus the worker's drawn
// response and submission), this test drives the console UI state
// machine with those inputs, and the driver then replays the captured
// frames through the real gateway transport and diffs the two logs
// byte for byte.

import { spawnSync } from "node:child_process";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { WorkerConsole } from "../src/console.js";

const DRIVER = fileURLToPath(
  new URL("../scripts/log_equivalence.py", import.meta.url),
);

interface SessionFixture {
  offer: { type: string; task_id: string; deadline: number };
  outcome: { kind: string };
  payload: unknown;
  submit_ts: number;
  quality: number;
}

function runDriver(mode: "session" | "check", input?: string) {
  const result = spawnSync("python3", [DRIVER, mode], {
    input,
    encoding: "utf-8",
    timeout: 60_000,
  });
  if (result.error) throw result.error;
  return result;
}

describe("log equivalence with a simulated worker", () => {
  it("scripted console frames reproduce the simulated event log", () => {
    const session = runDriver("session");
    expect(session.status).toBe(0);
    const fixture = JSON.parse(session.stdout) as SessionFixture;
    expect(fixture.outcome.kind).toBe("accepted");

    const frames: string[] = [];
    const ui = new WorkerConsole((frame) => frames.push(frame), {
      workerId: "w1",
    });
    ui.onOpen(0);
    ui.receive(JSON.stringify(fixture.offer), 0);
    expect(ui.view(0).inbox.length).toBe(1);
    expect(ui.accept(fixture.offer.task_id, 0)).toBe(true);
    const sent = ui.submitResult(
      fixture.offer.task_id,
      fixture.payload as never,
      fixture.quality,
      fixture.submit_ts,
    );
    expect(sent).toEqual({ sent: true });

    const check = runDriver("check", frames.join("\n") + "\n");
    expect(check.stderr).toBe("");
    expect(check.stdout.trim()).toBe("MATCH");
    expect(check.status).toBe(0);
  });
});
