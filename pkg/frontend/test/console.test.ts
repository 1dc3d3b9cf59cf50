import { describe, expect, it } from "vitest";

import { WorkerConsole } from "../src/console.js";
import { OutboundMessage } from "../src/protocol.js";

function rig(options: { grain?: number; doNotDisturb?: boolean } = {}) {
  const frames: string[] = [];
  const session = new WorkerConsole((frame) => frames.push(frame), {
    workerId: "w1",
    ...options,
  });
  return { session, frames };
}

function offerJson(overrides: Record<string, unknown> = {}): string {
  return JSON.stringify({
    type: "task_offer",
    task_id: "t1",
    description: "confirm the sighting",
    input: { frame: "f-1" },
    offered_price: 3.0,
    deadline: 10_000,
    sla: { max_latency: 10_000, min_quality: 0.6 },
    countdown_start: 0,
    ...overrides,
  });
}

function last(frames: string[]): Record<string, unknown> {
  return JSON.parse(frames[frames.length - 1]!);
}

describe("session lifecycle", () => {
  it("identifies itself on open with a heartbeat", () => {
    const { session, frames } = rig();
    session.onOpen(0);
    expect(last(frames)).toEqual({ type: "heartbeat", worker_id: "w1", ts: 0 });
    expect(session.view(0).connection).toBe("open");
  });

  it("marks the session lost on close and resumes on rebind", () => {
    const { session } = rig();
    session.onOpen(0);
    session.receive(offerJson(), 0);
    session.onClose();
    expect(session.view(0).connection).toBe("lost");
    const after: string[] = [];
    session.rebind((frame) => after.push(frame));
    session.onOpen(50);
    expect(session.view(50).inbox.length).toBe(1); // offers survive reconnect
    expect(after.length).toBe(1);
  });
});

describe("offer cards", () => {
  it("shows a pending card for a live offer", () => {
    const { session } = rig();
    session.receive(offerJson(), 0);
    const view = session.view(4_000);
    expect(view.inbox.length).toBe(1);
    expect(view.inbox[0]!.offer.offered_price).toBe(3.0);
  });

  it("accept sends offer_response and activates the task", () => {
    const { session, frames } = rig();
    session.receive(offerJson(), 0);
    expect(session.accept("t1", 100)).toBe(true);
    expect(last(frames)).toEqual({
      type: "offer_response",
      task_id: "t1",
      worker_id: "w1",
      ts: 100,
      response: { accept: true },
    });
    expect(session.view(100).active?.offer.task_id).toBe("t1");
  });

  it("counter price snaps to the grain and goes out verbatim", () => {
    const { session, frames } = rig({ grain: 0.5 });
    session.receive(offerJson(), 0);
    session.counter("t1", 6.5, 0.9, 100);
    const sent = last(frames) as { response: { counter: { price: number } } };
    expect(sent.response.counter.price).toBe(6.5);
  });

  it("do-not-disturb shows no card and auto-declines", () => {
    const { session, frames } = rig({ doNotDisturb: true });
    session.receive(offerJson(), 0);
    expect(session.view(0).inbox.length).toBe(0);
    expect(last(frames)).toMatchObject({
      type: "offer_response",
      task_id: "t1",
      response: { decline: true },
    });
  });

  it("a card can only be answered once", () => {
    const { session, frames } = rig();
    session.receive(offerJson(), 0);
    session.decline("t1", 100);
    expect(session.accept("t1", 200)).toBe(false);
    expect(frames.length).toBe(1);
  });

  it("duplicate offers for the same task are ignored", () => {
    const { session } = rig();
    session.receive(offerJson(), 0);
    session.receive(offerJson(), 0);
    expect(session.view(0).inbox.length).toBe(1);
  });
});

describe("expiry lockout", () => {
  it("an expired offer leaves the inbox and rejects actions", () => {
    const { session, frames } = rig();
    session.receive(offerJson(), 0);
    expect(session.view(10_001).inbox.length).toBe(0);
    expect(session.accept("t1", 10_001)).toBe(false);
    expect(session.counter("t1", 5.0, 0.9, 10_001)).toBe(false);
    expect(frames.length).toBe(0);
  });

  it("cannot produce a task_result after the deadline", () => {
    const { session, frames } = rig();
    session.receive(offerJson(), 0);
    session.accept("t1", 100);
    const refused = session.submitResult("t1", { answer: 1 }, 0.9, 10_001);
    expect(refused).toEqual({ sent: false, refusal: "deadline-passed" });
    expect(frames.length).toBe(1); // only the accept went out
  });

  it("the deadline itself is still submittable", () => {
    const { session } = rig();
    session.receive(offerJson(), 0);
    session.accept("t1", 100);
    const sent = session.submitResult("t1", { answer: 1 }, 0.9, 10_000);
    expect(sent).toEqual({ sent: true });
  });
});

describe("result submission", () => {
  it("refuses tasks that were never accepted", () => {
    const { session, frames } = rig();
    session.receive(offerJson(), 0);
    expect(session.submitResult("t1", null, 0.9, 100)).toEqual({
      sent: false,
      refusal: "not-accepted",
    });
    expect(session.submitResult("ghost", null, 0.9, 100)).toEqual({
      sent: false,
      refusal: "no-such-task",
    });
    expect(frames.length).toBe(0);
  });

  it("inline-validates the form: bad quality never reaches the wire", () => {
    const { session, frames } = rig();
    session.receive(offerJson(), 0);
    session.accept("t1", 100);
    expect(session.submitResult("t1", { answer: 1 }, 1.5, 200)).toEqual({
      sent: false,
      refusal: "bad-payload",
    });
    expect(frames.length).toBe(1);
  });

  it("a submitted task cannot be submitted twice", () => {
    const { session, frames } = rig();
    session.receive(offerJson(), 0);
    session.accept("t1", 100);
    session.submitResult("t1", { answer: 1 }, 0.9, 200);
    expect(session.submitResult("t1", { answer: 2 }, 0.9, 300)).toEqual({
      sent: false,
      refusal: "not-accepted",
    });
    expect(frames.length).toBe(2);
  });
});

describe("verdicts and earnings", () => {
  function settle(session: WorkerConsole, verdict: Record<string, unknown>) {
    session.receive(JSON.stringify(verdict), 500);
  }

  it("a paid verdict credits earnings and clears the active task", () => {
    const { session } = rig();
    session.receive(offerJson(), 0);
    session.accept("t1", 100);
    session.submitResult("t1", { answer: 1 }, 0.9, 200);
    settle(session, {
      type: "payment_verdict",
      task_id: "t1",
      paid: true,
      amount: 3.0,
      reason: "on-time",
    });
    const view = session.view(500);
    expect(view.earnings).toBe(3.0);
    expect(view.active).toBeNull();
    expect(view.verdicts[0]!.paid).toBe(true);
  });

  it("an unpaid after-deadline verdict and its notice are both shown", () => {
    const { session } = rig();
    session.receive(offerJson(), 0);
    session.accept("t1", 100);
    settle(session, {
      type: "payment_verdict",
      task_id: "t1",
      paid: false,
      amount: 0,
      reason: "after-deadline",
    });
    settle(session, {
      type: "sla_violation_notice",
      task_id: "t1",
      reason: "after-deadline",
    });
    const view = session.view(500);
    expect(view.earnings).toBe(0);
    expect(view.verdicts[0]!.reason).toBe("after-deadline");
    expect(view.notices[0]!.reason).toBe("after-deadline");
  });

  it("server errors are surfaced, off-schema frames are ignored", () => {
    const { session } = rig();
    session.receive(JSON.stringify({ type: "error", code: "unknown-task" }), 0);
    session.receive("{broken", 0);
    session.receive(JSON.stringify({ type: "mystery" }), 0);
    expect(session.view(0).errors.length).toBe(1);
  });
});

describe("participant goals", () => {
  it("sends a goal message and refuses an empty metric", () => {
    const { session, frames } = rig();
    expect(session.submitGoal("transit-time", -1, 100, 0)).toBe(true);
    expect(last(frames)).toEqual({
      type: "goal",
      worker_id: "w1",
      ts: 100,
      metric: "transit-time",
      weight: -1,
      tier: 0,
    });
    expect(session.submitGoal("", 1, 100)).toBe(false);
    expect(frames.length).toBe(1);
  });
});

describe("schema conformance under random driving", () => {
  // Deterministic LCG so failures reproduce.
  function lcg(seed: number) {
    let state = seed >>> 0;
    return () => {
      state = (state * 1664525 + 1013904223) >>> 0;
      return state / 2 ** 32;
    };
  }

  it("every frame the console ever emits validates", () => {
    for (let run = 0; run < 200; run++) {
      const rand = lcg(run + 1);
      const { session, frames } = rig({
        grain: 0.25,
        doNotDisturb: rand() < 0.2,
      });
      session.onOpen(0);
      let now = 0;
      for (let step = 0; step < 30; step++) {
        now += Math.floor(rand() * 3000);
        const taskId = `t${Math.floor(rand() * 5)}`;
        const roll = rand();
        if (roll < 0.3) {
          session.receive(
            offerJson({ task_id: taskId, deadline: now + 1 + Math.floor(rand() * 8000) }),
            now,
          );
        } else if (roll < 0.45) {
          session.accept(taskId, now);
        } else if (roll < 0.55) {
          session.decline(taskId, now);
        } else if (roll < 0.65) {
          session.counter(taskId, rand() * 10 + 0.01, rand(), now);
        } else if (roll < 0.85) {
          session.submitResult(taskId, { answer: rand() }, rand(), now);
        } else if (roll < 0.95) {
          session.heartbeat(now);
        } else {
          session.submitGoal("queue-length", rand() * 2 - 1, now);
        }
      }
      for (const frame of frames) {
        expect(OutboundMessage.safeParse(JSON.parse(frame)).success).toBe(true);
      }
    }
  });
});
