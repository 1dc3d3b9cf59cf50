import { describe, expect, it } from "vitest";

import {
  InboundMessage,
  OutboundMessage,
  ProtocolViolation,
  decodeInbound,
  encodeOutbound,
  quantizePrice,
} from "../src/protocol.js";

const OFFER = {
  type: "task_offer",
  task_id: "t1",
  description: "report the queue at i3",
  input: { intersection: "i3" },
  offered_price: 2.0,
  deadline: 10_000,
  sla: { max_latency: 10_000, min_quality: 0.5 },
  countdown_start: 0,
};

describe("inbound schema", () => {
  it("accepts a gateway task offer", () => {
    expect(decodeInbound(JSON.stringify(OFFER))?.type).toBe("task_offer");
  });

  it("accepts verdicts and notices", () => {
    const verdict = {
      type: "payment_verdict",
      task_id: "t1",
      paid: false,
      amount: 0,
      reason: "after-deadline",
    };
    const notice = {
      type: "sla_violation_notice",
      task_id: "t1",
      reason: "after-deadline",
    };
    expect(InboundMessage.safeParse(verdict).success).toBe(true);
    expect(InboundMessage.safeParse(notice).success).toBe(true);
  });

  it("returns null for junk, not an exception", () => {
    expect(decodeInbound("{nope")).toBeNull();
    expect(decodeInbound(JSON.stringify({ type: "mystery" }))).toBeNull();
    expect(
      decodeInbound(JSON.stringify({ ...OFFER, offered_price: -1 })),
    ).toBeNull();
  });
});

describe("outbound schema", () => {
  it("encodes every message kind", () => {
    const frames = [
      { type: "heartbeat", worker_id: "w1", ts: 0 },
      {
        type: "offer_response",
        task_id: "t1",
        worker_id: "w1",
        ts: 0,
        response: { accept: true },
      },
      {
        type: "offer_response",
        task_id: "t1",
        worker_id: "w1",
        ts: 5,
        response: { counter: { price: 6.5, quality: 0.9 } },
      },
      {
        type: "task_result",
        task_id: "t1",
        worker_id: "w1",
        ts: 900,
        payload: { answer: 0.25 },
        quality: 0.8,
      },
      { type: "goal", worker_id: "w1", ts: 0, metric: "transit-time", weight: -1 },
    ] as const;
    for (const frame of frames) {
      const parsed = JSON.parse(encodeOutbound(frame));
      expect(OutboundMessage.safeParse(parsed).success).toBe(true);
    }
  });

  it("refuses unknown fields — the schema is closed", () => {
    const smuggled = {
      type: "heartbeat",
      worker_id: "w1",
      ts: 0,
      paid: true,
    } as never;
    expect(() => encodeOutbound(smuggled)).toThrow(ProtocolViolation);
  });

  it("refuses out-of-range values", () => {
    const bad = {
      type: "task_result",
      task_id: "t1",
      worker_id: "w1",
      ts: 0,
      payload: null,
      quality: 1.5,
    } as never;
    expect(() => encodeOutbound(bad)).toThrow(ProtocolViolation);
  });
});

describe("price grain", () => {
  it("keeps grain multiples verbatim", () => {
    expect(quantizePrice(6.5, 0.5)).toBe(6.5);
  });

  it("rounds partial steps up — the worker is selling", () => {
    expect(quantizePrice(6.3, 0.5)).toBe(6.5);
    expect(quantizePrice(6.01, 0.5)).toBe(6.5);
    expect(quantizePrice(0.2, 0.25)).toBe(0.25);
  });

  it("passes through when no grain is set", () => {
    expect(quantizePrice(1.234, 0)).toBe(1.234);
  });
});
