// Gateway wire schema. Every message the console can emit is validated
// against `OutboundMessage` before it reaches the socket; anything that
// fails validation is a bug and is never sent.

import { z } from "zod";

export type JsonValue =
  | null
  | boolean
  | number
  | string
  | JsonValue[]
  | { [key: string]: JsonValue };

export const JsonValueSchema: z.ZodType<JsonValue> = z.lazy(() =>
  z.union([
    z.null(),
    z.boolean(),
    z.number(),
    z.string(),
    z.array(JsonValueSchema),
    z.record(JsonValueSchema),
  ]),
);

// -- server -> console ------------------------------------------------------

export const TaskOfferSchema = z
  .object({
    type: z.literal("task_offer"),
    task_id: z.string().min(1),
    description: z.string(),
    input: JsonValueSchema,
    offered_price: z.number().positive(),
    deadline: z.number().int(),
    sla: z
      .object({
        max_latency: z.number().int().nonnegative(),
        min_quality: z.number().min(0).max(1),
      })
      .strict(),
    countdown_start: z.number().int(),
  })
  .strict();

export const PaymentVerdictSchema = z
  .object({
    type: z.literal("payment_verdict"),
    task_id: z.string().min(1),
    paid: z.boolean(),
    amount: z.number().nonnegative(),
    reason: z.enum(["on-time", "after-deadline", "quality-rejected"]),
  })
  .strict();

export const SlaViolationNoticeSchema = z
  .object({
    type: z.literal("sla_violation_notice"),
    task_id: z.string().min(1),
    reason: z.enum(["after-deadline", "quality-rejected"]),
  })
  .strict();

export const ServerErrorSchema = z
  .object({
    type: z.literal("error"),
    code: z.string().min(1),
    task_id: z.string().optional(),
    detail: z.string().optional(),
  })
  .strict();

export const InboundMessage = z.discriminatedUnion("type", [
  TaskOfferSchema,
  PaymentVerdictSchema,
  SlaViolationNoticeSchema,
  ServerErrorSchema,
]);

export type TaskOffer = z.infer<typeof TaskOfferSchema>;
export type PaymentVerdict = z.infer<typeof PaymentVerdictSchema>;
export type SlaViolationNotice = z.infer<typeof SlaViolationNoticeSchema>;
export type ServerError = z.infer<typeof ServerErrorSchema>;
export type Inbound = z.infer<typeof InboundMessage>;

// -- console -> server ------------------------------------------------------

export const HeartbeatSchema = z
  .object({
    type: z.literal("heartbeat"),
    worker_id: z.string().min(1),
    ts: z.number().int().nonnegative(),
  })
  .strict();

export const OfferResponseSchema = z
  .object({
    type: z.literal("offer_response"),
    task_id: z.string().min(1),
    worker_id: z.string().min(1),
    ts: z.number().int().nonnegative(),
    response: z.union([
      z.object({ accept: z.literal(true) }).strict(),
      z.object({ decline: z.literal(true) }).strict(),
      z
        .object({
          counter: z
            .object({
              price: z.number().positive(),
              quality: z.number().min(0).max(1),
            })
            .strict(),
        })
        .strict(),
    ]),
  })
  .strict();

export const TaskResultSchema = z
  .object({
    type: z.literal("task_result"),
    task_id: z.string().min(1),
    worker_id: z.string().min(1),
    ts: z.number().int().nonnegative(),
    payload: JsonValueSchema,
    quality: z.number().min(0).max(1),
  })
  .strict();

export const GoalSchema = z
  .object({
    type: z.literal("goal"),
    worker_id: z.string().min(1),
    ts: z.number().int().nonnegative(),
    metric: z.string().min(1),
    weight: z.number(),
    tier: z.number().int().nonnegative().optional(),
  })
  .strict();

export const OutboundMessage = z.discriminatedUnion("type", [
  HeartbeatSchema,
  OfferResponseSchema,
  TaskResultSchema,
  GoalSchema,
]);

export type Outbound = z.infer<typeof OutboundMessage>;

export class ProtocolViolation extends Error {
  constructor(detail: string) {
    super(`refusing to send off-schema message: ${detail}`);
    this.name = "ProtocolViolation";
  }
}

/** Validate an outbound message and serialize it for the wire. */
export function encodeOutbound(msg: Outbound): string {
  const checked = OutboundMessage.safeParse(msg);
  if (!checked.success) {
    throw new ProtocolViolation(checked.error.message);
  }
  return JSON.stringify(checked.data);
}

/** Parse one inbound frame; null for frames the console does not model. */
export function decodeInbound(raw: string): Inbound | null {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    return null;
  }
  const checked = InboundMessage.safeParse(parsed);
  return checked.success ? checked.data : null;
}

/** Snap a counter-offer price to the negotiation grain, away from zero
 * (the worker is the seller, so partial steps round up). */
export function quantizePrice(price: number, grain: number): number {
  if (grain <= 0) return price;
  const steps = Math.ceil(price / grain - 1e-9);
  return Number((steps * grain).toFixed(9));
}
