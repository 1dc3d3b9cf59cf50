// Session state machine behind the worker console. Transport-agnostic:
// the caller wires `receive` to socket frames and passes a `send`
// function; everything else — offer cards, countdown gating, verdict
// history, earnings — lives here so it can be tested without a DOM.
//
// Two invariants are enforced at this layer, not in the rendering:
// every outbound frame is schema-validated before it reaches the
// socket, and an expired or never-accepted offer can never produce a
// task_result (the server stays authoritative either way).

import { isExpired } from "./countdown.js";
import {
  GoalSchema,
  JsonValueSchema,
  decodeInbound,
  encodeOutbound,
  quantizePrice,
  type JsonValue,
  type Outbound,
  type PaymentVerdict,
  type ServerError,
  type SlaViolationNotice,
  type TaskOffer,
} from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "lost";

export type OfferStatus =
  | "pending"
  | "accepted"
  | "declined"
  | "countered"
  | "submitted";

export interface OfferCard {
  offer: TaskOffer;
  status: OfferStatus;
}

export type SubmitRefusal =
  | "no-such-task"
  | "not-accepted"
  | "deadline-passed"
  | "bad-payload";

export type SubmitResult =
  | { sent: true }
  | { sent: false; refusal: SubmitRefusal };

export interface SessionView {
  connection: ConnectionState;
  /** Pending cards only; responded/expired offers leave the inbox. */
  inbox: OfferCard[];
  /** The accepted task currently being worked, if any. */
  active: OfferCard | null;
  verdicts: PaymentVerdict[];
  notices: SlaViolationNotice[];
  errors: ServerError[];
  earnings: number;
}

export interface ConsoleOptions {
  workerId: string;
  /** Negotiation price grain for counter-offers. */
  grain?: number;
  doNotDisturb?: boolean;
}

export class WorkerConsole {
  readonly workerId: string;
  grain: number;
  doNotDisturb: boolean;

  private connection: ConnectionState = "connecting";
  private cards = new Map<string, OfferCard>();
  private activeTaskId: string | null = null;
  private verdicts: PaymentVerdict[] = [];
  private notices: SlaViolationNotice[] = [];
  private errors: ServerError[] = [];
  private earnings = 0;
  private send: (frame: string) => void;

  constructor(send: (frame: string) => void, options: ConsoleOptions) {
    this.send = send;
    this.workerId = options.workerId;
    this.grain = options.grain ?? 0.5;
    this.doNotDisturb = options.doNotDisturb ?? false;
  }

  // -- connection lifecycle ------------------------------------------

  /** Socket opened: identify so the gateway can route offers to us. */
  onOpen(now: number): void {
    this.connection = "open";
    this.emit({ type: "heartbeat", worker_id: this.workerId, ts: now });
  }

  onClose(): void {
    this.connection = "lost";
  }

  /** Rebind after a reconnect; pending state survives. */
  rebind(send: (frame: string) => void): void {
    this.send = send;
    this.connection = "connecting";
  }

  // -- inbound -------------------------------------------------------

  receive(raw: string, now: number): void {
    const msg = decodeInbound(raw);
    if (msg === null) return; // off-schema server frame: ignore, never echo
    switch (msg.type) {
      case "task_offer":
        this.onOffer(msg, now);
        return;
      case "payment_verdict":
        this.onVerdict(msg);
        return;
      case "sla_violation_notice":
        this.notices.push(msg);
        return;
      case "error":
        this.errors.push(msg);
        return;
    }
  }

  private onOffer(offer: TaskOffer, now: number): void {
    if (this.cards.has(offer.task_id)) return;
    if (this.doNotDisturb) {
      // No card is shown; the gateway hears a decline immediately.
      this.cards.set(offer.task_id, { offer, status: "declined" });
      this.respond(offer.task_id, { decline: true }, now);
      return;
    }
    this.cards.set(offer.task_id, { offer, status: "pending" });
  }

  private onVerdict(verdict: PaymentVerdict): void {
    this.verdicts.push(verdict);
    this.earnings += verdict.amount;
    const card = this.cards.get(verdict.task_id);
    if (card) card.status = "submitted";
    if (this.activeTaskId === verdict.task_id) this.activeTaskId = null;
  }

  // -- offer actions -------------------------------------------------

  accept(taskId: string, now: number): boolean {
    const card = this.actionable(taskId, now);
    if (card === null) return false;
    card.status = "accepted";
    this.activeTaskId = taskId;
    this.respond(taskId, { accept: true }, now);
    return true;
  }

  decline(taskId: string, now: number): boolean {
    const card = this.actionable(taskId, now);
    if (card === null) return false;
    card.status = "declined";
    this.respond(taskId, { decline: true }, now);
    return true;
  }

  counter(taskId: string, price: number, quality: number, now: number): boolean {
    const card = this.actionable(taskId, now);
    if (card === null) return false;
    if (!(price > 0) || quality < 0 || quality > 1) return false;
    card.status = "countered";
    this.respond(
      taskId,
      { counter: { price: quantizePrice(price, this.grain), quality } },
      now,
    );
    return true;
  }

  /** A card can be acted on only while pending and before its deadline. */
  private actionable(taskId: string, now: number): OfferCard | null {
    const card = this.cards.get(taskId);
    if (!card || card.status !== "pending") return null;
    if (isExpired(card.offer.deadline, now)) return null;
    return card;
  }

  private respond(
    taskId: string,
    response:
      | { accept: true }
      | { decline: true }
      | { counter: { price: number; quality: number } },
    now: number,
  ): void {
    this.emit({
      type: "offer_response",
      task_id: taskId,
      worker_id: this.workerId,
      ts: now,
      response,
    });
  }

  // -- task submission -----------------------------------------------

  submitResult(
    taskId: string,
    payload: JsonValue,
    quality: number,
    now: number,
  ): SubmitResult {
    const card = this.cards.get(taskId);
    if (!card) return { sent: false, refusal: "no-such-task" };
    if (card.status !== "accepted") return { sent: false, refusal: "not-accepted" };
    if (isExpired(card.offer.deadline, now)) {
      // Local lockout only; a forced send would still be judged
      // AfterDeadline by the server.
      return { sent: false, refusal: "deadline-passed" };
    }
    if (
      !JsonValueSchema.safeParse(payload).success ||
      !(quality >= 0 && quality <= 1)
    ) {
      return { sent: false, refusal: "bad-payload" };
    }
    card.status = "submitted";
    this.emit({
      type: "task_result",
      task_id: taskId,
      worker_id: this.workerId,
      ts: now,
      payload,
      quality,
    });
    return { sent: true };
  }

  // -- participant goals ---------------------------------------------

  submitGoal(metric: string, weight: number, now: number, tier?: number): boolean {
    const msg = {
      type: "goal" as const,
      worker_id: this.workerId,
      ts: now,
      metric,
      weight,
      ...(tier === undefined ? {} : { tier }),
    };
    if (!GoalSchema.safeParse(msg).success) return false;
    this.emit(msg);
    return true;
  }

  heartbeat(now: number): void {
    this.emit({ type: "heartbeat", worker_id: this.workerId, ts: now });
  }

  // -- view ----------------------------------------------------------

  view(now: number): SessionView {
    const inbox = [...this.cards.values()].filter(
      (c) => c.status === "pending" && !isExpired(c.offer.deadline, now),
    );
    const active =
      this.activeTaskId === null
        ? null
        : this.cards.get(this.activeTaskId) ?? null;
    return {
      connection: this.connection,
      inbox,
      active,
      verdicts: [...this.verdicts],
      notices: [...this.notices],
      errors: [...this.errors],
      earnings: this.earnings,
    };
  }

  private emit(msg: Outbound): void {
    this.send(encodeOutbound(msg));
  }
}
