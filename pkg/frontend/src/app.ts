// Thin DOM layer over WorkerConsole: one WebSocket, one ticker, full
// re-render on every change. All protocol and gating logic lives in
// console.ts; this file only draws the session view.

import { WorkerConsole } from "./console.js";
import { Ticker, formatRemaining, remainingMs } from "./countdown.js";
import type { JsonValue } from "./protocol.js";

const RECONNECT_DELAY_MS = 2000;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function mount(root: HTMLElement, url: string, workerId: string): void {
  let socket: WebSocket | null = null;
  const session = new WorkerConsole((frame) => socket?.send(frame), {
    workerId,
  });

  function connect(): void {
    socket = new WebSocket(url);
    socket.onopen = () => {
      session.onOpen(Date.now());
      render();
    };
    socket.onmessage = (ev) => {
      session.receive(String(ev.data), Date.now());
      render();
    };
    socket.onclose = () => {
      session.onClose();
      render();
      setTimeout(() => {
        session.rebind((frame) => socket?.send(frame));
        connect();
      }, RECONNECT_DELAY_MS);
    };
  }

  function render(): void {
    const now = Date.now();
    const view = session.view(now);
    root.replaceChildren();

    const bar = el("header", "statusbar");
    bar.append(
      el("span", `conn conn-${view.connection}`, view.connection),
      el("span", "earnings", `earned ${view.earnings.toFixed(2)}`),
    );
    const dnd = el("button", "dnd", session.doNotDisturb ? "do-not-disturb: on" : "do-not-disturb: off");
    dnd.onclick = () => {
      session.doNotDisturb = !session.doNotDisturb;
      render();
    };
    bar.append(dnd);
    root.append(bar);

    const inbox = el("section", "inbox");
    for (const card of view.inbox) {
      const offer = card.offer;
      const box = el("article", "offer");
      box.append(
        el("h3", "", offer.description || offer.task_id),
        el("p", "price", `pays ${offer.offered_price.toFixed(2)}`),
        el("p", "floor", `quality floor ${offer.sla.min_quality}`),
        el("p", "countdown", formatRemaining(remainingMs(offer.deadline, now))),
      );
      const accept = el("button", "", "accept");
      accept.onclick = () => {
        session.accept(offer.task_id, Date.now());
        render();
      };
      const decline = el("button", "", "decline");
      decline.onclick = () => {
        session.decline(offer.task_id, Date.now());
        render();
      };
      const counterPrice = el("input");
      counterPrice.type = "number";
      counterPrice.step = String(session.grain);
      counterPrice.placeholder = "counter price";
      const counter = el("button", "", "counter");
      counter.onclick = () => {
        const price = Number(counterPrice.value);
        session.counter(offer.task_id, price, offer.sla.min_quality, Date.now());
        render();
      };
      box.append(accept, decline, counterPrice, counter);
      inbox.append(box);
    }
    root.append(inbox);

    if (view.active) {
      const offer = view.active.offer;
      const work = el("section", "active");
      work.append(
        el("h3", "", `working: ${offer.description || offer.task_id}`),
        el("pre", "input", JSON.stringify(offer.input, null, 2)),
        el("p", "countdown", formatRemaining(remainingMs(offer.deadline, now))),
      );
      const answer = el("textarea");
      answer.placeholder = "result JSON";
      const submit = el("button", "", "submit");
      // Local gate only — the console refuses to emit after the
      // deadline, and the server re-judges anyway.
      submit.disabled = Date.now() > offer.deadline;
      submit.onclick = () => {
        let payload: JsonValue;
        try {
          payload = JSON.parse(answer.value) as JsonValue;
        } catch {
          answer.classList.add("invalid");
          return;
        }
        session.submitResult(offer.task_id, payload, 1.0, Date.now());
        render();
      };
      work.append(answer, submit);
      root.append(work);
    }

    const history = el("section", "history");
    for (const verdict of view.verdicts) {
      const line = el(
        "p",
        verdict.paid ? "paid" : "unpaid",
        `${verdict.task_id}: ${verdict.paid ? `paid ${verdict.amount.toFixed(2)}` : `not paid (${verdict.reason})`}`,
      );
      history.append(line);
    }
    for (const notice of view.notices) {
      history.append(
        el("p", "notice", `notice for ${notice.task_id}: ${notice.reason}`),
      );
    }
    root.append(history);

    const goals = el("section", "goals");
    const metric = el("input");
    metric.placeholder = "metric (e.g. transit-time)";
    const weight = el("input");
    weight.type = "number";
    weight.placeholder = "weight";
    const sendGoal = el("button", "", "submit goal");
    sendGoal.onclick = () => {
      session.submitGoal(metric.value, Number(weight.value), Date.now());
      render();
    };
    goals.append(metric, weight, sendGoal);
    root.append(goals);
  }

  new Ticker(() => render()).start();
  connect();
  render();
}
