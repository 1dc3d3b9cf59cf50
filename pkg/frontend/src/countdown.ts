// Countdown arithmetic for offer cards. The deadline is inclusive:
// a submission at exactly the deadline is still paid, one tick later
// is not, so "expired" means strictly past the deadline.

export function remainingMs(deadline: number, now: number): number {
  return Math.max(0, deadline - now);
}

export function isExpired(deadline: number, now: number): boolean {
  return now > deadline;
}

export function formatRemaining(ms: number): string {
  const totalSeconds = Math.ceil(ms / 1000);
  const minutes = Math.floor(totalSeconds / 60);
  const seconds = totalSeconds % 60;
  return `${minutes}:${String(seconds).padStart(2, "0")}`;
}

/** Periodic ticker driving the countdown labels; framework-free so the
 * view-model stays testable without a DOM. */
export class Ticker {
  private handle: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly onTick: (now: number) => void,
    private readonly periodMs = 250,
    private readonly clock: () => number = () => Date.now(),
  ) {}

  start(): void {
    if (this.handle !== null) return;
    this.handle = setInterval(() => this.onTick(this.clock()), this.periodMs);
  }

  stop(): void {
    if (this.handle !== null) {
      clearInterval(this.handle);
      this.handle = null;
    }
  }
}
