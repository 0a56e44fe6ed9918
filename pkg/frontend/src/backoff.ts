// Reconnect delays: 1 s, 2 s, 4 s, ... doubling up to the 10 s cap.

export class Backoff {
  private attempt = 0;

  constructor(
    private readonly initialMs = 1000,
    private readonly capMs = 10000,
  ) {}

  nextDelayMs(): number {
    const delay = Math.min(this.initialMs * 2 ** this.attempt, this.capMs);
    this.attempt += 1;
    return delay;
  }

  reset(): void {
    this.attempt = 0;
  }
}
