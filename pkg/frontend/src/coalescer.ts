// One in-flight settings PUT at a time; edits arriving while a PUT is
// outstanding coalesce into a single follow-up carrying the newest
// value per key.

import type { CameraSettings } from "./api.js";

export type PutFn = (
  partial: Partial<CameraSettings>,
) => Promise<CameraSettings>;

export interface PutOutcome {
  ok: boolean;
  settings?: CameraSettings;
  error?: unknown;
  sent: Partial<CameraSettings>;
}

export class PutCoalescer {
  private inFlight = false;
  private pending: Partial<CameraSettings> | null = null;
  private puts = 0;

  constructor(
    private readonly put: PutFn,
    private readonly onOutcome: (outcome: PutOutcome) => void,
  ) {}

  get putCount(): number {
    return this.puts;
  }

  get busy(): boolean {
    return this.inFlight;
  }

  submit(partial: Partial<CameraSettings>): void {
    if (this.inFlight) {
      this.pending = { ...(this.pending ?? {}), ...partial };
      return;
    }
    void this.send(partial);
  }

  private async send(partial: Partial<CameraSettings>): Promise<void> {
    this.inFlight = true;
    this.puts += 1;
    let outcome: PutOutcome;
    try {
      const settings = await this.put(partial);
      outcome = { ok: true, settings, sent: partial };
    } catch (error) {
      outcome = { ok: false, error, sent: partial };
    }
    this.inFlight = false;
    this.onOutcome(outcome);
    if (this.pending !== null) {
      const next = this.pending;
      this.pending = null;
      void this.send(next);
    }
  }
}
