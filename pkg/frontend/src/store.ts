// Single source of truth for everything the console renders: the last
// successful API responses, never an optimistic local value.

import type { CameraSettings, StatsDocument } from "./api.js";

export type Connection = "connecting" | "online" | "offline";

export interface ConsoleState {
  settings: CameraSettings | null;
  stats: StatsDocument | null;
  statsUpdatedAt: number | null;
  statsStale: boolean;
  connection: Connection;
  lastError: string | null;
}

type Listener = (state: ConsoleState) => void;

export class ConsoleStore {
  private state: ConsoleState = {
    settings: null,
    stats: null,
    statsUpdatedAt: null,
    statsStale: false,
    connection: "connecting",
    lastError: null,
  };
  private listeners: Listener[] = [];

  get current(): ConsoleState {
    return this.state;
  }

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
  }

  private commit(patch: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  settingsFetched(settings: CameraSettings): void {
    this.commit({ settings, connection: "online", lastError: null });
  }

  settingsRejected(message: string): void {
    // committed settings stand; controls re-render from them (revert)
    this.commit({ lastError: message });
  }

  settingsUnreachable(message: string): void {
    this.commit({ connection: "offline", lastError: message });
  }

  statsFetched(stats: StatsDocument, now: number): void {
    this.commit({
      stats,
      statsUpdatedAt: now,
      statsStale: false,
      connection: "online",
    });
  }

  statsFailed(): void {
    this.commit({ statsStale: true });
  }
}
