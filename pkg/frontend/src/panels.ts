// Settings controls and the stats table. The panel classes take
// element-like objects so the logic runs (and is tested) without a
// browser; main.ts binds them to the real DOM.

import type { StatsDocument } from "./api.js";
import { PutCoalescer } from "./coalescer.js";
import type { ConsoleState, ConsoleStore } from "./store.js";

export interface ControlLike {
  value: string;
  disabled: boolean;
}

export interface TextLike {
  textContent: string | null;
}

export interface SettingsControls {
  brightness: ControlLike;
  contrast: ControlLike;
  quality: ControlLike;
  fpsLabel: TextLike;
  message: TextLike;
}

export const QUALITY_MAX = 95;
export const FPS_PRESETS = [10, 15, 30] as const;

export function clampQuality(raw: number): number {
  if (Number.isNaN(raw)) {
    return QUALITY_MAX;
  }
  return Math.min(QUALITY_MAX, Math.max(0, Math.round(raw)));
}

export class SettingsPanel {
  constructor(
    private readonly controls: SettingsControls,
    private readonly coalescer: PutCoalescer,
    store: ConsoleStore,
  ) {
    store.subscribe((state) => this.render(state));
    this.render(store.current);
  }

  /** Slider/input edits; each change PUTs only the changed key. */
  editBrightness(value: number): void {
    this.coalescer.submit({ brightness: value });
  }

  editContrast(value: number): void {
    this.coalescer.submit({ contrast: value });
  }

  editQuality(value: number): void {
    this.coalescer.submit({ jpeg_quality: clampQuality(value) });
  }

  selectFps(value: number): void {
    this.coalescer.submit({ fps: value });
  }

  private render(state: ConsoleState): void {
    const settings = state.settings;
    const offline = state.connection !== "online" || settings === null;
    for (const control of [
      this.controls.brightness,
      this.controls.contrast,
      this.controls.quality,
    ]) {
      control.disabled = offline;
    }
    if (settings !== null) {
      // displayed values always mirror the last committed snapshot; a
      // rejected PUT re-renders them, snapping the control back
      this.controls.brightness.value = String(settings.brightness);
      this.controls.contrast.value = String(settings.contrast);
      this.controls.quality.value = String(settings.jpeg_quality);
      this.controls.fpsLabel.textContent = `${settings.fps} fps`;
    }
    this.controls.message.textContent = state.lastError ?? "";
  }
}

export function formatBandwidth(bps: number): string {
  return `${(bps / 1e6).toFixed(2)} Mbit/s`;
}

export interface StatsCells {
  h264Bandwidth: TextLike;
  mpjpegBandwidth: TextLike;
  tickRate: TextLike;
  h264Clients: TextLike;
  mpjpegClients: TextLike;
  drops: TextLike;
  staleBadge: TextLike;
}

export class StatsPanel {
  constructor(
    private readonly cells: StatsCells,
    store: ConsoleStore,
    private readonly formatTime: (epochMs: number) => string = (t) =>
      new Date(t).toLocaleTimeString(),
  ) {
    store.subscribe((state) => this.render(state));
    this.render(store.current);
  }

  private render(state: ConsoleState): void {
    const stats = state.stats;
    if (stats !== null) {
      this.cells.h264Bandwidth.textContent = formatBandwidth(
        stats.streams.h264.bandwidth_bps,
      );
      this.cells.mpjpegBandwidth.textContent = formatBandwidth(
        stats.streams.mpjpeg.bandwidth_bps,
      );
      this.cells.tickRate.textContent = `${stats.pipeline.tick_rate.toFixed(1)} fps`;
      this.cells.h264Clients.textContent = String(stats.streams.h264.clients);
      this.cells.mpjpegClients.textContent = String(
        stats.streams.mpjpeg.clients,
      );
      this.cells.drops.textContent = String(
        stats.streams.h264.drops + stats.streams.mpjpeg.drops,
      );
    }
    if (state.statsStale && state.statsUpdatedAt !== null) {
      this.cells.staleBadge.textContent = `stale (last update ${this.formatTime(
        state.statsUpdatedAt,
      )})`;
    } else {
      this.cells.staleBadge.textContent = "";
    }
  }
}

export const STATS_POLL_MS = 2000;

export function startStatsPolling(
  fetchStats: () => Promise<StatsDocument>,
  store: ConsoleStore,
  schedule: (fn: () => void, ms: number) => void = (fn, ms) =>
    setTimeout(fn, ms),
  now: () => number = () => Date.now(),
): () => void {
  let stopped = false;
  const poll = async () => {
    if (stopped) {
      return;
    }
    try {
      store.statsFetched(await fetchStats(), now());
    } catch {
      store.statsFailed();
    }
    schedule(poll, STATS_POLL_MS);
  };
  void poll();
  return () => {
    stopped = true;
  };
}
