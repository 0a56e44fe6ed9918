// Bootstraps the console page against the same-origin control API.

import { ApiClient, ApiError } from "./api.js";
import { PutCoalescer } from "./coalescer.js";
import {
  FPS_PRESETS,
  SettingsPanel,
  StatsPanel,
  startStatsPolling,
} from "./panels.js";
import { ConsoleStore } from "./store.js";
import { StreamView } from "./streamview.js";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (el === null) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

export function boot(): void {
  const api = new ApiClient((url, init) => fetch(url, init));
  const store = new ConsoleStore();

  const image = byId<HTMLImageElement>("stream");
  const badge = byId<HTMLSpanElement>("stream-status");
  const view = new StreamView(image, (connected) => {
    badge.textContent = connected ? "" : "disconnected";
    badge.className = connected ? "badge" : "badge offline";
  });
  view.connect();

  const coalescer = new PutCoalescer(
    (partial) => api.putSettings(partial),
    (outcome) => {
      if (outcome.ok && outcome.settings) {
        store.settingsFetched(outcome.settings);
      } else if (outcome.error instanceof ApiError) {
        store.settingsRejected(outcome.error.message);
      } else {
        store.settingsUnreachable(String(outcome.error));
      }
    },
  );

  const panel = new SettingsPanel(
    {
      brightness: byId<HTMLInputElement>("brightness"),
      contrast: byId<HTMLInputElement>("contrast"),
      quality: byId<HTMLInputElement>("quality"),
      fpsLabel: byId<HTMLSpanElement>("fps-label"),
      message: byId<HTMLSpanElement>("settings-message"),
    },
    coalescer,
    store,
  );

  byId<HTMLInputElement>("brightness").addEventListener("input", (e) =>
    panel.editBrightness(Number((e.target as HTMLInputElement).value)),
  );
  byId<HTMLInputElement>("contrast").addEventListener("input", (e) =>
    panel.editContrast(Number((e.target as HTMLInputElement).value)),
  );
  byId<HTMLInputElement>("quality").addEventListener("change", (e) =>
    panel.editQuality(Number((e.target as HTMLInputElement).value)),
  );
  const fpsRow = byId<HTMLDivElement>("fps-presets");
  for (const fps of FPS_PRESETS) {
    const button = document.createElement("button");
    button.textContent = `${fps}`;
    button.addEventListener("click", () => panel.selectFps(fps));
    fpsRow.appendChild(button);
  }

  new StatsPanel(
    {
      h264Bandwidth: byId("stat-h264-bw"),
      mpjpegBandwidth: byId("stat-mpjpeg-bw"),
      tickRate: byId("stat-tick-rate"),
      h264Clients: byId("stat-h264-clients"),
      mpjpegClients: byId("stat-mpjpeg-clients"),
      drops: byId("stat-drops"),
      staleBadge: byId("stats-stale"),
    },
    store,
  );
  startStatsPolling(() => api.getStats(), store);

  api
    .getSettings()
    .then((settings) => store.settingsFetched(settings))
    .catch((error) => store.settingsUnreachable(String(error)));
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", boot);
}
