// Typed client for the service's control endpoints. All console I/O
// goes through one origin; the raw stream ports are never referenced.

export interface CameraSettings {
  brightness: number;
  contrast: number;
  jpeg_quality: number;
  fps: number;
  version: number;
}

export interface EncodeLatency {
  mean: number;
  p95: number;
}

export interface StreamStats {
  bytes_total: number;
  bandwidth_bps: number;
  frames_encoded: number;
  encode_ms: EncodeLatency;
  clients: number;
  drops: number;
  failures: number;
}

export interface StatsDocument {
  uptime_s: number;
  pipeline: {
    ticks: number;
    ticks_skipped: number;
    deadline_missed: number;
    tick_rate: number;
  };
  streams: {
    h264: StreamStats;
    mpjpeg: StreamStats;
  };
  pool: {
    copies: number;
    maps: number;
    live: number;
    capacity: number;
  };
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
    public readonly field: string | null = null,
  ) {
    super(message);
  }
}

export type FetchLike = (
  url: string,
  init?: { method?: string; body?: string; headers?: Record<string, string> },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike,
    private readonly base: string = "",
  ) {}

  async getSettings(): Promise<CameraSettings> {
    return (await this.request("GET", "/api/settings")) as CameraSettings;
  }

  async putSettings(partial: Partial<CameraSettings>): Promise<CameraSettings> {
    return (await this.request(
      "PUT",
      "/api/settings",
      JSON.stringify(partial),
    )) as CameraSettings;
  }

  async getStats(): Promise<StatsDocument> {
    return (await this.request("GET", "/api/stats")) as StatsDocument;
  }

  private async request(
    method: string,
    path: string,
    body?: string,
  ): Promise<unknown> {
    const response = await this.fetchFn(this.base + path, {
      method,
      body,
      headers: body ? { "Content-Type": "application/json" } : undefined,
    });
    const payload = (await response.json()) as Record<string, unknown>;
    if (!response.ok) {
      const message =
        typeof payload.error === "string" ? payload.error : `HTTP ${response.status}`;
      const field = typeof payload.field === "string" ? payload.field : null;
      throw new ApiError(response.status, message, field);
    }
    return payload;
  }
}
