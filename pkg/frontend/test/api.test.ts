import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, type FetchLike } from "../src/api.js";

function fakeFetch(
  status: number,
  body: unknown,
  log: Array<{ url: string; method?: string; body?: string }>,
): FetchLike {
  return async (url, init) => {
    log.push({ url, method: init?.method, body: init?.body });
    return {
      ok: status >= 200 && status < 300,
      status,
      json: async () => body,
    };
  };
}

describe("ApiClient", () => {
  it("GET /api/settings", async () => {
    const log: Array<{ url: string }> = [];
    const client = new ApiClient(
      fakeFetch(200, { brightness: 0.5, version: 3 }, log),
    );
    const settings = await client.getSettings();
    expect(log[0].url).toBe("/api/settings");
    expect(settings.brightness).toBe(0.5);
  });

  it("PUT sends only the changed key", async () => {
    const log: Array<{ url: string; method?: string; body?: string }> = [];
    const client = new ApiClient(fakeFetch(200, { version: 4 }, log));
    await client.putSettings({ brightness: 1.0 });
    expect(log[0].method).toBe("PUT");
    expect(JSON.parse(log[0].body ?? "")).toEqual({ brightness: 1.0 });
  });

  it("400 surfaces the server's message and field", async () => {
    const client = new ApiClient(
      fakeFetch(400, { error: "unknown setting: zoom", field: "zoom" }, []),
    );
    try {
      await client.putSettings({});
      expect.unreachable();
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).status).toBe(400);
      expect((error as ApiError).message).toBe("unknown setting: zoom");
      expect((error as ApiError).field).toBe("zoom");
    }
  });

  it("never touches a raw stream port", async () => {
    const log: Array<{ url: string }> = [];
    const client = new ApiClient(fakeFetch(200, {}, log));
    await client.getSettings();
    await client.getStats().catch(() => {});
    for (const entry of log) {
      expect(entry.url).not.toContain("8887");
      expect(entry.url.startsWith("/api/")).toBe(true);
    }
  });
});
