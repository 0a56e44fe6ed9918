import { describe, expect, it } from "vitest";

import { STREAM_PATH, StreamView, type ImageLike } from "../src/streamview.js";

function makeImage(): ImageLike {
  return { src: "", onload: null, onerror: null };
}

describe("StreamView", () => {
  it("binds the image to /stream and nothing else", () => {
    const image = makeImage();
    const view = new StreamView(image, () => {});
    view.connect();
    expect(image.src).toBe(STREAM_PATH);
    expect(image.src).not.toContain("8887");
  });

  it("reconnects with 1s, 2s, 4s ... capped 10s backoff", () => {
    const image = makeImage();
    const delays: number[] = [];
    const pending: Array<() => void> = [];
    const statuses: boolean[] = [];
    const view = new StreamView(
      image,
      (connected) => statuses.push(connected),
      (fn, ms) => {
        delays.push(ms);
        pending.push(fn);
      },
    );
    view.connect();
    for (let i = 0; i < 6; i++) {
      image.onerror?.(undefined);
      pending.shift()?.();
    }
    expect(delays).toEqual([1000, 2000, 4000, 8000, 10000, 10000]);
    expect(statuses.every((s) => s === false)).toBe(true);
    // every reconnect URL stays on the same-origin stream path
    expect(image.src.startsWith(STREAM_PATH)).toBe(true);
    expect(image.src).not.toContain("8887");
  });

  it("a successful load resets the backoff and clears the badge", () => {
    const image = makeImage();
    const delays: number[] = [];
    const statuses: boolean[] = [];
    const view = new StreamView(
      image,
      (connected) => statuses.push(connected),
      (fn, ms) => {
        delays.push(ms);
        fn();
      },
    );
    view.connect();
    image.onerror?.(undefined);
    image.onerror?.(undefined);
    image.onload?.(undefined);
    image.onerror?.(undefined);
    expect(delays).toEqual([1000, 2000, 1000]);
    expect(statuses).toEqual([false, false, true, false]);
  });

  it("recovers within the 10s cap after a restart", () => {
    // worst case: the failure happens right after a delay was scheduled
    // at the cap; the next retry is at most 10s away
    const image = makeImage();
    let maxDelay = 0;
    const view = new StreamView(
      image,
      () => {},
      (fn, ms) => {
        maxDelay = Math.max(maxDelay, ms);
      },
    );
    view.connect();
    for (let i = 0; i < 20; i++) {
      image.onerror?.(undefined);
    }
    expect(maxDelay).toBe(10000);
  });
});
