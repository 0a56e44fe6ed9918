// Live MPJPEG view: an image element bound to the same-origin /stream
// route. Browsers render successive multipart parts as motion video;
// on error the view reconnects with 1 s / 2 s / 4 s ... capped backoff.

import { Backoff } from "./backoff.js";

export const STREAM_PATH = "/stream";

export interface ImageLike {
  src: string;
  onload: ((ev: any) => any) | null;
  onerror: ((ev: any) => any) | null;
}

export type Scheduler = (fn: () => void, delayMs: number) => void;

export class StreamView {
  readonly backoff = new Backoff();
  private generation = 0;

  constructor(
    private readonly image: ImageLike,
    private readonly onStatus: (connected: boolean) => void,
    private readonly schedule: Scheduler = (fn, ms) => setTimeout(fn, ms),
  ) {
    image.onload = () => {
      this.backoff.reset();
      this.onStatus(true);
    };
    image.onerror = () => {
      this.onStatus(false);
      this.schedule(() => this.connect(), this.backoff.nextDelayMs());
    };
  }

  connect(): void {
    // cache-busting query keeps the path /stream while forcing a fresh
    // connection after an error
    this.generation += 1;
    this.image.src =
      this.generation === 1
        ? STREAM_PATH
        : `${STREAM_PATH}?r=${this.generation}`;
  }
}
