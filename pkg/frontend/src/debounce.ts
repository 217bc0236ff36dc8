/** Trailing debounce plus last-wins request sequencing for slider drags. */

export interface Debounced<A extends unknown[]> {
  (...args: A): void;
  cancel(): void;
  flush(): void;
}

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number,
): Debounced<A> {
  let timer: ReturnType<typeof setTimeout> | null = null;
  let pending: A | null = null;

  const wrapped = (...args: A) => {
    pending = args;
    if (timer !== null) clearTimeout(timer);
    timer = setTimeout(() => {
      timer = null;
      const call = pending;
      pending = null;
      if (call) fn(...call);
    }, waitMs);
  };
  wrapped.cancel = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    pending = null;
  };
  wrapped.flush = () => {
    if (timer !== null) clearTimeout(timer);
    timer = null;
    const call = pending;
    pending = null;
    if (call) fn(...call);
  };
  return wrapped;
}

/** Runs async jobs so only the newest one's result is delivered; stale
 * in-flight requests are aborted. */
export class LastWins {
  private seq = 0;
  private controller: AbortController | null = null;

  async run<T>(job: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const ticket = ++this.seq;
    try {
      const result = await job(controller.signal);
      return ticket === this.seq ? result : null;
    } catch (err) {
      if ((err as Error)?.name === "AbortError") return null;
      if (ticket !== this.seq) return null;
      throw err;
    }
  }
}
