// @vitest-environment happy-dom
/** End-to-end UI flow against a live service (set MRC_SERVICE_URL).
 * Skipped when no service is configured; the Python acceptance suite
 * starts one backed by a trained model and three stored bitstreams. */

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ExplorerApp, createApp } from "../src/app.js";

const SERVICE = process.env.MRC_SERVICE_URL ?? "";
const maybe = SERVICE ? describe : describe.skip;

let urlCounter = 0;
const urlToBytes = new Map<string, Promise<ArrayBuffer>>();

beforeEach(() => {
  urlCounter = 0;
  urlToBytes.clear();
  URL.createObjectURL = ((blob: Blob) => {
    const url = `blob:live/${urlCounter++}`;
    urlToBytes.set(url, blob.arrayBuffer());
    return url;
  }) as typeof URL.createObjectURL;
  URL.revokeObjectURL = (() => undefined) as typeof URL.revokeObjectURL;
});

async function shownBytes(app: ExplorerApp): Promise<string[]> {
  const imgs = [...app.el.viewer.querySelectorAll("img")];
  return Promise.all(imgs.map(async (img) => {
    const buf = await urlToBytes.get(img.getAttribute("src") ?? "");
    return buf ? Buffer.from(new Uint8Array(buf)).toString("base64") : "";
  }));
}

maybe("live service UI flow", () => {
  it("slider drag 0 -> 2.56 renders distinct images at constant bpp, in-range requests only", async () => {
    const requested: number[] = [];
    const loggingFetch: typeof fetch = async (input, init) => {
      const url = new URL(String(input));
      const beta = url.searchParams.get("beta");
      if (beta !== null) requested.push(Number(beta));
      return fetch(input, init);
    };
    const client = new ApiClient(SERVICE, loggingFetch);
    const root = document.createElement("div");
    document.body.appendChild(root);
    const app = createApp(root, client);
    await app.ready;

    expect(app.items.length).toBeGreaterThanOrEqual(3);

    const distinct = new Set<string>();
    const bppShown = new Set<string>();
    for (const v of [0, 0.64, 1.28, 1.92, 2.56]) {
      app.el.slider.value = String(v);
      app.el.slider.dispatchEvent(new Event("input", { bubbles: true }));
      await app.idle();
      for (const b of await shownBytes(app)) distinct.add(b);
      bppShown.add(app.el.bppLabel.textContent ?? "");
    }

    expect(distinct.size).toBeGreaterThanOrEqual(2);
    expect(bppShown.size).toBe(1);
    expect(requested.length).toBeGreaterThan(0);
    expect(requested.every((b) => b >= 0 && b <= 2.56)).toBe(true);
  }, 120_000);
});
