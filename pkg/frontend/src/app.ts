/** DOM application: pick a stored bitstream, drag the realism slider,
 * compare reconstructions. All decoding happens server-side. */

import { ApiClient, BETA_MAX, StoredItem, clampBeta } from "./api.js";
import { Debounced, LastWins, debounce } from "./debounce.js";
import {
  CompareMode,
  ViewState,
  betasInView,
  initialState,
  pinBeta,
  selectItem,
  setBeta,
  setMode,
  unpinBeta,
} from "./state.js";

export const SLIDER_STEP = 0.01;
export const DEBOUNCE_MS = 250; // at most 4 decode bursts per second

interface Elements {
  itemList: HTMLSelectElement;
  slider: HTMLInputElement;
  betaLabel: HTMLSpanElement;
  bppLabel: HTMLSpanElement;
  psnrLabel: HTMLSpanElement;
  viewer: HTMLDivElement;
  banner: HTMLDivElement;
  pinStrip: HTMLDivElement;
  pinButton: HTMLButtonElement;
  modeButtons: Record<CompareMode["kind"], HTMLButtonElement>;
  wipeDivider: HTMLInputElement;
}

export class ExplorerApp {
  state: ViewState = initialState();
  items: StoredItem[] = [];
  readonly el: Elements;
  readonly ready: Promise<void>;
  /** Resolves whenever no debounce or fetch is pending (test hook). */
  private settled: Promise<void> = Promise.resolve();
  private readonly scheduleRender: Debounced<[]>;
  private readonly inflight = new LastWins();
  private readonly pinCache = new Map<string, string>();

  constructor(root: HTMLElement, private readonly client: ApiClient) {
    this.el = buildDom(root);
    this.scheduleRender = debounce(() => this.renderNow(), DEBOUNCE_MS);
    this.wire();
    this.ready = this.loadItems();
  }

  private wire(): void {
    this.el.itemList.addEventListener("change", () => {
      this.state = selectItem(this.state, this.el.itemList.value);
      this.pinCache.clear();
      this.renderPins();
      this.renderNow();
    });
    this.el.slider.addEventListener("input", () => {
      const value = clampBeta(Number(this.el.slider.value));
      this.state = setBeta(this.state, value);
      if (this.state.mode.kind !== "single") {
        this.state = setMode(this.state, { ...this.state.mode, betaRight: value });
      }
      this.el.betaLabel.textContent = value.toFixed(2);
      this.scheduleRender();
    });
    this.el.pinButton.addEventListener("click", () => {
      const before = this.state.pinnedBetas.length;
      this.state = pinBeta(this.state, this.state.beta);
      if (this.state.pinnedBetas.length !== before) this.renderPins();
    });
    this.el.modeButtons["single"].addEventListener("click", () => {
      this.state = setMode(this.state, { kind: "single" });
      this.renderNow();
    });
    this.el.modeButtons["side-by-side"].addEventListener("click", () => {
      this.state = setMode(this.state, {
        kind: "side-by-side", betaLeft: 0, betaRight: this.state.beta,
      });
      this.renderNow();
    });
    this.el.modeButtons["wipe"].addEventListener("click", () => {
      this.state = setMode(this.state, {
        kind: "wipe", betaLeft: 0, betaRight: this.state.beta, divider: 0.5,
      });
      this.renderNow();
    });
    this.el.wipeDivider.addEventListener("input", () => {
      if (this.state.mode.kind === "wipe") {
        this.state = setMode(this.state, {
          ...this.state.mode, divider: Number(this.el.wipeDivider.value),
        });
        this.applyWipeDivider();
      }
    });
  }

  private async loadItems(): Promise<void> {
    try {
      this.items = await this.client.listItems();
      this.el.itemList.innerHTML = "";
      for (const item of this.items) {
        const opt = document.createElement("option");
        opt.value = item.id;
        opt.textContent = `${item.id} (${item.bpp.toFixed(3)} bpp)`;
        this.el.itemList.appendChild(opt);
      }
      if (this.items.length > 0 && this.items[0]) {
        this.state = selectItem(this.state, this.items[0].id);
        await this.renderNow();
      }
    } catch (err) {
      this.showBanner(`service unreachable: ${(err as Error).message}`);
    }
  }

  /** Waits until pending debounced work and fetches have finished. */
  async idle(): Promise<void> {
    this.scheduleRender.flush();
    await this.settled;
  }

  private renderNow(): Promise<void> {
    const job = this.doRender();
    this.settled = job.catch(() => undefined);
    return job;
  }

  private async doRender(): Promise<void> {
    if (this.state.selectedId === null) return;
    const id = this.state.selectedId;
    const betas = betasInView(this.state).map(clampBeta);
    let results;
    try {
      results = await this.inflight.run(async (signal) => {
        return Promise.all(betas.map((b) => this.client.decode(id, b, signal)));
      });
    } catch (err) {
      // state is untouched; the user can retry or move the slider again
      this.showBanner(`decode failed: ${(err as Error).message}`);
      return;
    }
    if (results === null) return; // superseded by a newer render
    this.hideBanner();
    const bpp = results[0]?.bpp ?? null;
    this.el.bppLabel.textContent = bpp === null ? "-" : bpp.toFixed(4);
    const psnr = results[0]?.psnr ?? null;
    this.el.psnrLabel.textContent = psnr === null ? "-" : `${psnr.toFixed(2)} dB`;
    this.renderImages(betas, results.map((r) => r.url));
  }

  private renderImages(betas: number[], urls: string[]): void {
    const viewer = this.el.viewer;
    viewer.innerHTML = "";
    const mode = this.state.mode.kind;
    viewer.dataset.mode = mode;
    if (mode === "wipe" && urls.length === 2) {
      const frame = document.createElement("div");
      frame.className = "wipe-frame";
      const left = imageFor(urls[0]!, betas[0]!);
      const right = imageFor(urls[1]!, betas[1]!);
      right.classList.add("wipe-top");
      frame.append(left, right);
      viewer.appendChild(frame);
      viewer.appendChild(this.el.wipeDivider);
      this.applyWipeDivider();
      return;
    }
    urls.forEach((url, i) => viewer.appendChild(imageFor(url, betas[i]!)));
  }

  private applyWipeDivider(): void {
    if (this.state.mode.kind !== "wipe") return;
    const top = this.el.viewer.querySelector<HTMLImageElement>(".wipe-top");
    const pct = Math.round(this.state.mode.divider * 100);
    if (top) top.style.clipPath = `inset(0 0 0 ${pct}%)`;
  }

  private renderPins(): void {
    const strip = this.el.pinStrip;
    strip.innerHTML = "";
    const id = this.state.selectedId;
    for (const beta of this.state.pinnedBetas) {
      const cell = document.createElement("figure");
      cell.className = "pin";
      const img = document.createElement("img");
      img.alt = `pinned beta ${beta.toFixed(2)}`;
      if (id !== null) {
        const key = `${id}:${beta.toFixed(2)}`;
        const cached = this.pinCache.get(key);
        if (cached !== undefined) {
          img.src = cached;
        } else {
          void this.client.decode(id, beta).then((res) => {
            this.pinCache.set(key, res.url);
            img.src = res.url;
          }).catch(() => undefined);
        }
      }
      const caption = document.createElement("figcaption");
      caption.textContent = `b=${beta.toFixed(2)}`;
      const remove = document.createElement("button");
      remove.textContent = "unpin";
      remove.addEventListener("click", () => {
        this.state = unpinBeta(this.state, beta);
        this.renderPins();
      });
      cell.append(img, caption, remove);
      strip.appendChild(cell);
    }
  }

  private showBanner(message: string): void {
    this.el.banner.textContent = message;
    this.el.banner.hidden = false;
  }

  private hideBanner(): void {
    this.el.banner.hidden = true;
  }
}

function imageFor(url: string, beta: number): HTMLImageElement {
  const img = document.createElement("img");
  img.src = url;
  img.alt = `reconstruction at beta ${beta.toFixed(2)}`;
  img.dataset.beta = beta.toFixed(2);
  return img;
}

function buildDom(root: HTMLElement): Elements {
  root.innerHTML = `
    <div class="banner" hidden></div>
    <div class="controls">
      <select class="items"></select>
      <label>realism
        <input class="beta" type="range" min="0" max="${BETA_MAX}" step="${SLIDER_STEP}" value="0">
      </label>
      <span class="beta-label">0.00</span>
      <button class="pin-beta">pin</button>
      <span class="modes">
        <button data-mode="single">single</button>
        <button data-mode="side-by-side">side-by-side</button>
        <button data-mode="wipe">wipe</button>
      </span>
      <span class="bpp">-</span>
      <span class="psnr">-</span>
    </div>
    <div class="viewer"></div>
    <div class="pins"></div>
  `;
  const wipeDivider = document.createElement("input");
  wipeDivider.type = "range";
  wipeDivider.min = "0";
  wipeDivider.max = "1";
  wipeDivider.step = "0.01";
  wipeDivider.value = "0.5";
  wipeDivider.className = "wipe-divider";
  const q = <T extends Element>(sel: string): T => {
    const el = root.querySelector<T>(sel);
    if (!el) throw new Error(`missing element ${sel}`);
    return el;
  };
  return {
    itemList: q<HTMLSelectElement>(".items"),
    slider: q<HTMLInputElement>(".beta"),
    betaLabel: q<HTMLSpanElement>(".beta-label"),
    bppLabel: q<HTMLSpanElement>(".bpp"),
    psnrLabel: q<HTMLSpanElement>(".psnr"),
    viewer: q<HTMLDivElement>(".viewer"),
    banner: q<HTMLDivElement>(".banner"),
    pinStrip: q<HTMLDivElement>(".pins"),
    pinButton: q<HTMLButtonElement>(".pin-beta"),
    modeButtons: {
      "single": q<HTMLButtonElement>('button[data-mode="single"]'),
      "side-by-side": q<HTMLButtonElement>('button[data-mode="side-by-side"]'),
      "wipe": q<HTMLButtonElement>('button[data-mode="wipe"]'),
    },
    wipeDivider,
  };
}

export function createApp(root: HTMLElement, client: ApiClient): ExplorerApp {
  return new ExplorerApp(root, client);
}
