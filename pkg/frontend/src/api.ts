/** Client for the bitstream explorer service. */

export const BETA_MIN = 0;
export const BETA_MAX = 2.56;

export interface StoredItem {
  id: string;
  filename: string;
  bpp: number;
  orig_dims: [number, number];
  model_id: string;
}

export interface DecodeResult {
  /** Object URL for the decoded PNG (caller revokes when done). */
  url: string;
  bpp: number | null;
  psnr: number | null;
}

export class ServiceError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ServiceError";
  }
}

export function clampBeta(beta: number): number {
  if (Number.isNaN(beta)) return BETA_MIN;
  return Math.min(BETA_MAX, Math.max(BETA_MIN, beta));
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  decodeUrl(id: string, beta: number): string {
    const b = clampBeta(beta);
    return `${this.baseUrl}/decode?id=${encodeURIComponent(id)}&beta=${b.toFixed(2)}`;
  }

  async listItems(): Promise<StoredItem[]> {
    const resp = await this.fetchFn(`${this.baseUrl}/items`);
    if (!resp.ok) throw new ServiceError(`listing failed (${resp.status})`, resp.status);
    return (await resp.json()) as StoredItem[];
  }

  async decode(id: string, beta: number, signal?: AbortSignal): Promise<DecodeResult> {
    const resp = await this.fetchFn(this.decodeUrl(id, beta), { signal });
    if (!resp.ok) throw new ServiceError(`decode failed (${resp.status})`, resp.status);
    const blob = await resp.blob();
    const bppHeader = resp.headers.get("X-BPP");
    const psnrHeader = resp.headers.get("X-PSNR");
    return {
      url: URL.createObjectURL(blob),
      bpp: bppHeader === null ? null : Number(bppHeader),
      psnr: psnrHeader === null ? null : Number(psnrHeader),
    };
  }
}
