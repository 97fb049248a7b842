// Client for the inpainting service. The editor talks to exactly two
// endpoints: GET /v1/health and POST /v1/inpaint (JSON bodies, base64 PNGs).

const B64_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

export function toBase64(bytes: Uint8Array): string {
  let out = "";
  for (let i = 0; i < bytes.length; i += 3) {
    const a = bytes[i];
    const b = i + 1 < bytes.length ? bytes[i + 1] : 0;
    const c = i + 2 < bytes.length ? bytes[i + 2] : 0;
    out += B64_ALPHABET[a >> 2];
    out += B64_ALPHABET[((a & 3) << 4) | (b >> 4)];
    out += i + 1 < bytes.length ? B64_ALPHABET[((b & 15) << 2) | (c >> 6)] : "=";
    out += i + 2 < bytes.length ? B64_ALPHABET[c & 63] : "=";
  }
  return out;
}

export function fromBase64(text: string): Uint8Array {
  const clean = text.replace(/=+$/, "");
  const out = new Uint8Array(Math.floor((clean.length * 3) / 4));
  let acc = 0;
  let bits = 0;
  let pos = 0;
  for (const ch of clean) {
    const v = B64_ALPHABET.indexOf(ch);
    if (v < 0) throw new Error(`invalid base64 character ${JSON.stringify(ch)}`);
    acc = (acc << 6) | v;
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out[pos++] = (acc >> bits) & 0xff;
    }
  }
  return out;
}

export interface HealthInfo {
  status: string;
  checkpoint?: { id: string; path: string };
  config?: Record<string, unknown>;
}

export interface InpaintOptions {
  returnDebug?: boolean;
}

export interface InpaintOutcome {
  result: Uint8Array;
  timingsMs: Record<string, number>;
  debug?: { edge: Uint8Array; coarse: Uint8Array };
}

/** An HTTP error from the service; `message` carries the server's text. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly field?: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

async function errorFromResponse(response: Response): Promise<ServiceError> {
  let message = `${response.status} ${response.statusText}`;
  let field: string | undefined;
  try {
    const body = (await response.json()) as { error?: string; field?: string };
    if (typeof body.error === "string") message = body.error;
    if (typeof body.field === "string") field = body.field;
  } catch {
    // non-JSON error body, keep the status line
  }
  return new ServiceError(response.status, message, field);
}

export class InpaintClient {
  constructor(
    readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (input, init) => globalThis.fetch(input, init),
  ) {}

  async health(): Promise<HealthInfo> {
    const response = await this.fetchFn(`${this.baseUrl}/v1/health`);
    if (!response.ok && response.status !== 503) throw await errorFromResponse(response);
    return (await response.json()) as HealthInfo;
  }

  async inpaint(imagePng: Uint8Array, maskPng: Uint8Array, options: InpaintOptions = {}): Promise<InpaintOutcome> {
    const payload: Record<string, unknown> = {
      image: toBase64(imagePng),
      mask: toBase64(maskPng),
    };
    if (options.returnDebug) payload.options = { return_debug: true };
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}/v1/inpaint`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(payload),
      });
    } catch (err) {
      throw new ServiceError(0, `service unreachable: ${err instanceof Error ? err.message : String(err)}`);
    }
    if (!response.ok) throw await errorFromResponse(response);
    const body = (await response.json()) as {
      result: string;
      timings_ms: Record<string, number>;
      debug?: { edge: string; coarse: string };
    };
    const outcome: InpaintOutcome = {
      result: fromBase64(body.result),
      timingsMs: body.timings_ms ?? {},
    };
    if (body.debug) {
      outcome.debug = { edge: fromBase64(body.debug.edge), coarse: fromBase64(body.debug.coarse) };
    }
    return outcome;
  }
}
