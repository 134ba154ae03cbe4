/** Typed client for the annotation service JSON API. */

import type { Rle } from "./rle.js";

export interface ClickPoint {
  row: number;
  col: number;
  instance_id: number;
  polarity: "pos" | "neg";
}

export interface WireInstance {
  instance_id: number;
  rle: Rle;
}

export interface WirePrediction {
  height: number;
  width: number;
  instances: WireInstance[];
}

export interface SessionState {
  session_id: string;
  height: number;
  width: number;
  clicks: ClickPoint[];
  prediction: WirePrediction | null;
  predictor: string;
}

export interface ExportResult {
  session_id: string;
  out_dir: string;
  files: string[];
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      detail = JSON.stringify(await response.json());
    } catch {
      /* keep statusText */
    }
    throw new Error(`${response.status}: ${detail}`);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async health(): Promise<{ status: string; predictor: string }> {
    return asJson(await fetch(`${this.baseUrl}/healthz`));
  }

  async createSession(imageBase64: string): Promise<string> {
    const body = await asJson<{ session_id: string }>(
      await fetch(`${this.baseUrl}/sessions`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ image: imageBase64 }),
      })
    );
    return body.session_id;
  }

  async putClicks(sessionId: string, clicks: ClickPoint[]): Promise<WirePrediction> {
    const body = await asJson<{ prediction: WirePrediction }>(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/clicks`, {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ clicks }),
      })
    );
    return body.prediction;
  }

  async getSession(sessionId: string): Promise<SessionState> {
    return asJson(await fetch(`${this.baseUrl}/sessions/${sessionId}`));
  }

  async exportSession(sessionId: string): Promise<ExportResult> {
    return asJson(
      await fetch(`${this.baseUrl}/sessions/${sessionId}/export`, { method: "POST" })
    );
  }
}
