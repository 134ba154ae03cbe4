/**
 * Session state for the annotator: local clicks are optimistic, but the
 * overlay only ever shows the last acknowledged server response, so the
 * screen always matches what an export would contain.
 */

import { ApiClient, ClickPoint, ExportResult, WirePrediction } from "./api.js";
import { assertDisjoint, decodeRle } from "./rle.js";

export interface Region {
  instanceId: number;
  mask: Uint8Array;
}

export interface AckedOverlay {
  height: number;
  width: number;
  regions: Region[];
}

function decodePrediction(prediction: WirePrediction): AckedOverlay {
  const regions = prediction.instances.map((inst) => ({
    instanceId: inst.instance_id,
    mask: decodeRle(inst.rle, prediction.height, prediction.width),
  }));
  assertDisjoint(new Map(regions.map((r) => [r.instanceId, r.mask])));
  return { height: prediction.height, width: prediction.width, regions };
}

export class AnnotationSession {
  private sessionId: string | null = null;
  private localClicks: ClickPoint[] = [];
  private ackedClicks: ClickPoint[] = [];
  private acked: AckedOverlay | null = null;
  private nextId = 1;
  private generation = 0;
  private inFlight: Promise<void> | null = null;

  constructor(private readonly client: ApiClient) {}

  get clicks(): readonly ClickPoint[] {
    return this.localClicks;
  }

  get overlay(): AckedOverlay | null {
    return this.acked;
  }

  /** True while local clicks differ from the acknowledged set. */
  get dirty(): boolean {
    return JSON.stringify(this.localClicks) !== JSON.stringify(this.ackedClicks);
  }

  get id(): string {
    if (this.sessionId === null) throw new Error("session not started");
    return this.sessionId;
  }

  async start(imageBase64: string): Promise<string> {
    this.sessionId = await this.client.createSession(imageBase64);
    this.localClicks = [];
    this.ackedClicks = [];
    this.acked = null;
    this.nextId = 1;
    return this.sessionId;
  }

  /** Append a positive click with a fresh instance id and sync. */
  async placeClick(row: number, col: number): Promise<void> {
    this.localClicks = [
      ...this.localClicks,
      { row, col, instance_id: this.nextId++, polarity: "pos" },
    ];
    await this.sync();
  }

  /** Remove the most recent click and sync; no-op when empty. */
  async undo(): Promise<void> {
    if (this.localClicks.length === 0) return;
    this.localClicks = this.localClicks.slice(0, -1);
    await this.sync();
  }

  async export(): Promise<ExportResult> {
    await this.sync();
    return this.client.exportSession(this.id);
  }

  /**
   * Push the local click set; at most one request runs at a time and a
   * newer edit supersedes the pending response.
   */
  async sync(): Promise<void> {
    const generation = ++this.generation;
    while (this.inFlight) {
      const pending = this.inFlight;
      await pending.catch(() => undefined);
      if (this.inFlight === pending) this.inFlight = null; // settled
      if (generation !== this.generation) return; // superseded
    }
    const clicks = this.localClicks;
    const request = (async () => {
      const prediction = await this.client.putClicks(this.id, clicks);
      if (generation === this.generation) {
        this.acked = decodePrediction(prediction);
        this.ackedClicks = clicks;
      }
    })();
    this.inFlight = request;
    try {
      await request;
    } finally {
      if (this.inFlight === request) this.inFlight = null;
    }
  }
}
