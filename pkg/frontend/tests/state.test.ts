import { describe, expect, it } from "vitest";

import type { ApiClient, ClickPoint, WirePrediction } from "../src/api.js";
import { AnnotationSession } from "../src/state.js";

/** Fake service: every click owns a 1-pixel region at its position. */
class FakeClient {
  puts: ClickPoint[][] = [];
  failNext = false;

  async createSession(): Promise<string> {
    return "fake-session";
  }

  async putClicks(_sessionId: string, clicks: ClickPoint[]): Promise<WirePrediction> {
    if (this.failNext) {
      this.failNext = false;
      throw new Error("503: unavailable");
    }
    this.puts.push(clicks);
    const h = 4;
    const w = 4;
    return {
      height: h,
      width: w,
      instances: clicks.map((c) => {
        const at = c.row * w + c.col;
        const counts = at === 0 ? [0, 1, h * w - 1] : [at, 1, h * w - at - 1];
        return {
          instance_id: c.instance_id,
          rle: { counts, order: "row-major" as const, start_value: 0 as const },
        };
      }),
    };
  }

  async exportSession(sessionId: string) {
    return { session_id: sessionId, out_dir: "/tmp/fake", files: ["manifest.json"] };
  }

  async getSession(): Promise<never> {
    throw new Error("not needed");
  }

  async health() {
    return { status: "ok", predictor: "classical" };
  }
}

function makeSession() {
  const client = new FakeClient();
  return { client, session: new AnnotationSession(client as unknown as ApiClient) };
}

describe("AnnotationSession", () => {
  it("assigns fresh instance ids per click", async () => {
    const { session } = makeSession();
    await session.start("aGV5");
    await session.placeClick(0, 0);
    await session.placeClick(1, 2);
    expect(session.clicks.map((c) => c.instance_id)).toEqual([1, 2]);
  });

  it("overlay reflects the acknowledged response", async () => {
    const { session } = makeSession();
    await session.start("aGV5");
    await session.placeClick(1, 1);
    expect(session.overlay?.regions).toHaveLength(1);
    expect(session.overlay?.regions[0].mask[1 * 4 + 1]).toBe(1);
    expect(session.dirty).toBe(false);
  });

  it("undo restores the previous click set and overlay", async () => {
    const { session } = makeSession();
    await session.start("aGV5");
    await session.placeClick(0, 0);
    await session.placeClick(2, 2);
    expect(session.overlay?.regions).toHaveLength(2);
    await session.undo();
    expect(session.clicks).toHaveLength(1);
    expect(session.overlay?.regions).toHaveLength(1);
  });

  it("keeps clicks locally and stays dirty when the server fails", async () => {
    const { client, session } = makeSession();
    await session.start("aGV5");
    client.failNext = true;
    await expect(session.placeClick(0, 1)).rejects.toThrow("503");
    expect(session.clicks).toHaveLength(1); // click preserved locally
    expect(session.dirty).toBe(true);
    await session.sync(); // recovers on the next sync
    expect(session.dirty).toBe(false);
    expect(session.overlay?.regions).toHaveLength(1);
  });

  it("every region id maps to a placed click", async () => {
    const { session } = makeSession();
    await session.start("aGV5");
    await session.placeClick(0, 0);
    await session.placeClick(3, 3);
    const clickIds = new Set(session.clicks.map((c) => c.instance_id));
    for (const region of session.overlay?.regions ?? []) {
      expect(clickIds.has(region.instanceId)).toBe(true);
    }
  });

  it("export syncs pending clicks first", async () => {
    const { client, session } = makeSession();
    await session.start("aGV5");
    await session.placeClick(0, 0);
    const result = await session.export();
    expect(result.files).toContain("manifest.json");
    expect(client.puts.length).toBeGreaterThan(0);
  });
});
