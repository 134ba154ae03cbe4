/**
 * Browser wiring: load an image, click plants, watch fused instance
 * overlays update after every acknowledged server response.
 *
 * Shortcuts: u = undo, e = export, [ / ] = overlay opacity.
 */

import { ApiClient } from "./api.js";
import { instanceColor } from "./colors.js";
import { maskToRgba } from "./rle.js";
import { AnnotationSession } from "./state.js";

const client = new ApiClient("");
const session = new AnnotationSession(client);

let opacity = 0.55;
let imageBitmap: ImageBitmap | null = null;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const fileInput = document.getElementById("file") as HTMLInputElement;
const status = document.getElementById("status") as HTMLElement;
const banner = document.getElementById("banner") as HTMLElement;

function note(text: string) {
  status.textContent = text;
}

function fail(text: string) {
  banner.textContent = text;
  banner.style.display = "block";
  setTimeout(() => (banner.style.display = "none"), 4000);
}

function render() {
  if (!imageBitmap) return;
  const ctx = canvas.getContext("2d")!;
  canvas.width = imageBitmap.width;
  canvas.height = imageBitmap.height;
  ctx.drawImage(imageBitmap, 0, 0);
  const overlay = session.overlay;
  if (overlay) {
    const buffer = new OffscreenCanvas(overlay.width, overlay.height);
    const bctx = buffer.getContext("2d")!;
    for (const region of overlay.regions) {
      const rgba = maskToRgba(region.mask, instanceColor(region.instanceId), opacity);
      bctx.putImageData(new ImageData(rgba, overlay.width, overlay.height), 0, 0);
      ctx.drawImage(buffer, 0, 0);
    }
  }
  const markers = session.clicks;
  for (const click of markers) {
    const [r, g, b] = instanceColor(click.instance_id);
    ctx.fillStyle = `rgb(${r},${g},${b})`;
    ctx.strokeStyle = "white";
    ctx.beginPath();
    ctx.arc(click.col, click.row, 4, 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
  }
  note(
    `${markers.length} clicks, ${session.overlay?.regions.length ?? 0} regions` +
      (session.dirty ? " (syncing...)" : "")
  );
}

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  const bytes = new Uint8Array(await file.arrayBuffer());
  let binary = "";
  bytes.forEach((b) => (binary += String.fromCharCode(b)));
  try {
    await session.start(btoa(binary));
    imageBitmap = await createImageBitmap(file);
    render();
    note("image loaded; click each plant once");
  } catch (err) {
    fail(`could not start session: ${err}`);
  }
});

canvas.addEventListener("click", async (event) => {
  if (!imageBitmap) return;
  const rect = canvas.getBoundingClientRect();
  const col = Math.floor(((event.clientX - rect.left) / rect.width) * canvas.width);
  const row = Math.floor(((event.clientY - rect.top) / rect.height) * canvas.height);
  try {
    await session.placeClick(row, col);
  } catch (err) {
    fail(`prediction failed, click kept locally: ${err}`);
  }
  render();
});

document.addEventListener("keydown", async (event) => {
  if (event.key === "u") {
    try {
      await session.undo();
    } catch (err) {
      fail(`undo sync failed: ${err}`);
    }
    render();
  } else if (event.key === "e") {
    try {
      const result = await session.export();
      note(`exported ${result.files.length} files to ${result.out_dir}`);
    } catch (err) {
      fail(`export failed: ${err}`);
    }
  } else if (event.key === "[") {
    opacity = Math.max(0.1, opacity - 0.1);
    render();
  } else if (event.key === "]") {
    opacity = Math.min(1.0, opacity + 0.1);
    render();
  }
});

client
  .health()
  .then((h) => note(`connected (${h.predictor} predictor); load an image`))
  .catch(() => fail("service unreachable"));
