"""HTTP service exposing the click-to-mask loop.

One predictor per process, chosen at startup: ``classical`` thresholds an
excess-green vegetation index so the loop works without any training,
``toy_model`` runs a trained checkpoint.  Either way the predictor output
is fused with the session's positive clicks, so masks arrive as a
non-overlapping partition.  Zero clicks yield an empty prediction in this
interactive setting (no fallback blob).

Sessions live in process memory; nothing persists across restarts except
explicit exports.
"""

import base64
import io
import json
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import HTMLResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel

from .clicks import Click, EncodingConfig, gaussian_click_map
from .errors import ClickforgeError, ValidationError
from .fusion import CenterSet, FusionConfig, PanopticPrediction, fuse
from .net import NetConfig, Parameters, forward, load_checkpoint
from .pipeline import ScenePseudoLabel, pseudo_label_scene
from .raster import Scene, instance_masks, rle_encode, write_instance_map, write_scene

DEFAULT_EXG_THRESHOLD = 0.1


@dataclass(frozen=True)
class PredictorConfig:
    kind: str = "classical"  # "classical" | "toy_model"
    exg_threshold: float = DEFAULT_EXG_THRESHOLD
    checkpoint_path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("classical", "toy_model"):
            raise ValidationError(f"unknown predictor kind {self.kind!r}")
        if self.kind == "toy_model" and not self.checkpoint_path:
            raise ValidationError("toy_model predictor needs a checkpoint path")


def classical_predict(image: np.ndarray, cfg: PredictorConfig = PredictorConfig()) -> PanopticPrediction:
    """Vegetation/background split on chromatic coordinates: foreground
    where ExG = 2g - r - b exceeds the threshold.  Offsets are zero, so
    fusion reduces to a Voronoi split among the clicks."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"expected an RGB image, got shape {image.shape}")
    rgb = image.astype(np.float64)
    total = rgb.sum(axis=2)
    safe = np.where(total > 0, total, 1.0)
    r = np.where(total > 0, rgb[:, :, 0] / safe, 0.0)
    g = np.where(total > 0, rgb[:, :, 1] / safe, 0.0)
    b = np.where(total > 0, rgb[:, :, 2] / safe, 0.0)
    exg = 2.0 * g - r - b
    fg = exg > cfg.exg_threshold
    semantic = np.stack([(~fg).astype(np.float64), fg.astype(np.float64)], axis=2)
    offsets = np.zeros(image.shape[:2] + (2,), dtype=np.float64)
    return PanopticPrediction(semantic=semantic, offsets=offsets)


@dataclass
class Session:
    id: str
    image: np.ndarray
    clicks: tuple[Click, ...] = ()
    prediction: Optional[np.ndarray] = None  # derived from the current click set
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)


class Predictor:
    """Wraps the configured predictor behind one call."""

    def __init__(self, cfg: PredictorConfig, encoding: EncodingConfig = EncodingConfig()):
        self.cfg = cfg
        self.encoding = encoding
        self._net_cfg: Optional[NetConfig] = None
        self._params: Optional[Parameters] = None
        if cfg.kind == "toy_model":
            self._net_cfg, self._params = load_checkpoint(cfg.checkpoint_path)
            if self._net_cfg.in_channels != 4:
                raise ValidationError("interactive predictor needs a four-channel checkpoint")

    @property
    def kind(self) -> str:
        return self.cfg.kind

    def predict(self, image: np.ndarray, clicks) -> PanopticPrediction:
        if self.cfg.kind == "classical":
            return classical_predict(image, self.cfg)
        click_map = gaussian_click_map(image.shape[0], image.shape[1], clicks, self.encoding)
        x = np.concatenate([image.astype(np.float64) / 255.0, click_map[..., None]], axis=2)
        return forward(self._params, x, self._net_cfg)[0]


def predict_session(session: Session, predictor: Predictor) -> np.ndarray:
    """Fuse the configured predictor with the session's positive clicks;
    cached, so re-sending the same click set is idempotent."""
    if session.prediction is not None:
        return session.prediction
    pred = predictor.predict(session.image, session.clicks)
    positives = CenterSet.from_clicks([c for c in session.clicks if c.polarity == "pos"])
    label_map = fuse(pred, positives, FusionConfig(empty_center_fallback=False))
    session.prediction = label_map
    return label_map


def _prediction_payload(label_map: np.ndarray) -> dict:
    return {
        "height": int(label_map.shape[0]),
        "width": int(label_map.shape[1]),
        "instances": [
            {
                "instance_id": iid,
                "rle": {"counts": rle_encode(mask), "order": "row-major", "start_value": 0},
            }
            for iid, mask in sorted(instance_masks(label_map).items())
        ],
    }


class SessionCreateBody(BaseModel):
    image: str  # base64-encoded PNG


class ClickBody(BaseModel):
    row: int
    col: int
    instance_id: int
    polarity: str = "pos"


class ClicksBody(BaseModel):
    clicks: list[ClickBody]


def build_app(
    predictor_cfg: PredictorConfig = PredictorConfig(),
    export_dir: str = "exports",
    static_dir: Optional[str] = None,
) -> FastAPI:
    app = FastAPI(title="clickforge annotation service")
    predictor = Predictor(predictor_cfg)
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def get_session(session_id: str) -> Session:
        with registry_lock:
            session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id}")
        return session

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "predictor": predictor.kind}

    @app.post("/sessions")
    def create_session(body: SessionCreateBody):
        try:
            raw = base64.b64decode(body.image)
            with Image.open(io.BytesIO(raw)) as img:
                image = np.asarray(img.convert("RGB"), dtype=np.uint8)
        except Exception as exc:
            raise HTTPException(status_code=400, detail=f"could not decode image: {exc}")
        session_id = secrets.token_hex(8)
        with registry_lock:
            sessions[session_id] = Session(id=session_id, image=image)
        return {"session_id": session_id}

    @app.put("/sessions/{session_id}/clicks")
    def put_clicks(session_id: str, body: ClicksBody):
        session = get_session(session_id)
        h, w = session.image.shape[:2]
        try:
            clicks = tuple(
                Click(c.row, c.col, c.instance_id, c.polarity) for c in body.clicks
            )
            for c in clicks:
                if not (0 <= c.row < h and 0 <= c.col < w):
                    raise ValidationError(f"click ({c.row}, {c.col}) outside {h}x{w} image")
            if len({c.instance_id for c in clicks}) != len(clicks):
                raise ValidationError("click instance ids must be unique")
            with session.lock:
                if clicks != session.clicks:
                    session.clicks = clicks
                    session.prediction = None
                label_map = predict_session(session, predictor)
        except ClickforgeError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"prediction": _prediction_payload(label_map)}

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str):
        session = get_session(session_id)
        with session.lock:
            prediction = (
                _prediction_payload(session.prediction) if session.prediction is not None else None
            )
            clicks = [c.to_json() for c in session.clicks]
        return {
            "session_id": session.id,
            "height": int(session.image.shape[0]),
            "width": int(session.image.shape[1]),
            "clicks": clicks,
            "prediction": prediction,
            "predictor": predictor.kind,
        }

    @app.post("/sessions/{session_id}/export")
    def export_session(session_id: str):
        session = get_session(session_id)
        with session.lock:
            try:
                label_map = predict_session(session, predictor)
                class_ids = {int(i): 1 for i in np.unique(label_map) if i != 0}
                label = ScenePseudoLabel(
                    scene_id=session.id,
                    instance_map=label_map,
                    class_ids=class_ids,
                    checkpoint_id=predictor.cfg.checkpoint_path or "classical",
                    click_source="user_clicks",
                )
                base = Scene(id=session.id, image=session.image)
                scene = pseudo_label_scene(base, label) if class_ids else base
            except ClickforgeError as exc:
                raise HTTPException(status_code=400, detail=str(exc))
            out = Path(export_dir) / session.id
            (out / "images").mkdir(parents=True, exist_ok=True)
            (out / "annotations").mkdir(parents=True, exist_ok=True)
            write_scene(
                scene,
                out / "images" / f"{scene.id}.png",
                out / "annotations" / f"{scene.id}.json",
                extra={
                    "source": "pseudo",
                    "checkpoint_id": label.checkpoint_id,
                    "click_source": "user_clicks",
                },
            )
            write_instance_map(label_map, out / "annotations" / f"{scene.id}_instances.png")
            files = sorted(str(p.relative_to(out)) for p in out.rglob("*") if p.is_file())
            manifest = {"session_id": session.id, "files": files, "clicks": [c.to_json() for c in session.clicks]}
            with open(out / "manifest.json", "w") as fh:
                json.dump(manifest, fh, indent=1)
        return {"session_id": session.id, "out_dir": str(out), "files": files + ["manifest.json"]}

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    else:

        @app.get("/", response_class=HTMLResponse)
        def index():
            return (
                "<html><body><h3>clickforge annotation service</h3>"
                "<p>No UI bundle found. Build the frontend and pass --static-dir, "
                "or use the JSON API (see /docs).</p></body></html>"
            )

    return app
