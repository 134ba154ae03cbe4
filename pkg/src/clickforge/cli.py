"""Command-line interface.

Subcommands: encode, train, fuse, eval, pseudolabel, bench, serve.
``--config`` points at a JSON file overriding synthetic-data, encoding,
and training defaults; ``--seed`` and ``--out`` are shared everywhere.
"""

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .clicks import Click, EncodingConfig, derive_click, gaussian_click_map
from .errors import ClickforgeError
from .evaluate import evaluate_regime, fused_instance_map
from .net import load_checkpoint, save_checkpoint
from .pipeline import export_dataset, generate_pseudo_labels, split_by_object_fraction
from .raster import read_scene, write_instance_map
from .synth import SynthConfig, gen_dataset
from .train import TrainConfig, train_panoptic, train_standard

REGIMES = ("standard", "negative", "panoptic", "panoptic_center")


def _load_config(path):
    if not path:
        return {}
    with open(path) as fh:
        return json.load(fh)


def _build(cls, doc: dict, section: str, **overrides):
    """Fill a config dataclass from a JSON section plus CLI overrides."""
    fields = {f.name for f in dataclasses.fields(cls)}
    kwargs = {k: v for k, v in doc.get(section, {}).items() if k in fields}
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return cls(**kwargs)


def _dataset_for(doc: dict, seed: int, split: str):
    synth = _build(SynthConfig, doc, "synth", seed=seed)
    counts = {"train": doc.get("train_scenes", 40), "eval": doc.get("eval_scenes", 20)}
    start = 0 if split == "train" else 100000
    return gen_dataset(synth, counts[split], start_index=start)


def _train_config(doc: dict, seed: int):
    encoding = _build(EncodingConfig, doc, "encoding")
    return _build(TrainConfig, doc, "train", seed=seed), encoding


def cmd_encode(args):
    scene = read_scene(args.image, args.annotation)
    rng = np.random.default_rng(args.seed)
    clicks = [derive_click(ann, rng) for ann in scene.annotations]
    encoding = _build(EncodingConfig, _load_config(args.config), "encoding")
    combined = gaussian_click_map(scene.height, scene.width, clicks, encoding)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "clicks.json", "w") as fh:
        json.dump([c.to_json() for c in clicks], fh, indent=1)
    np.save(out / "click_map.npy", combined)
    write_instance_map((combined * 65535).astype(np.int32), out / "click_map.png")
    print(f"encoded {len(clicks)} clicks -> {out}")


def cmd_train(args):
    doc = _load_config(args.config)
    cfg, encoding = _train_config(doc, args.seed)
    cfg = dataclasses.replace(cfg, encoding=encoding, epochs=args.epochs or cfg.epochs)
    dataset = _dataset_for(doc, args.seed, "train")
    if args.regime in ("standard", "negative"):
        run, params = train_standard(dataset, cfg, use_negatives=args.regime == "negative")
    else:
        run, params = train_panoptic(dataset, cfg, center_head=args.regime == "panoptic_center")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / f"{args.regime}.cfk"
    save_checkpoint(ckpt, run.net, params)
    with open(out / f"{args.regime}_run.json", "w") as fh:
        json.dump(run.to_json(), fh, indent=1)
    print(f"trained {run.regime}: final loss {run.loss_trace[-1]:.4f} -> {ckpt}")


def cmd_fuse(args):
    net_cfg, params = load_checkpoint(args.checkpoint)
    scene = read_scene(args.image, args.annotation)
    if args.clicks:
        with open(args.clicks) as fh:
            clicks = [Click.from_json(d) for d in json.load(fh)]
    else:
        rng = np.random.default_rng(args.seed)
        clicks = [derive_click(ann, rng) for ann in scene.annotations]
    encoding = _build(EncodingConfig, _load_config(args.config), "encoding")
    label_map = fused_instance_map(
        params, net_cfg, scene, clicks, encoding, use_predicted_centers=args.recover
    )
    write_instance_map(label_map, args.out)
    print(f"fused {len(clicks)} clicks -> {args.out}")


def cmd_eval(args):
    doc = _load_config(args.config)
    net_cfg, params = load_checkpoint(args.checkpoint)
    _, encoding = _train_config(doc, args.seed)
    dataset = _dataset_for(doc, args.seed, "eval")
    regime = args.regime
    if regime == "panoptic_center":
        regime = "panoptic_center_head"
    report = evaluate_regime(params, net_cfg, dataset, regime, encoding)
    text = json.dumps(report, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    print(text)


def cmd_pseudolabel(args):
    doc = _load_config(args.config)
    net_cfg, params = load_checkpoint(args.checkpoint)
    _, encoding = _train_config(doc, args.seed)
    dataset = _dataset_for(doc, args.seed, "train")
    scenes = [scene for scene, _ in dataset]
    rng = np.random.default_rng(args.seed)
    manifest = split_by_object_fraction(scenes, target=args.fraction, rng=rng)
    labelled = set(manifest.labelled)
    manual = [s for s in scenes if s.id in labelled]
    unlabelled_data = [(s, c) for s, c in dataset if s.id not in labelled]
    pseudo = generate_pseudo_labels(
        params,
        net_cfg,
        unlabelled_data,
        mode=args.mode,
        encoding=encoding,
        checkpoint_id=Path(args.checkpoint).name,
    )
    export_dataset(manifest, manual, [s for s, _ in unlabelled_data], pseudo, args.out)
    print(
        f"exported {len(manual)} manual + {len(pseudo.items)} pseudo scenes "
        f"(labelled fraction {manifest.achieved_fraction:.3f}) -> {args.out}"
    )


def cmd_bench(args):
    from . import bench

    if args.mode == "kernels":
        print(bench.format_kernel_table(bench.benchmark_kernels(repeats=args.repeats, seed=args.seed)))
        return
    doc = _load_config(args.config)
    cfg, encoding = _train_config(doc, args.seed)
    cfg = dataclasses.replace(cfg, encoding=encoding, epochs=args.epochs or 6)
    dataset = _dataset_for(doc, args.seed, "train")
    rows = bench.regime_rows(dataset, cfg)
    out = args.out or "bench.csv"
    bench.write_regime_csv(rows, out)
    print(f"wrote {len(rows)} rows -> {out}")


def cmd_serve(args):
    import uvicorn

    from .service import PredictorConfig, build_app

    if args.predictor.startswith("toy:"):
        predictor = PredictorConfig(kind="toy_model", checkpoint_path=args.predictor[4:])
    elif args.predictor == "classical":
        predictor = PredictorConfig(kind="classical")
    else:
        raise ClickforgeError(f"--predictor must be classical or toy:<checkpoint>, got {args.predictor}")
    app = build_app(predictor, export_dir=args.export_dir, static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clickforge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="JSON config file")
        return p

    p = common(sub.add_parser("encode", help="derive clicks and click maps from an annotation"))
    p.add_argument("--image", required=True)
    p.add_argument("--annotation", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_encode)

    p = common(sub.add_parser("train", help="train a regime on synthetic scenes"))
    p.add_argument("--regime", choices=REGIMES, required=True)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = common(sub.add_parser("fuse", help="fuse a checkpoint's prediction with clicks"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--annotation", required=True)
    p.add_argument("--clicks", help="clicks JSON (default: derive from the annotation)")
    p.add_argument("--recover", action="store_true", help="use predicted centers instead of clicks")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_fuse)

    p = common(sub.add_parser("eval", help="evaluate a checkpoint on the synthetic eval split"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--regime", choices=REGIMES, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_eval)

    p = common(sub.add_parser("pseudolabel", help="split, pseudo-label, and export a dataset"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=("standard", "negative", "panoptic"), default="panoptic")
    p.add_argument("--fraction", type=float, default=0.10)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_pseudolabel)

    p = common(sub.add_parser("bench", help="benchmark regimes (CSV) or kernels"))
    p.add_argument("--mode", choices=("regimes", "kernels"), default="regimes")
    p.add_argument("--epochs", type=int)
    p.add_argument("--repeats", type=int, default=15)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bench)

    p = common(sub.add_parser("serve", help="run the annotation HTTP service"))
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--predictor", default="classical", help="classical or toy:<checkpoint>")
    p.add_argument("--export-dir", default="exports")
    p.add_argument("--static-dir", help="built frontend bundle to serve at /")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except ClickforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
