import time
import numpy as np
import clickforge.train as T
from clickforge.clicks import EncodingConfig
from clickforge.synth import SynthConfig, gen_dataset
from clickforge.losses import ClassAreaStats
from clickforge.evaluate import evaluate_regime

synth = SynthConfig(min_objects=4, max_objects=8, seed=0)
train_set = gen_dataset(synth, 40)
eval_set = gen_dataset(synth, 20, start_index=100000)

def run(tag, cfg, stats_fn=None):
    orig = T.standard_area_stats
    if stats_fn: T.standard_area_stats = stats_fn
    t0 = time.perf_counter()
    tr, params = T.train_standard(train_set, cfg)
    dt = time.perf_counter() - t0
    T.standard_area_stats = orig
    rep = evaluate_regime(params, tr.net, eval_set, "standard", cfg.encoding)
    print(f"{tag}: {dt:.0f}s loss {tr.loss_trace[-1]:.4f} miou {rep['miou']:.3f} "
          f"pq {rep['pq']:.1f} rq {rep['rq']:.1f}", flush=True)

def dataset_area_stats(dataset):
    fg = sum(a.area for s, _ in dataset for a in s.annotations)
    bg = sum(s.height * s.width for s, _ in dataset) - fg
    return ClassAreaStats(areas={1: fg}, background_area=bg)

run("B milder-weights lr1e-3 40ep", T.TrainConfig(epochs=40, lr=1e-3, seed=0), dataset_area_stats)
run("C sigma5 lr1e-3 40ep", T.TrainConfig(epochs=40, lr=1e-3, seed=0, encoding=EncodingConfig(sigma=5.0)))
run("A lr1e-3 100ep", T.TrainConfig(epochs=100, lr=1e-3, seed=0))
