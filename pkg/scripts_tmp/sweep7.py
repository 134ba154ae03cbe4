import time
import numpy as np
from clickforge.synth import SynthConfig, gen_dataset
from clickforge.train import TrainConfig, train_standard, train_panoptic
from clickforge.evaluate import evaluate_regime

for noise in (22.0, 30.0):
    synth = SynthConfig(min_objects=4, max_objects=8, min_separation=16.0, noise=noise, seed=0)
    train_set = gen_dataset(synth, 40)
    eval_set = gen_dataset(synth, 20, start_index=100000)
    t0 = time.perf_counter()
    cfgp = TrainConfig(epochs=170, seed=0)
    runp, pp = train_panoptic(train_set, cfgp)
    repp = evaluate_regime(pp, runp.net, eval_set, "panoptic", cfgp.encoding)
    print(f"noise{noise} pan-170ep: {time.perf_counter()-t0:.0f}s miou {repp['miou']:.3f} pq {repp['pq']:.1f} rq {repp['rq']:.1f}", flush=True)
    t0 = time.perf_counter()
    cfgs = TrainConfig(epochs=60, lr=1e-3, seed=0)
    runs, ps = train_standard(train_set, cfgs)
    reps = evaluate_regime(ps, runs.net, eval_set, "standard", cfgs.encoding)
    print(f"noise{noise} std-60ep: {time.perf_counter()-t0:.0f}s miou {reps['miou']:.3f} pq {reps['pq']:.1f}", flush=True)
