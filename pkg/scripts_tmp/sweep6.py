import time
import numpy as np
from clickforge.synth import SynthConfig, gen_dataset
from clickforge.train import TrainConfig, train_standard, train_panoptic
from clickforge.evaluate import evaluate_regime, panoptic_scores_over
from clickforge.fusion import FusionConfig
from clickforge.net import save_checkpoint

synth = SynthConfig(min_objects=4, max_objects=8, min_separation=16.0, seed=0)
train_set = gen_dataset(synth, 40)
eval_set = gen_dataset(synth, 20, start_index=100000)
val_set = train_set[:10]

# Y: center-head, longer + calibration of extraction on train-side scenes
hw = {"semantic": 1.0, "offset": 0.01, "center": 10.0}
cfgc = TrainConfig(epochs=250, seed=0, head_weights=hw, center_sigma=4.0)
t0 = time.perf_counter()
runc, paramsc = train_panoptic(train_set, cfgc, center_head=True)
save_checkpoint("/tmp/center250.cfk", runc.net, paramsc)
clicks_rq = panoptic_scores_over(paramsc, runc.net, eval_set).rq
print(f"Y center 250ep: {time.perf_counter()-t0:.0f}s clicks rq {clicks_rq:.1f}", flush=True)
for thr in (0.05, 0.1, 0.2, 0.3):
    for win in (5, 7):
        fus = FusionConfig(center_threshold=thr, nms_window=win)
        val = panoptic_scores_over(paramsc, runc.net, val_set, fusion=fus, use_predicted_centers=True)
        print(f"  val thr={thr} win={win}: rq {val.rq:.1f} tp {val.tp} fp {val.fp} fn {val.fn}", flush=True)

# X1: standard capacity probe
t0 = time.perf_counter()
cfgx = TrainConfig(epochs=80, lr=1e-3, seed=0, base_width=12)
runx, px = train_standard(train_set, cfgx)
rep = evaluate_regime(px, runx.net, eval_set, "standard", cfgx.encoding)
print(f"X1 std bw12 80ep: {time.perf_counter()-t0:.0f}s miou {rep['miou']:.3f} pq {rep['pq']:.1f}", flush=True)
