import time
from clickforge.synth import SynthConfig, gen_dataset
from clickforge.train import TrainConfig, train_standard, train_panoptic
from clickforge.evaluate import evaluate_regime

synth = SynthConfig(min_objects=4, max_objects=8, min_separation=16.0, seed=0)
train_set = gen_dataset(synth, 40)
eval_set = gen_dataset(synth, 20, start_index=100000)
ns = [len(s.annotations) for s, _ in train_set]
print(f"sep16 mean N: {sum(ns)/len(ns):.2f} total {sum(ns)}", flush=True)

t0 = time.perf_counter()
cfg = TrainConfig(epochs=110, lr=1e-3, seed=0)
run, params = train_standard(train_set, cfg)
rep = evaluate_regime(params, run.net, eval_set, "standard", cfg.encoding)
print(f"sep16 std-110ep: {time.perf_counter()-t0:.0f}s loss {run.loss_trace[-1]:.4f} miou {rep['miou']:.3f} pq {rep['pq']:.1f} rq {rep['rq']:.1f}", flush=True)

t0 = time.perf_counter()
runp, paramsp = train_panoptic(train_set, TrainConfig(epochs=170, seed=0))
rep = evaluate_regime(paramsp, runp.net, eval_set, "panoptic", cfg.encoding)
print(f"sep16 pan-170ep: {time.perf_counter()-t0:.0f}s loss {runp.loss_trace[-1]:.4f} miou {rep['miou']:.3f} pq {rep['pq']:.1f} rq {rep['rq']:.1f}", flush=True)

t0 = time.perf_counter()
runn, paramsn = train_standard(train_set, TrainConfig(epochs=80, lr=1e-3, seed=0), use_negatives=True)
rep = evaluate_regime(paramsn, runn.net, eval_set, "negative", cfg.encoding)
print(f"sep16 neg-80ep: {time.perf_counter()-t0:.0f}s loss {runn.loss_trace[-1]:.4f} miou {rep['miou']:.3f} pq {rep['pq']:.1f} rq {rep['rq']:.1f}", flush=True)

t0 = time.perf_counter()
runc, paramsc = train_panoptic(train_set, TrainConfig(epochs=170, seed=0), center_head=True)
from clickforge.evaluate import missing_click_ablation
scores = missing_click_ablation(paramsc, runc.net, eval_set, seed=0)
print(f"sep16 center-170ep: {time.perf_counter()-t0:.0f}s clicks rq {scores['user_clicks'].rq:.1f} " +
      " ".join(f"{int(f*100)}%:{s.rq:.1f}" for f, s in sorted(scores['predicted'].items())), flush=True)
