import time
from clickforge.synth import SynthConfig, gen_dataset
from clickforge.train import TrainConfig, train_standard
from clickforge.evaluate import evaluate_regime

synth = SynthConfig(min_objects=4, max_objects=8, seed=0)
train_set = gen_dataset(synth, 40)
eval_set = gen_dataset(synth, 20, start_index=100000)

for lr in (1e-3, 3e-3, 3e-4):
    t0 = time.perf_counter()
    cfg = TrainConfig(epochs=40, lr=lr, seed=0)
    run, params = train_standard(train_set, cfg)
    dt = time.perf_counter() - t0
    report = evaluate_regime(params, run.net, eval_set, "standard", cfg.encoding)
    print(f"standard lr={lr} epochs=40: {dt:.0f}s loss {run.loss_trace[-1]:.4f} "
          f"miou {report['miou']:.3f} pq {report['pq']:.1f} rq {report['rq']:.1f}", flush=True)
