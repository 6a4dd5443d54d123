"""Compiled kernels vs the numpy fallback, per kernel and per training step.

    python benchmarks/bench_kernels.py [--repeats 20] [--csv out.csv]

Kernel shapes match one default training step (batch 128, 33 image tokens,
width 64). The step timing runs in a child process per backend because the
backend is fixed at import.
"""

import argparse
import csv
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from glip_lab import _fallback

try:
    from glip_lab import _ckernels
except ImportError:
    _ckernels = None

STEP_SCRIPT = r"""
import json, time
import numpy as np
from glip_lab import autodiff as ad, kernels, synth
from glip_lab.encoders import ModelParams, encode_image, encode_text
from glip_lab.objective import SimilarityBatch, info_nce
from glip_lab.trainer import TrainConfig, batch_masks

cfg = TrainConfig()
vocab = synth.CaptionVocab.default()
ds = synth.generate(cfg.batch_size, synth.PlacementPolicy(), 0)
params = ModelParams.init(cfg.vit_config(), cfg.text_config(len(vocab)), seed=0, dtype=cfg.dtype)
idx = np.arange(cfg.batch_size)

def step(i):
    plans = batch_masks(cfg, cfg.vit_config().grid, i, idx, cfg.mask_ratio)
    params.zero_grad()
    img = encode_image(ds.images, plans, params)
    txt = encode_text(ds.tokens, params)
    loss = info_nce(SimilarityBatch(img, txt, params.logit_scale()))
    ad.backward(loss, params.parameters())

step(0)
times = []
for i in range(REPEATS):
    t = time.perf_counter()
    step(i + 1)
    times.append(time.perf_counter() - t)
print(json.dumps({"backend": kernels.backend(), "median": float(np.median(times))}))
"""


def kernel_cases(rng):
    x = rng.normal(size=(128 * 33, 64))
    h = rng.normal(size=(128 * 33, 128))
    scores = rng.normal(size=(128 * 2 * 33, 33))
    gain, bias = rng.normal(size=64), rng.normal(size=64)
    keys = rng.gumbel(size=(128, 64))
    idx = rng.integers(0, 65, size=128 * 32)
    src = rng.normal(size=(128 * 32, 64))

    def cases(impl):
        y, xhat, rstd = impl.layernorm_forward(x, gain, bias, 1e-5)
        out, t = impl.gelu_forward(h)
        p = impl.softmax_forward(scores)
        return {
            "layernorm_forward": lambda: impl.layernorm_forward(x, gain, bias, 1e-5),
            "layernorm_backward": lambda: impl.layernorm_backward(x, np.asarray(xhat), np.asarray(rstd), gain),
            "gelu_forward": lambda: impl.gelu_forward(h),
            "gelu_backward": lambda: impl.gelu_backward(h, np.asarray(t), h),
            "softmax_forward": lambda: impl.softmax_forward(scores),
            "softmax_backward": lambda: impl.softmax_backward(np.asarray(p), scores),
            "topk_sorted": lambda: impl.topk_sorted(keys, 32),
            "scatter_add_rows": lambda: impl.scatter_add_rows(np.zeros((65, 64)), idx, src),
        }

    return cases


def time_call(fn, repeats):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeats))


def step_time(pure: bool, repeats: int) -> dict:
    env = {**os.environ, "GLIP_PURE_PYTHON": "1" if pure else ""}
    code = STEP_SCRIPT.replace("REPEATS", str(repeats))
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=20, help="timing repeats per measurement")
    ap.add_argument("--step-repeats", type=int, default=5, help="training steps timed per backend")
    ap.add_argument("--csv", default=None, help="also write the table to this CSV file")
    args = ap.parse_args(argv)

    cases = kernel_cases(np.random.default_rng(0))
    rows = []
    py_cases = cases(_fallback)
    cy_cases = cases(_ckernels) if _ckernels is not None else {}
    for name, fn in py_cases.items():
        t_py = time_call(fn, args.repeats)
        t_cy = time_call(cy_cases[name], args.repeats) if name in cy_cases else float("nan")
        rows.append((name, t_cy, t_py))
    steps = {"python": step_time(True, args.step_repeats)["median"]}
    if _ckernels is not None:
        steps["cython"] = step_time(False, args.step_repeats)["median"]
    rows.append(("training_step", steps.get("cython", float("nan")), steps["python"]))

    print(f"{'kernel':<20} {'cython ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, t_cy, t_py in rows:
        print(f"{name:<20} {t_cy * 1e3:>10.3f} {t_py * 1e3:>10.3f} {t_py / t_cy:>8.2f}")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["kernel", "cython_s", "numpy_s"])
            w.writerows(rows)


if __name__ == "__main__":
    main()
