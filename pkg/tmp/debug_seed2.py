"""Seed-2 recheck after warm-start retraining."""
import time

from micl.ablation import run_ablation
from micl.curriculum import MiclConfig
from micl.synthdata import GenConfig, generate_dataset

t0 = time.time()
scenes = generate_dataset(GenConfig(
    n_images=200, rng_seed=2,
    easy_object_prob=0.95, adjacent_pair_prob=0.2, part_scale=2.2,
))
res = run_ablation(scenes, MiclConfig(rng_seed=2))
f = res.final_corloc
print(f"seed 2: msc={f['msc']:.1f} ssg={f['ssg']:.1f} mil={f['mil']:.1f} micl={f['micl']:.1f}")
print(f"  r0 det={res.round0_corloc_det:.1f} ssg={res.round0_corloc_ssg:.1f} sub={res.round0_corloc_subset:.1f}")
for m in res.metrics["micl"]:
    print(f"  micl round {m.round_index}: n_sel={m.n_selected} sel={m.corloc_selected:.1f} all={m.corloc_all:.1f}")
print(f"  {time.time() - t0:.1f}s")
