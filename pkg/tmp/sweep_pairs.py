"""Sweep adjacent_pair_prob to carve MIL strictly below MICL."""
import sys
import time

import numpy as np

from micl.ablation import modal_error, run_ablation
from micl.curriculum import MiclConfig
from micl.evaluation import ErrorType
from micl.synthdata import GenConfig, generate_dataset

pair = float(sys.argv[1])
t0 = time.time()
rows = []
for seed in range(5):
    scenes = generate_dataset(GenConfig(
        n_images=200, rng_seed=seed,
        easy_object_prob=0.95, adjacent_pair_prob=pair, part_scale=2.2,
    ))
    res = run_ablation(scenes, MiclConfig(rng_seed=seed))
    f = res.final_corloc
    rows.append((f, res, modal_error(res.det_error_counts), modal_error(res.ssg_error_counts)))
    print(f"seed {seed}: msc={f['msc']:.1f} ssg={f['ssg']:.1f} "
          f"mil={f['mil']:.1f} micl={f['micl']:.1f} | "
          f"r0 det={res.round0_corloc_det:.1f} ssg={res.round0_corloc_ssg:.1f} "
          f"sub={res.round0_corloc_subset:.1f}")

med = {a: float(np.median([r[0][a] for r in rows])) for a in ("msc", "ssg", "mil", "micl")}
print(f"pair={pair} medians: msc={med['msc']:.1f} ssg={med['ssg']:.1f} "
      f"mil={med['mil']:.1f} micl={med['micl']:.1f}")
print(f"c6: {med['msc'] < med['ssg']} {med['ssg'] <= med['mil']} "
      f"{med['mil'] < med['micl']} gap={med['micl'] - med['msc']:.1f}")
print(f"c7: {all(r[1].round0_corloc_subset > r[1].round0_corloc_ssg > r[1].round0_corloc_det for r in rows)}")
print(f"c8: ssg_TL={sum(1 for r in rows if r[3] == ErrorType.TOO_LARGE)}/5 "
      f"det_TS={sum(1 for r in rows if r[2] == ErrorType.TOO_SMALL)}/5")
print(f"{time.time() - t0:.1f}s")
