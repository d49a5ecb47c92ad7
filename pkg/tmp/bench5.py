"""Five-seed ordering benchmark: criteria 6, 7, 8 preview."""
import time

from micl.ablation import modal_error, run_ablation
from micl.curriculum import MiclConfig
from micl.evaluation import ErrorType
from micl.synthdata import GenConfig, generate_dataset

import numpy as np

t0 = time.time()
rows = []
for seed in range(5):
    scenes = generate_dataset(GenConfig(n_images=200, rng_seed=seed))
    res = run_ablation(scenes, MiclConfig(rng_seed=seed))
    f = res.final_corloc
    det_m = modal_error(res.det_error_counts)
    ssg_m = modal_error(res.ssg_error_counts)
    rows.append((f, res, det_m, ssg_m))
    print(f"seed {seed}: msc={f['msc']:.1f} ssg={f['ssg']:.1f} "
          f"mil={f['mil']:.1f} micl={f['micl']:.1f} | "
          f"r0 det={res.round0_corloc_det:.1f} ssg={res.round0_corloc_ssg:.1f} "
          f"sub={res.round0_corloc_subset:.1f} | det_modal={det_m} ssg_modal={ssg_m}")

med = {a: float(np.median([r[0][a] for r in rows])) for a in ("msc", "ssg", "mil", "micl")}
print(f"\nmedians: msc={med['msc']:.1f} ssg={med['ssg']:.1f} "
      f"mil={med['mil']:.1f} micl={med['micl']:.1f}")
print(f"c6 order: msc<ssg {med['msc'] < med['ssg']}, ssg<=mil {med['ssg'] <= med['mil']}, "
      f"mil<micl {med['mil'] < med['micl']}, gap>=10 {med['micl'] - med['msc'] >= 10}")
c7 = all(r[1].round0_corloc_subset > r[1].round0_corloc_ssg > r[1].round0_corloc_det
         for r in rows)
print(f"c7 per-seed sub>ssg>det: {c7}")
n_tl = sum(1 for r in rows if r[3] == ErrorType.TOO_LARGE)
n_ts = sum(1 for r in rows if r[2] == ErrorType.TOO_SMALL)
print(f"c8 ssg TOO_LARGE {n_tl}/5, det TOO_SMALL {n_ts}/5")
print(f"total {time.time() - t0:.1f}s")
