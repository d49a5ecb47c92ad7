import numpy as np

from micl.curriculum import (
    MiclConfig,
    CurriculumState,
    ExampleRecord,
    build_pooled_cache,
    micl_run,
    relocalize,
    roi_training_targets,
    _RETRAIN_TAG,
)
from micl.detector import train_on_roi_labels
from micl.evaluation import corloc
from micl.segmenter import RegionGrowConfig, RegionGrowSegmenter
from micl.synthdata import GenConfig, generate_dataset

cfg = GenConfig(n_images=100, rng_seed=3)
scenes = generate_dataset(cfg)
mcfg = MiclConfig(max_rounds=0, rng_seed=5)
res0 = micl_run(scenes, mcfg)  # round-0 state with forced pseudo... careful: forcing!
# round-0 selections only: records selected and NOT forced
state0 = res0.state
pseudo = {
    k: r.pseudo_box
    for k, r in state0.records.items()
    if r.selected and not r.forced and r.pseudo_box is not None
}
print("round-0 selected:", len(pseudo))
gt = [o for s in scenes for o in s.gt]
pooled = build_pooled_cache(scenes, mcfg.pool_size)
flats, targets = roi_training_targets(scenes, pooled, pseudo, 3)
seg = RegionGrowSegmenter(RegionGrowConfig())

for epochs, lr in [(60, 0.1), (200, 0.5), (400, 1.0), (800, 1.0), (400, 2.0)]:
    model = train_on_roi_labels(
        flats, targets, 4, 8, 3, epochs=epochs, lr=lr, rng_seed=5 ^ _RETRAIN_TAG ^ 1
    )
    state = CurriculumState(threshold=0.5, max_rounds=0)
    for s in scenes:
        for c in s.labels:
            state.records[(s.image_id, c)] = ExampleRecord(s.image_id, c)
    warn = []
    relocalize(state, model, scenes, pooled, mcfg, seg, warn)
    det = {k: r.b_det for k, r in state.records.items()}
    ssg = {k: r.b_ssg for k, r in state.records.items()}
    n_s = sum(1 for r in state.records.values()
              if r.consistency is not None and r.consistency >= 0.5)
    print(
        f"epochs={epochs:4d} lr={lr:3.1f}: corloc_det {corloc(det, gt):5.1f} "
        f"corloc_ssg {corloc(ssg, gt):5.1f} S>=T {n_s:3d}/{len(state.records)} warn={len(warn)}"
    )
