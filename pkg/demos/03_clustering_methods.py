"""Compare the four segmentation back-ends on one learned representation.

Equal split is the no-information baseline; k-means, the first-neighbor
agglomeration, and spectral clustering all receive the true class count.
"""

import numpy as np

from tsaseg import RunConfig, SynthSpec, equal_split, finch, generate, kmeans, score, spectral, train

features, gt = generate(
    SynthSpec(n_segments=6, frames_per_segment=(25, 30), dims=16,
              n_action_classes=4, noise_sigma=0.25, seed=3)
)
k = len(gt.names)
_, z, _ = train(features, RunConfig(L=6, batch_size=25, seed=3, max_epochs=8))

rng = np.random.default_rng(0)
candidates = {
    "equal split": equal_split(z.n_frames, k),
    "kmeans": kmeans(z, k, np.random.default_rng(0)),
    "finch": finch(z, required_k=k),
    "spectral": spectral(z, k, np.random.default_rng(0)),
}
print(f"{'method':<12} {'MoF':>6} {'IoU':>6} {'F1':>6}")
for name, seg in candidates.items():
    s, _ = score(seg, gt)
    print(f"{name:<12} {s.mof:>6.3f} {s.iou:>6.3f} {s.f1:>6.3f}")

# the parameter-free hierarchy, for reference
levels = finch(z)
print("\nfirst-neighbor hierarchy cluster counts:", [lv.k for lv in levels])
