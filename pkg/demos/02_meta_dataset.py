# %% [markdown]
# # Building a meta-dataset
#
# Glyph images with known foreground masks are rendered, a small classifier
# is trained on them, and many shifted copies of a seed set are synthesised.
# Each copy swaps in a textured background and applies three random image
# transforms. Every copy becomes one record: its feature statistics, its
# distance to the training features, and the classifier's true accuracy.

# %%
import numpy as np

from autoeval.config import ExperimentConfig
from autoeval.harness import Workbench, run_correlation_study

cfg = ExperimentConfig(meta_size=40, jobs=0)
bench = Workbench(cfg)
print(f"classifier accuracy on the clean seed set: {bench.seed_accuracy:.3f}")

# %% [markdown]
# A recipe records everything needed to regenerate a sample set.

# %%
records = bench.records(stream=0, indices=range(5))
for rec, _ in records:
    print(rec.id, rec.recipe.ids, f"fd={rec.fd:8.2f}", f"acc={rec.accuracy:.3f}")

# %% [markdown]
# Across the meta set, larger distances go with lower accuracy.

# %%
rho, points = run_correlation_study(cfg, bench)
fd, acc = np.array(points).T
print(f"Spearman rho over {len(points)} sets: {rho:.3f}")
for lo, hi in [(0, 50), (50, 200), (200, 500), (500, np.inf)]:
    sel = (fd >= lo) & (fd < hi)
    if sel.any():
        print(f"fd in [{lo}, {hi}): {sel.sum():3d} sets, mean accuracy {acc[sel].mean():.3f}")
