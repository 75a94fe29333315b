# %% [markdown]
# # Dataset statistics and the Frechet distance
#
# A dataset is summarised by the mean and covariance of its feature vectors.
# Two datasets are compared by the Frechet distance between the Gaussians
# with those moments. This script walks through the kernels on toy data.

# %%
import numpy as np

from autoeval.stats import compute_stats, frechet_distance, spearman_rho, sqrtm_psd

rng = np.random.default_rng(0)

# %% [markdown]
# Sample covariance uses the M - 1 divisor and is exactly symmetric.

# %%
x = rng.normal(size=(200, 3))
ref = compute_stats(x)
print("mean", np.round(ref.mean, 3))
print("cov\n", np.round(ref.cov, 3))

# %% [markdown]
# The distance grows as the second dataset drifts away, in the mean or in spread.

# %%
for shift in (0.0, 0.5, 1.0, 2.0):
    for scale in (1.0, 2.0):
        other = compute_stats(rng.normal(shift, scale, size=(200, 3)))
        print(f"shift {shift:.1f} scale {scale:.1f}: FD = {frechet_distance(ref, other):7.3f}")

# %% [markdown]
# The matrix square root goes through a symmetric eigendecomposition, so it
# stays real and symmetric even for nearly singular covariances.

# %%
b = rng.normal(size=(6, 6))
a = b.T @ b + 0.1 * np.eye(6)
s = sqrtm_psd(a)
print("round-trip error", np.linalg.norm(s @ s - a) / np.linalg.norm(a))

# %% [markdown]
# Spearman's rho uses average ranks for ties.

# %%
print(spearman_rho([1, 2, 3, 4], [2, 1, 4, 3]))
print(spearman_rho([5, 5, 7, 9], [1, 2, 8, 8]))
