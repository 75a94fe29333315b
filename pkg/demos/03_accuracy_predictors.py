# %% [markdown]
# # Predicting accuracy without labels
#
# Three estimators are compared on freshly synthesised test sets:
# thresholded softmax confidence, a robust line through (FD, accuracy),
# and a small network on the FD, the mean vector and a learned reduction of
# the covariance matrix.

# %%
from autoeval.config import ExperimentConfig
from autoeval.harness import Workbench, fit_predictors, run_method_comparison

cfg = ExperimentConfig(meta_size=90, n_test=15, jobs=0)
bench = Workbench(cfg)
meta = bench.meta_dataset()
predictors = fit_predictors(cfg, meta, bench.ori_stats)
print(f"linear: acc = {predictors.linear.w0:.3f} + ({predictors.linear.w1:.2e}) * fd")
print(f"neural: best validation RMSE {predictors.neural.best_val_rmse:.3f}")

# %% [markdown]
# All accuracies in the table are percentages.

# %%
report = run_method_comparison(cfg, None, bench, predictors)
print(report.to_table())
