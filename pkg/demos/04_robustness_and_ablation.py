# %% [markdown]
# # Unseen transforms and training-set size
#
# The regressors never see cutout, shear, equalisation or colour-temperature
# shifts during training. Test sets built only from those transforms check
# how well the estimates carry over. A second experiment varies the number
# of sample sets used to fit the regressors.

# %%
from autoeval.config import ExperimentConfig
from autoeval.harness import Workbench, fit_predictors, run_robustness_suite, run_size_ablation

cfg = ExperimentConfig(meta_size=90, n_test=15, meta_sizes=(20, 45, 90), ablation_val_size=30,
                       heldout_per_variant=2, jobs=0)
bench = Workbench(cfg)
predictors = fit_predictors(cfg, bench.meta_dataset(), bench.ori_stats)

# %%
report = run_robustness_suite(cfg, bench, predictors)
print(report.to_table())
for row in report.rows:
    print(row["name"], "+".join(row["transforms"]))

# %% [markdown]
# Mean absolute errors (accuracy units) against meta-set size.

# %%
print(run_size_ablation(cfg, bench, axes=("meta_size",)).to_text())
