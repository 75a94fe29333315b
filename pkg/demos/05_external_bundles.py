# %% [markdown]
# # Scoring an external feature bundle
#
# Features computed elsewhere can be scored by writing them in the binary
# bundle format and calling the command-line predictor. Here a bundle is
# produced from a synthetic test set, and the predictors are fitted with
# the `fit` subcommand on a small configuration.

# %%
import tempfile
from pathlib import Path

from autoeval.cli import main
from autoeval.config import ExperimentConfig, dump_config
from autoeval.formats import read_bundle, read_classifier, write_bundle
from autoeval.harness import Workbench

work = Path(tempfile.mkdtemp())
cfg = ExperimentConfig(meta_size=60, jobs=0, out_dir=str(work))
(work / "demo.ini").write_text(dump_config(cfg))

# %%
main(["fit", "--config", str(work / "demo.ini")])

# %% [markdown]
# Reuse the fitted classifier to produce a labelled bundle for a new set.

# %%
bench = Workbench(cfg, clf=read_classifier(work / "classifier.aecl"))
(_, bundle), = bench.records(stream=1, indices=[0])
path = write_bundle(work / "new_set.aefb", bundle)
print(read_bundle(path).features.shape)

# %%
main(["predict", str(path), "--config", str(work / "demo.ini"), "--with-truth"])
