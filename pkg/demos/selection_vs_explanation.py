"""Walk through one classifier end to end on synthetic API-call data.

Trains the two arms (all columns, RFECV-selected columns), explains the
all-columns model with Kernel SHAP, and lists the selected features that do
not appear among the top-k most influential ones.

    python demos/selection_vs_explanation.py [LR|SGD|KNN|NB|RF|SVM]
"""
import sys

import numpy as np

from ransomxai.data import stratified_split, synth_data1_like
from ransomxai.explain import ShapConfig, explain_dataset, sample_background, summarize
from ransomxai.pipeline import PipelineConfig, run_pipeline
from ransomxai.report import difference_list
from ransomxai.rfecv import RfecvConfig
from ransomxai.search import SearchConfig

kind = sys.argv[1] if len(sys.argv) > 1 else "LR"
ds = synth_data1_like(seed=1, rows_per_class=40)
split = stratified_split(ds, 0.2, seed=1)
train, test = ds.take(split.train), ds.take(split.test)
informative = {ds.feature_names[j] for j in ds.metadata["informative"]}
print(f"{ds.n_rows} rows, {ds.n_features} columns, {len(informative)} informative")

search = SearchConfig(n_iter=4, cv_folds=3)
without = run_pipeline(PipelineConfig(kind, search=search, seed=1), train, test)
with_fs = run_pipeline(PipelineConfig(kind, search=search, seed=1,
                                      rfecv=RfecvConfig(min_features_to_select=34, cv_folds=3)),
                       train, test)
print(f"accuracy without selection {without.report.accuracy:.2f}, with {with_fs.report.accuracy:.2f}")
sel = with_fs.rfecv
print(f"RFECV kept {sel.n_selected} columns, {len(informative & set(sel.selected))} of them informative")

# explain the all-columns model on a few test rows
Xtr = without.preprocessor.transform(train).to_matrix()
Xte = without.preprocessor.transform(test).to_matrix()
cfg = ShapConfig(background_size=30, n_coalition_samples=512, seed=1)
rows = np.random.default_rng(1).choice(len(Xte), 20, replace=False)
shap = explain_dataset(without.model, Xte[rows], sample_background(Xtr, cfg), cfg)
ranking = summarize(shap)
k = sel.n_selected
print(f"top 10 of {len(ranking.features)} by mean |SHAP|:")
for name, value in list(zip(ranking.features, ranking.mean_abs))[:10]:
    mark = "*" if name in informative else " "
    print(f"  {mark} {name:40s} {value:.4f}")

ranks = dict(zip(sel.feature_names, sel.ranking))
missing = difference_list(sel.selected, ranks, ranking.features[:k])
print(f"{len(missing)} selected columns fall outside the top {k}:")
for name in missing:
    print("   ", name)
