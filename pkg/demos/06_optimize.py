"""Sweep, fit, search with differential evolution, then re-simulate."""

# %%
import numpy as np

from dtnopt import harness
from dtnopt.optimizer import DEConfig, ObjectiveSpec, default_box, recommend_and_validate
from dtnopt.surrogate import make_model

base, trace = harness.desk_scenario()
ds = harness.sweep(harness.SweepPlan(runs=60, seed=1), base, trace).clean()
dp, oh = ds.target("delivery_prob"), ds.target("overhead_ratio")

# %%
spec = ObjectiveSpec.from_dataset(
    ds, make_model("gbm", {}, 0).fit(ds.X, dp), make_model("gbm", {}, 0).fit(ds.X, oh),
    weights=(0.5, 0.5))
rec = recommend_and_validate(spec, default_box(), DEConfig(seed=0),
                             lambda f: harness.simulate_features(base, trace, f))
print(rec.to_text())

# %%
print(f"sweep medians: delivery={np.median(dp):.3f} overhead={np.median(oh):.2f}")
