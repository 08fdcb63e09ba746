"""A small parameter sweep, then correlations and box statistics."""

# %%
import numpy as np

from dtnopt import harness
from dtnopt.dataset import COLUMNS
from dtnopt.metrics import box_stats, pearson_matrix

base, trace = harness.desk_scenario(duration=900)
plan = harness.SweepPlan(runs=40, seed=0)  # uniform over the reference ranges
ds = harness.sweep(plan, base, trace, workers=2).clean()
print(ds.to_csv().splitlines()[:3])

# %%
r = pearson_matrix(ds.table())
for i, name in enumerate(COLUMNS[:8]):
    print(f"{name:28s} r(dp)={r[i, 8]:+.2f}  r(oh)={r[i, 9]:+.2f}")

# %%
router = ds.X[:, 4]
for label, mask in (("Epidemic", router == 0), ("MaxProp", router == 1)):
    b = box_stats(ds.target("overhead_ratio")[mask])
    print(label, np.round([b.minimum, b.q1, b.median, b.q3, b.maximum], 2))
