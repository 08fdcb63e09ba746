"""Epidemic against MaxProp on the same trace and message schedule."""

# %%
import numpy as np

from dtnopt import harness
from dtnopt.engine import run

base, trace = harness.desk_scenario(duration=1200)
rows = []
for seed in range(5):
    for router in ("Epidemic", "MaxProp"):
        cfg = harness.apply_features(base, harness.features_of(base), seed=seed)
        cfg.router = router
        rep, _ = run(cfg, trace)
        rows.append((router, seed, rep.delivery_prob, rep.overhead_ratio))

# %%
# MaxProp ranks by delivery likelihood and purges acknowledged copies, so it
# needs fewer relays per delivery.
for router in ("Epidemic", "MaxProp"):
    dp = np.mean([r[2] for r in rows if r[0] == router])
    oh = np.mean([r[3] for r in rows if r[0] == router])
    print(f"{router:9s} delivery={dp:.3f} overhead={oh:.2f}")
