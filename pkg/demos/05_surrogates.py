"""Random forest and gradient boosting as stand-ins for the simulator."""

# %%
from dtnopt.dataset import FEATURES, synthetic_dataset
from dtnopt.surrogate import (REFERENCE_PROFILES, evaluate, feature_importance, grid_search,
                              make_model, select_top_k, train_test_split)

# A cheap synthetic table with the same columns as a sweep.
ds = synthetic_dataset(600, seed=0, noise=0.01)
y = ds.target("delivery_prob")
train, test = train_test_split(len(ds), 0.2, seed=0)

# %%
for family, params in (("rf", {}), ("gbm", {}), ("gbm", REFERENCE_PROFILES["gbm"])):
    model = make_model(family, params, seed=0).fit(ds.X[train], y[train])
    m = evaluate(y[test], model.predict(ds.X[test]))
    print(f"{family:3s} {'reference' if params else 'default':7s} R2={m.r_squared:.3f} "
          f"RMSE={m.rmse:.4f}")

# %%
# Five-fold grid search over tree depth.
best, table = grid_search(ds.X[train], y[train], "gbm", {"max_depth": [1, 2, 3]}, k=5)
print("best:", best, [round(row["mean_mse"], 5) for row in table])

# %%
rf = make_model("rf", {"n_estimators": 50}, seed=0).fit(ds.X, y)
imp = feature_importance(rf, FEATURES)
print(select_top_k(imp, 3))
