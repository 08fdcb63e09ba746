"""Acceptance gate: one check per criterion, each reporting PASS or FAIL.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in
the terminal summary) or directly with ``python tests/test_acceptance.py``.
Thresholds and runtime budgets are fixed here and not tuned to results.
"""

import math
import os
import sys
import tempfile
import time
from collections import deque

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from conftest import static_trace  # noqa: E402
from dtnopt import harness  # noqa: E402
from dtnopt.engine import ScenarioConfig, Simulation, run  # noqa: E402
from dtnopt.metrics import pearson_matrix, report_from_log  # noqa: E402
from dtnopt.optimizer import (  # noqa: E402
    DEConfig,
    Dimension,
    ObjectiveSpec,
    ParamBox,
    default_box,
    differential_evolution,
    recommend_and_validate,
)
from dtnopt.routing import MaxPropState, maxprop_meet_update  # noqa: E402
from dtnopt.surrogate import (  # noqa: E402
    DecisionTree,
    GBMModel,
    RandomForestModel,
    evaluate,
    make_model,
    train_test_split,
)
from dtnopt.trace import (  # noqa: E402
    TraceBounds,
    TraceSample,
    generate_synthetic_trace,
    parse_external_trace,
    write_external_trace,
)

RESULTS = []  # (criterion, ok, detail), read by the terminal-summary hook


def report(num, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] AC-{num:02d} {title}: {detail}"
    RESULTS.append(line)
    print(line, flush=True)
    return ok


# Shared desk-scale setting for the simulation criteria: 20 random-waypoint
# nodes, 1000 m square, 1800 s.
_SWEEP = {}


def desk_sweep():
    if "ds" not in _SWEEP:
        base, trace = harness.desk_scenario()
        t = time.perf_counter()
        ds = harness.sweep(harness.SweepPlan(runs=200, seed=0), base, trace)
        _SWEEP.update(ds=ds, base=base, trace=trace, seconds=time.perf_counter() - t)
    return _SWEEP


# ---------------------------------------------------------------- AC-01

def check_01():
    t = time.perf_counter()
    bad = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 200))
        times = np.sort(rng.uniform(0, 1e5, n))
        samples = [TraceSample(float(times[i]), f"n{int(rng.integers(0, 30))}",
                               float(rng.uniform(-1e4, 1e4)), float(rng.uniform(-1e4, 1e4)))
                   for i in range(n)]
        bounds, back = parse_external_trace(write_external_trace(samples))
        if back != samples or bounds != TraceBounds.of(samples):
            bad += 1
    dt = time.perf_counter() - t
    return report(1, "format round trip", bad == 0 and dt < 5,
                  f"{100 - bad}/100 traces exact, {dt:.2f}s (budget 5s)")


# ---------------------------------------------------------------- AC-02

def _reachable(adj, src):
    seen, todo = {src}, deque([src])
    while todo:
        u = todo.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return seen


def check_02():
    t = time.perf_counter()
    # 10 static nodes on a jittered ring, each within range of its neighbours only
    rng = np.random.default_rng(0)
    pts = {}
    for i in range(10):
        a = 2 * math.pi * i / 10 + rng.uniform(-0.05, 0.05)
        pts[str(i)] = (100 + 60 * math.cos(a), 100 + 60 * math.sin(a))
    r = 45.0
    adj = {n: [m for m in pts if m != n and math.dist(pts[n], pts[m]) <= r] for n in pts}
    connected = all(len(_reachable(adj, n)) == 10 for n in pts)
    cfg = ScenarioConfig(transmit_range=r, buffer_size=1e6, msg_ttl=1e9, event_interval=5,
                         max_messages=40, seed=3)
    sim = Simulation(cfg, static_trace(pts, duration=600)).run()
    rep = report_from_log(sim.log)
    attainable = all(m.dest in _reachable(adj, m.src) for m in sim.messages.values())
    dt = time.perf_counter() - t
    ok = connected and attainable and rep.delivery_prob == 1.0 and dt < 10
    return report(2, "flooding completeness", ok,
                  f"delivery_prob={rep.delivery_prob!r} over {rep.created} messages, "
                  f"reachability oracle {'agrees' if attainable else 'disagrees'}, "
                  f"{dt:.2f}s (budget 10s)")


# ---------------------------------------------------------------- AC-03

def check_03():
    box = default_box()
    broken, relay_bad, drops = [], 0, 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        trace = generate_synthetic_trace(int(rng.integers(5, 16)), 900, 400, 400,
                                         speed=(1, 10), pause=(0, 60), seed=seed)
        cfg = harness.apply_features(ScenarioConfig(), box.sample(rng, 1)[0], seed=seed)
        sim = Simulation(cfg, trace).run()
        a = sim.accounting()
        if a["created"] != a["delivered"] + a["expired"] + a["buffered"] + a["in_flight"]:
            broken.append(seed)
        drops += a["dropped"]
        kinds = [r.kind for r in sim.log]
        relay_bad += kinds.count("relayed") < kinds.count("delivered")
    ok = not broken and relay_bad == 0
    return report(3, "accounting identity", ok,
                  f"identity exact in {50 - len(broken)}/50 scenarios "
                  f"(last-copy drops seen: {drops}), relayed>=delivered in {50 - relay_bad}/50")


# ---------------------------------------------------------------- AC-04

def check_04():
    box = default_box()
    mismatches = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        trace = generate_synthetic_trace(10, 600, 300, 300, speed=(1, 8), seed=seed)
        cfg = harness.apply_features(ScenarioConfig(), box.sample(rng, 1)[0], seed=seed)
        rep, log = run(cfg, trace)
        created, first = {}, {}
        for rec in log:
            if rec.kind == "created":
                created[rec.msg_id] = rec.time
        for rec in log:
            if rec.kind == "delivered" and rec.msg_id not in first:
                first[rec.msg_id] = rec.time
        dp = len(first) / len(created)
        lat = math.fsum(first[m] - created[m] for m in first) / len(first) if first else math.nan
        same_lat = (math.isnan(lat) and math.isnan(rep.avg_latency)) or lat == rep.avg_latency
        if dp != rep.delivery_prob or not same_lat:
            mismatches += 1
    return report(4, "report oracle", mismatches == 0,
                  f"{10 - mismatches}/10 runs match brute-force log scans exactly")


# ---------------------------------------------------------------- AC-05

def check_05():
    rng = np.random.default_rng(5)
    pop = [str(i) for i in range(12)]
    s = MaxPropState.initial("0", pop)
    worst, monotone = 0.0, True
    for _ in range(10_000):
        peer = pop[int(rng.integers(1, len(pop)))]
        new = maxprop_meet_update(s, peer)
        worst = max(worst, abs(math.fsum(new.likelihood.values()) - 1.0))
        monotone &= new.likelihood[peer] > s.likelihood[peer]
        s = new
    ok = worst <= 1e-9 and monotone
    return report(5, "MaxProp normalization", ok,
                  f"max |sum f - 1| = {worst:.2e} (tol 1e-9), met entry always increased: {monotone}")


# ---------------------------------------------------------------- AC-06

def check_06():
    rng = np.random.default_rng(6)
    X = rng.uniform(0, 1, (300, 4))
    y = np.sin(5 * X[:, 0]) + X[:, 1] * X[:, 2]
    Q = rng.uniform(0, 1, (200, 4))

    rf = RandomForestModel(n_estimators=25, max_features="sqrt", max_depth=8).fit(X, y)
    acc = np.zeros(len(Q))
    for tree in rf.trees_:
        acc = acc + tree.predict(Q)
    loop_mean = np.array_equal(rf.predict(Q), acc / len(rf.trees_))

    g = np.linspace(0, 1, 1000)
    grid = np.column_stack([g, g[::-1], np.full(1000, 0.3), np.full(1000, 0.7)])
    solo = RandomForestModel(n_estimators=1, bootstrap=False, max_features="auto",
                             max_depth=6).fit(X, y)
    degenerate = np.array_equal(solo.predict(grid), DecisionTree(max_depth=6).fit(X, y).predict(grid))

    gbm = GBMModel(n_estimators=60, learning_rate=0.2, max_depth=3, subsample=1.0).fit(X, y)
    mse_ok = bool(np.all(np.diff(gbm.train_mse_) <= 0))

    g0 = GBMModel(n_estimators=0).fit(X, y)
    mean_ok = bool(np.all(g0.predict(Q) == y.mean()))

    ok = loop_mean and degenerate and mse_ok and mean_ok
    return report(6, "ensemble oracles", ok,
                  f"loop-mean={loop_mean}, degenerate forest=CART on 1000 pts: {degenerate}, "
                  f"GBM MSE non-increasing: {mse_ok}, M=0 is mean: {mean_ok}")


# ---------------------------------------------------------------- AC-07

def check_07():
    t = time.perf_counter()
    rng = np.random.default_rng(7)
    X = rng.uniform(-1, 1, (500, 3))
    y = 1.0 + 2.0 * X[:, 0] ** 2 - X[:, 0] * X[:, 1] + 0.5 * X[:, 2] ** 3
    scores = {}
    for family, frac in (("rf", 0.2), ("gbm", 0.3)):
        train, test = train_test_split(len(y), frac, seed=0)
        model = make_model(family, {}, seed=0).fit(X[train], y[train])
        scores[family] = evaluate(y[test], model.predict(X[test])).r_squared
    dt = time.perf_counter() - t
    ok = min(scores.values()) >= 0.95 and dt < 60
    return report(7, "surrogate sanity", ok,
                  f"test R2 rf={scores['rf']:.4f} gbm={scores['gbm']:.4f} (need >=0.95), "
                  f"{dt:.1f}s (budget 60s)")


# ---------------------------------------------------------------- AC-08

def check_08():
    t = time.perf_counter()
    box = ParamBox([Dimension(f"x{i}", -5.0, 5.0) for i in range(8)])
    results = []
    for seed in range(10):
        cfg = DEConfig(population=16, F=0.5, CR=0.5, max_evaluations=2000, seed=seed)
        res = differential_evolution(lambda x: float(np.dot(x, x)), box, cfg)
        mono = all(b <= a for a, b in zip(res.history, res.history[1:]))
        results.append((res.score, res.evaluations, mono))
    dt = time.perf_counter() - t
    hits = sum(s <= 1e-3 and e <= 2000 and m for s, e, m in results)
    worst = max(s for s, _, _ in results)
    return report(8, "DE convergence", hits == 10 and dt < 30,
                  f"{hits}/10 seeds reach <=1e-3 in <=2000 evals (worst {worst:.1e}), "
                  f"{dt:.1f}s (budget 30s)")


# ---------------------------------------------------------------- AC-09

def check_09():
    t = time.perf_counter()
    base, trace = harness.desk_scenario()
    box = default_box()
    rng = np.random.default_rng(9)
    epi, mp = [], []
    for i in range(30):
        x = box.sample(rng, 1)[0]
        for router, out in ((0.0, epi), (1.0, mp)):
            x[4] = router
            rep, _ = run(harness.apply_features(base, x, seed=i), trace)
            out.append(rep.overhead_ratio)
    epi, mp = np.array(epi), np.array(mp)
    keep = np.isfinite(epi) & np.isfinite(mp)
    dt = time.perf_counter() - t
    m_e, m_m = epi[keep].mean(), mp[keep].mean()
    ok = keep.sum() >= 30 and m_m < m_e and dt < 300
    return report(9, "protocol ordering", ok,
                  f"mean overhead MaxProp={m_m:.3f} < Epidemic={m_e:.3f} over {keep.sum()} pairs, "
                  f"{dt:.1f}s (budget 300s)")


# ---------------------------------------------------------------- AC-10

def check_10():
    sw = desk_sweep()
    ds = sw["ds"].clean()
    r = pearson_matrix(ds.table())
    r_range_dp = r[1, 8]
    r_speed_oh = r[0, 9]
    ok = len(ds) >= 190 and r_range_dp > 0 and r_speed_oh < 0 and sw["seconds"] < 600
    return report(10, "sensitivity signs", ok,
                  f"r(transmitRange, delivery_prob)={r_range_dp:+.3f} (need >0), "
                  f"r(transmitSpeed, overhead_ratio)={r_speed_oh:+.3f} (need <0), "
                  f"{len(ds)} runs in {sw['seconds']:.0f}s (budget 600s)")


# ---------------------------------------------------------------- AC-11

def check_11():
    sw = desk_sweep()
    t = time.perf_counter()
    ds = sw["ds"].clean()
    dp, oh = ds.target("delivery_prob"), ds.target("overhead_ratio")
    dm = make_model("gbm", {}, seed=0).fit(ds.X, dp)
    om = make_model("gbm", {}, seed=0).fit(ds.X, oh)
    spec = ObjectiveSpec.from_dataset(ds, dm, om)
    rec = recommend_and_validate(
        spec, default_box(), DEConfig(seed=0),
        lambda f: harness.simulate_features(sw["base"], sw["trace"], f))
    total = sw["seconds"] + time.perf_counter() - t
    med_dp, med_oh = float(np.median(dp)), float(np.median(oh))
    s = rec.simulated
    ok = s.delivery_prob >= med_dp and s.overhead_ratio <= med_oh and total < 900
    return report(11, "end-to-end pipeline", ok,
                  f"validated dp={s.delivery_prob:.4f} vs median {med_dp:.4f}, "
                  f"oh={s.overhead_ratio:.4f} vs median {med_oh:.4f}, {total:.0f}s (budget 900s)")


# ---------------------------------------------------------------- AC-12

def _cli_session(root):
    """Run every subcommand once inside ``root``; return {file: bytes}."""
    from datetime import datetime, timezone

    from dtnopt.cli import main
    from dtnopt.dataset import synthetic_dataset

    cwd = os.getcwd()
    os.chdir(root)
    try:
        ts = [datetime(2008, 5, d, h, tzinfo=timezone.utc).timestamp()
              for d, h in ((20, 9), (21, 8), (21, 9), (21, 10))]
        with open("fixes.csv", "w") as fh:
            fh.write("taxi_id,latitude,longitude,unix_time,occupancy\n")
            for i, (cab, t) in enumerate(zip("abcb", ts)):
                fh.write(f"{cab},{37.70 + 0.01 * i},{-122.50 + 0.02 * i},{t},1\n")
        with open("s.cfg", "w") as fh:
            fh.write("Movement.file = t.txt\nbtInterface.transmitRange = 30\n"
                     "Group.router = MaxPropRouter\n")
        synthetic_dataset(150, seed=1).save("data.csv")
        models = ["--delivery-model", "models/gbm_delivery_prob.json",
                  "--overhead-model", "models/gbm_overhead_ratio.json", "--dataset", "data.csv",
                  "--popsize", "3", "--generations", "8"]
        steps = [
            ["convert", "--input", "fixes.csv", "--day", "2008-05-21", "--out", "conv.txt"],
            ["gen-trace", "--nodes", "8", "--duration", "300", "--world", "300", "300",
             "--seed", "4", "--out", "t.txt"],
            ["simulate", "--config", "s.cfg", "--log", "run.log", "--out", "run.txt"],
            ["sweep", "--config", "s.cfg", "--runs", "8", "--out", "sweep1.csv"],
            ["sweep", "--config", "s.cfg", "--runs", "8", "--workers", "3", "--out", "sweep3.csv"],
            ["train", "--dataset", "data.csv", "--model", "gbm", "--out", "train.txt"],
            ["tune", "--dataset", "data.csv", "--model", "rf", "--grid",
             '{"max_depth": [4, 8]}', "--param", "n_estimators=5", "--out", "tune.txt"],
            ["select", "--dataset", "data.csv", "--k", "3", "--profile", "default",
             "--param", "n_estimators=5", "--out", "select.txt"],
            ["optimize"] + models + ["--out", "opt.txt"],
            ["validate"] + models + ["--config", "s.cfg", "--out", "val.txt"],
            ["analyze", "--dataset", "data.csv", "--out", "analyze.csv"],
        ]
        codes = [main(s) for s in steps]
        files = {}
        for dirpath, _, names in os.walk("."):
            for n in names:
                p = os.path.join(dirpath, n)
                with open(p, "rb") as fh:
                    files[p] = fh.read()
        return codes, files
    finally:
        os.chdir(cwd)


def check_12():
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        codes_a, files_a = _cli_session(a)
        codes_b, files_b = _cli_session(b)
    all_ok = all(c == 0 for c in codes_a + codes_b)
    same = files_a == files_b
    parallel = files_a.get("./sweep1.csv") == files_a.get("./sweep3.csv")
    ok = all_ok and same and parallel
    diff = sorted(k for k in files_a if files_a[k] != files_b.get(k))
    return report(12, "determinism", ok,
                  f"{len(files_a)} output files byte-identical across repeats: {same}"
                  f"{' (differ: ' + ', '.join(diff) + ')' if diff else ''}, "
                  f"1-worker vs 3-worker sweep identical: {parallel}, exit codes {set(codes_a)}")


CHECKS = [check_01, check_02, check_03, check_04, check_05, check_06,
          check_07, check_08, check_09, check_10, check_11, check_12]


@pytest.mark.parametrize("check", CHECKS, ids=[f"AC-{i:02d}" for i in range(1, 13)])
def test_acceptance(check):
    assert check()


if __name__ == "__main__":
    passed = sum(bool(c()) for c in CHECKS)
    print(f"{passed}/{len(CHECKS)} acceptance criteria passed")
    sys.exit(0 if passed == len(CHECKS) else 1)
