import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import scripted_trace, static_trace
from dtnopt.engine import Message, ScenarioConfig, Simulation
from dtnopt.errors import SelfMeeting
from dtnopt.routing import (
    EpidemicRouter,
    MaxPropRouter,
    MaxPropState,
    adaptive_hop_threshold,
    epidemic_exchange,
    make_router,
    maxprop_ack_purge,
    maxprop_meet_update,
    maxprop_path_cost,
    maxprop_path_costs,
    maxprop_priority,
    message_key,
)

FAR = 10_000


def m(i, hops=0, dest="d", created=0.0, size=10.0):
    path = ("s",) + tuple(f"h{k}" for k in range(hops))
    return Message(f"M{i}", "s", dest, size, created, 1e9, path)


def inject(sim, node, message, at=0.0):
    sim.messages[message.id] = message
    sim.buffers[node].add(message, at)


# --- Epidemic

def test_exchange_set_difference():
    assert epidemic_exchange({"M1": 0, "M2": 1}, {"M2": 0, "M3": 2}) == (["M1"], ["M3"])


def test_exchange_identical_sets():
    assert epidemic_exchange({"M1": 0}, {"M1": 5}) == ([], [])


def test_exchange_fcfs_then_id():
    a = {"M10": 1.0, "M2": 1.0, "M7": 0.5}
    assert epidemic_exchange(a, {})[0] == ["M7", "M2", "M10"]


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(st.sampled_from([f"M{i}" for i in range(12)]), st.floats(0, 10)),
       st.dictionaries(st.sampled_from([f"M{i}" for i in range(12)]), st.floats(0, 10)))
def test_exchange_never_sends_what_peer_has(a, b):
    a_sends, b_sends = epidemic_exchange(a, b)
    assert set(a_sends) == set(a) - set(b)
    assert set(b_sends) == set(b) - set(a)
    assert set(a) | set(a_sends) | set(b_sends) == set(a) | set(b)


def test_five_messages_copied_over_long_contact():
    # A and B sit together; the destination C is unreachable.
    tr = static_trace({"A": (0, 0), "B": (5, 0), "C": (FAR, 0)}, duration=20)
    sim = Simulation(ScenarioConfig(transmit_range=10, max_messages=0), tr)
    for i in range(1, 6):
        inject(sim, "A", Message(f"M{i}", "A", "C", 35_000, 0.0, 1e9, ("A",)), at=i)
    sim.run()
    assert set(sim.buffers["B"].entries) == set(sim.buffers["A"].entries) == \
        {f"M{i}" for i in range(1, 6)}
    sends = [r.msg_id for r in sim.log if r.kind == "transfer_started"]
    assert sends == [f"M{i}" for i in range(1, 6)]  # FCFS


def test_epidemic_drop_order_is_fifo():
    tr = static_trace({"A": (0, 0), "B": (FAR, 0)})
    sim = Simulation(ScenarioConfig(max_messages=0), tr)
    for i, t in ((3, 0.0), (1, 2.0), (2, 1.0)):
        inject(sim, "A", m(i), at=t)
    assert sim.router.drop_order("A") == ["M3", "M2", "M1"]


# --- MaxProp likelihoods

def test_initial_prior_is_uniform():
    st_ = MaxPropState.initial("A", ["A", "B", "C", "D", "E"])
    assert st_.likelihood == {p: 0.25 for p in "BCDE"}


def test_meet_update_once_and_twice():
    s = MaxPropState.initial("A", ["A", "B", "C"])
    s1 = maxprop_meet_update(s, "B")
    assert s1.likelihood == pytest.approx({"B": 0.75, "C": 0.25}, abs=1e-15)
    s2 = maxprop_meet_update(s1, "B")
    assert s2.likelihood == pytest.approx({"B": 0.875, "C": 0.125}, abs=1e-15)
    assert s.likelihood == {"B": 0.5, "C": 0.5}  # input untouched


def test_self_meeting():
    with pytest.raises(SelfMeeting):
        maxprop_meet_update(MaxPropState.initial("A", "AB"), "A")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from("BCDEFG"), min_size=1, max_size=60))
def test_meet_sequence_normalized_and_monotone(meets):
    s = MaxPropState.initial("A", "ABCDEFG")
    for peer in meets:
        new = maxprop_meet_update(s, peer)
        assert math.isclose(math.fsum(new.likelihood.values()), 1.0, abs_tol=1e-9)
        assert new.likelihood[peer] > s.likelihood[peer]
        for other in new.likelihood:
            if other != peer:
                assert new.likelihood[other] < s.likelihood[other]
            assert 0.0 <= new.likelihood[other] <= 1.0
        s = new


# --- path cost

def test_direct_certain_edge_is_free():
    assert maxprop_path_cost({"A": {"B": 1.0}}, "A", "B") == 0.0


def test_two_hops_at_half():
    assert maxprop_path_cost({"A": {"B": 0.5}, "B": {"C": 0.5}}, "A", "C") == 1.0


def test_unknown_destination_infinite():
    assert maxprop_path_cost({"A": {"B": 0.5}}, "A", "Z") == math.inf


tables_st = st.dictionaries(
    st.sampled_from("ABCDE"),
    st.dictionaries(st.sampled_from("ABCDE"), st.floats(0, 1), max_size=4),
    max_size=5)


def _bellman_ford(tables, src):
    nodes = set(tables) | {v for t in tables.values() for v in t} | {src}
    dist = {n: math.inf for n in nodes}
    dist[src] = 0.0
    for _ in range(len(nodes)):
        for u, row in tables.items():
            for v, p in row.items():
                dist[v] = min(dist[v], dist[u] + (1 - p))
    return {n: d for n, d in dist.items() if d < math.inf}


@settings(max_examples=150, deadline=None)
@given(tables_st)
def test_dijkstra_matches_bellman_ford(tables):
    got = maxprop_path_costs(tables, "A")
    want = _bellman_ford(tables, "A")
    assert got.keys() == want.keys()
    for k in got:
        assert got[k] == pytest.approx(want[k], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(tables_st, st.sampled_from("ABCDE"), st.sampled_from("ABCDE"), st.floats(0, 1))
def test_adding_an_edge_never_raises_cost(tables, u, v, p):
    before = maxprop_path_costs(tables, "A")
    grown = {k: dict(row) for k, row in tables.items()}
    grown.setdefault(u, {})
    if v in grown[u]:
        return
    grown[u][v] = p
    after = maxprop_path_costs(grown, "A")
    for node, d in before.items():
        assert after[node] <= d + 1e-12


# --- priority

def test_all_low_hop_single_segment():
    buf = [m(1, created=1), m(2, created=2), m(3, created=3)]
    tx, drop = maxprop_priority(buf, {"d": 0.5}, 1)
    assert [x.id for x in tx] == ["M3", "M2", "M1"]  # newer first
    assert drop == tx[::-1]


def test_zero_threshold_is_pure_cost():
    buf = [m(1, dest="x"), m(2, dest="y"), m(3, dest="z")]
    costs = {"x": 0.7, "y": 0.1, "z": 0.4}
    tx, drop = maxprop_priority(buf, costs, 0)
    assert [x.id for x in tx] == ["M2", "M3", "M1"]
    assert [x.id for x in drop] == ["M1", "M3", "M2"]


def test_two_segment_example():
    low, high = m(1, hops=0, dest="x"), m(2, hops=3, dest="y")
    tx, drop = maxprop_priority([high, low], {"x": 0.9, "y": 0.1}, 2)
    assert [x.id for x in tx] == ["M1", "M2"]
    assert [x.id for x in drop] == ["M2", "M1"]


def test_unreachable_destinations_sort_last():
    buf = [m(1, hops=2, dest="gone"), m(2, hops=2, dest="x")]
    tx, _ = maxprop_priority(buf, {"x": 3.0}, 0)
    assert [x.id for x in tx] == ["M2", "M1"]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.sampled_from("vwxyz"), st.floats(0, 100)),
                max_size=15),
       st.integers(0, 6))
def test_priority_is_a_permutation_with_segments(spec, p):
    buf = [m(i, hops=h, dest=d, created=c) for i, (h, d, c) in enumerate(spec)]
    costs = {"v": 0.1, "w": 0.5, "x": 1.5}
    tx, drop = maxprop_priority(buf, costs, p)
    assert sorted(x.id for x in tx) == sorted(x.id for x in buf)
    assert drop == tx[::-1]
    hops = [x.hop_count for x in tx]
    n_low = sum(h < p for h in hops)
    assert all(h < p for h in hops[:n_low])
    assert hops[:n_low] == sorted(hops[:n_low])
    high_costs = [costs.get(x.dest, math.inf) for x in tx[n_low:]]
    assert high_costs == sorted(high_costs)


def _threshold_oracle(buf, cap):
    best_p, best = 0, 0.0
    for p in range(0, max([x.hop_count for x in buf], default=0) + 2):
        used = sum(x.size for x in buf if x.hop_count < p)
        if used <= cap and used > best:
            best_p, best = p, used
    return best_p


def test_adaptive_threshold_from_contact_history():
    state = MaxPropState.initial("A", "AB")
    for moved in (30.0, 50.0, 40.0):  # three finished contacts
        state.bytes_transferred += moved
        state.n_contacts += 1
    assert state.avg_transfer_bytes == 40.0
    buf = [m(1, hops=0), m(2, hops=0), m(3, hops=1), m(4, hops=2), m(5, hops=2)]
    # 20 bytes at hop 0, 10 at hop 1, 20 at hop 2: budget 40 admits hops 0 and 1
    assert adaptive_hop_threshold(buf, state.avg_transfer_bytes, 1000) == 2
    # half the buffer caps it tighter
    assert adaptive_hop_threshold(buf, state.avg_transfer_bytes, 40) == 1


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(1, 20)), max_size=12),
       st.floats(0, 200), st.floats(1, 400))
def test_adaptive_threshold_oracle(spec, avg, buffer_bytes):
    buf = [m(i, hops=h, size=float(s)) for i, (h, s) in enumerate(spec)]
    got = adaptive_hop_threshold(buf, avg, buffer_bytes)
    assert got == _threshold_oracle(buf, min(avg, buffer_bytes / 2))
    assert sum(x.size for x in buf if x.hop_count < got) <= min(avg, buffer_bytes / 2)


def test_fixed_threshold_knob():
    assert MaxPropRouter(hop_threshold=3).hop_threshold == 3
    with pytest.raises(ValueError):
        MaxPropRouter(hop_threshold=-1)


# --- acks

def test_ack_purge_helper():
    acked, bufs = maxprop_ack_purge({"M0"}, {"A": ["M1", "M2"], "B": ["M2"]}, "M1")
    assert acked == {"M0", "M1"}
    assert bufs == {"A": ["M2"], "B": ["M2"]}


def _mp_sim(trace, **cfg):
    return Simulation(ScenarioConfig(router="MaxProp", max_messages=0, transmit_range=10,
                                     **cfg), trace)


def test_direct_ack_on_contact_with_destination():
    # S sits next to D from the start and delivers M1; A holds a copy far
    # away and walks up to D at t=5.
    frames = [{"S": (0, 0), "D": (5, 0), "A": (FAR, 0)}] * 5 + \
             [{"S": (0, 0), "D": (5, 0), "A": (5, 5)}] * 5
    sim = _mp_sim(scripted_trace(frames))
    msg = Message("M1", "S", "D", 35_000, 0.0, 1e9, ("S",))
    inject(sim, "S", msg)
    inject(sim, "A", msg)
    sim.run()
    assert "M1" in sim.delivered
    assert "M1" not in sim.buffers["A"]
    assert any(r.kind == "dropped" and r.a == "A" and r.b == "acked" for r in sim.log)


def test_isolated_holder_keeps_copy():
    frames = [{"S": (0, 0), "D": (5, 0), "A": (FAR, 0)}] * 10
    sim = _mp_sim(scripted_trace(frames))
    msg = Message("M1", "S", "D", 35_000, 0.0, 1e9, ("S",))
    inject(sim, "S", msg)
    inject(sim, "A", msg)
    sim.run()
    assert "M1" in sim.delivered and "M1" in sim.buffers["A"]


def test_ack_travels_down_a_chain():
    pts = {"A": (0, 0), "B": (FAR, 0), "C": (2 * FAR, 0), "D": (3 * FAR, 0)}
    sim = _mp_sim(static_trace(pts))
    inject(sim, "C", Message("M1", "B", "D", 35_000, 0.0, 1e9, ("B",)))
    router = sim.router
    router.state["A"].acked.add("M1")
    router.on_link_up("A", "B")
    assert "M1" in router.state["B"].acked and "M1" not in router.state["C"].acked
    router.on_link_up("B", "C")
    assert "M1" in router.state["C"].acked
    assert "M1" not in sim.buffers["C"]


def test_acks_only_grow_and_are_not_resent():
    from dtnopt.trace import generate_synthetic_trace

    tr = generate_synthetic_trace(8, 600, 150, 150, speed=(1, 5), seed=11)
    sim = Simulation(ScenarioConfig(router="MaxProp", transmit_range=30, seed=1), tr)
    seen = {n: set() for n in sim.node_ids}
    for k in range(sim.n_steps + 1):
        sim.step_index = k
        sim.now = round(sim.start + k * sim.config.time_step, 9)
        before = len(sim.log)
        sim.step()
        for r in sim.log[before:]:
            if r.kind == "transfer_started":
                assert r.msg_id not in seen[r.a]
        for n in sim.node_ids:
            assert seen[n] <= sim.router.state[n].acked
            seen[n] = set(sim.router.state[n].acked)


def test_make_router():
    assert isinstance(make_router("EpidemicRouter"), EpidemicRouter)
    assert make_router("MaxPropRouter", ack_flooding=False).ack_flooding is False
    with pytest.raises(ValueError):
        make_router("SprayAndWait")


def test_drop_order_enumerates_buffer_once():
    from dtnopt.trace import generate_synthetic_trace

    tr = generate_synthetic_trace(6, 400, 100, 100, speed=(1, 5), seed=3)
    for router in ("Epidemic", "MaxProp"):
        sim = Simulation(ScenarioConfig(router=router, transmit_range=30), tr).run()
        for n in sim.node_ids:
            order = sim.router.drop_order(n)
            assert sorted(order, key=message_key) == sorted(sim.buffers[n].entries,
                                                            key=message_key)
