"""Store-carry-forward routing policies.

Two routers are provided: :class:`EpidemicRouter` floods every message to
every peer that lacks it, :class:`MaxPropRouter` orders transfers and drops
by hop count and estimated path cost and purges delivered messages using
acknowledgments. The module-level functions are the pure building blocks
both routers and the tests use.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import SelfMeeting

ROUTER_TOKENS = {
    "EpidemicRouter": "Epidemic",
    "MaxPropRouter": "MaxProp",
    "Epidemic": "Epidemic",
    "MaxProp": "MaxProp",
}


def message_key(msg_id: str):
    """Sort key ordering ``M2`` before ``M10``."""
    if msg_id[:1] == "M" and msg_id[1:].isdigit():
        return (0, int(msg_id[1:]), "")
    return (1, 0, msg_id)


def node_key(node_id: str):
    if node_id.isdigit():
        return (0, int(node_id), "")
    return (1, 0, node_id)


# ---------------------------------------------------------------- Epidemic

def epidemic_exchange(a_summary: Mapping[str, float], b_summary: Mapping[str, float]):
    """Messages each side must send so both end with the union.

    Summaries map message id to the time the holder received it. Each send
    list is in first-come-first-served order of the sender's receive time,
    ties broken by message id.
    """
    a_sends = sorted((m for m in a_summary if m not in b_summary),
                     key=lambda m: (a_summary[m], message_key(m)))
    b_sends = sorted((m for m in b_summary if m not in a_summary),
                     key=lambda m: (b_summary[m], message_key(m)))
    return a_sends, b_sends


# ----------------------------------------------------------------- MaxProp

@dataclass
class MaxPropState:
    """Per-node MaxProp bookkeeping.

    ``likelihood`` holds the node's estimate that its next contact is each
    peer; it always sums to one.
    """

    owner: str
    likelihood: Dict[str, float]
    met_count: Dict[str, int] = field(default_factory=dict)
    acked: set = field(default_factory=set)
    bytes_transferred: float = 0.0
    n_contacts: int = 0

    @classmethod
    def initial(cls, owner: str, population: Iterable[str]) -> "MaxPropState":
        peers = [p for p in population if p != owner]
        prior = 1.0 / len(peers) if peers else 0.0
        return cls(owner, {p: prior for p in peers})

    @property
    def avg_transfer_bytes(self) -> float:
        return self.bytes_transferred / self.n_contacts if self.n_contacts else 0.0


def maxprop_meet_update(state: MaxPropState, met: str) -> MaxPropState:
    """Add one to the met peer's likelihood and renormalize to sum one."""
    if met == state.owner:
        raise SelfMeeting(f"node {met} cannot meet itself")
    f = dict(state.likelihood)
    f[met] = f.get(met, 0.0) + 1.0
    total = math.fsum(f.values())
    f = {k: v / total for k, v in f.items()}
    counts = dict(state.met_count)
    counts[met] = counts.get(met, 0) + 1
    return replace(state, likelihood=f, met_count=counts)


def maxprop_path_costs(tables: Mapping[str, Mapping[str, float]], src: str) -> Dict[str, float]:
    """Dijkstra from ``src`` with edge weight ``1 - f_i(j)``.

    ``tables[i][j]`` is node i's likelihood of meeting j. Nodes with no table
    contribute no outgoing edges. Unreachable nodes are absent from the
    result.
    """
    dist = {src: 0.0}
    heap = [(0.0, node_key(src), src)]
    done = set()
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, p in tables.get(u, {}).items():
            nd = d + max(0.0, 1.0 - p)
            if nd < dist.get(v, math.inf):
                dist[v] = nd
                heapq.heappush(heap, (nd, node_key(v), v))
    return dist


def maxprop_path_cost(tables: Mapping[str, Mapping[str, float]], src: str, dest: str) -> float:
    return maxprop_path_costs(tables, src).get(dest, math.inf)


def adaptive_hop_threshold(buffer: Sequence, avg_transfer_bytes: float,
                           buffer_bytes: float) -> int:
    """Largest hop count p whose low-hop segment fits the byte budget.

    The segment is every message with ``hop_count < p``; its total size may
    not exceed ``min(avg_transfer_bytes, buffer_bytes / 2)``.
    """
    cap = min(avg_transfer_bytes, buffer_bytes / 2.0)
    by_hop: Dict[int, float] = {}
    for m in buffer:
        by_hop[m.hop_count] = by_hop.get(m.hop_count, 0.0) + m.size
    p, used = 0, 0.0
    for h in sorted(by_hop):
        if used + by_hop[h] > cap:
            break
        used += by_hop[h]
        p = h + 1
    return p


def maxprop_priority(buffer: Sequence, costs: Mapping[str, float], threshold_p: int):
    """Transmit order and drop order for a MaxProp buffer.

    Messages with fewer than ``threshold_p`` hops go first, fewest hops
    first; the rest follow by ascending path cost to their destination.
    ``costs`` maps destination node to cost (missing means unreachable).
    The drop order is the exact reverse of the transmit order.
    """
    if threshold_p < 0:
        raise ValueError("threshold_p must be non-negative")

    def cost(m):
        return costs.get(m.dest, math.inf)

    low = [m for m in buffer if m.hop_count < threshold_p]
    high = [m for m in buffer if m.hop_count >= threshold_p]
    low.sort(key=lambda m: (m.hop_count, cost(m), -m.created_at, message_key(m.id)))
    high.sort(key=lambda m: (cost(m), message_key(m.id)))
    transmit = low + high
    return transmit, transmit[::-1]


def maxprop_ack_purge(acked: set, buffers: Mapping[str, Sequence[str]], delivered_id: str):
    """Record ``delivered_id`` as acknowledged and strip acked ids from buffers.

    Returns the new ack set and a dict of purged buffers (id lists, order
    kept).
    """
    acked = set(acked) | {delivered_id}
    return acked, {node: [m for m in ids if m not in acked] for node, ids in buffers.items()}


# ----------------------------------------------------------- Router classes

class Router:
    """Routing policy bound to one simulation.

    The engine calls :meth:`attach` once, then the ``on_*`` hooks as links
    change and transfers finish. :meth:`select_transfers` proposes
    ``(sender, receiver, msg_id)`` candidates for an idle link, best first.
    """

    name = "Router"

    def attach(self, sim):
        self.sim = sim

    def on_link_up(self, a: str, b: str):
        pass

    def on_link_down(self, a: str, b: str, bytes_moved: float):
        pass

    def on_received(self, node: str, msg):
        pass

    def on_delivered(self, node: str, msg):
        pass

    def send_order(self, sender: str, receiver: str) -> List[str]:
        raise NotImplementedError

    def drop_order(self, node: str) -> List[str]:
        raise NotImplementedError

    def summary(self, node: str) -> set:
        """Ids the node advertises: everything buffered or delivered to it."""
        return self.sim.summary(node)

    def select_transfers(self, link) -> List[Tuple[str, str, str]]:
        a, b = link.endpoints
        ab = [(a, b, m) for m in self.send_order(a, b)]
        ba = [(b, a, m) for m in self.send_order(b, a)]
        first, second = (ba, ab) if link.last_sender == a else (ab, ba)
        out = []
        for i in range(max(len(first), len(second))):
            if i < len(first):
                out.append(first[i])
            if i < len(second):
                out.append(second[i])
        return out


class EpidemicRouter(Router):
    """Flooding; FCFS transmit order, oldest-received dropped first."""

    name = "Epidemic"

    def send_order(self, sender, receiver):
        buf = self.sim.buffers[sender]
        a_summary = {m: e[1] for m, e in buf.entries.items()}
        b_summary = dict.fromkeys(self.summary(receiver), 0.0)
        return epidemic_exchange(a_summary, b_summary)[0]

    def drop_order(self, node):
        buf = self.sim.buffers[node]
        return sorted(buf.entries, key=lambda m: (buf.entries[m][1], message_key(m)))


class MaxPropRouter(Router):
    """Likelihood-ranked forwarding with split-buffer drops and ack purging."""

    name = "MaxProp"

    def __init__(self, ack_flooding: bool = True, hop_threshold: Optional[int] = None):
        if hop_threshold is not None and hop_threshold < 0:
            raise ValueError("hop_threshold must be non-negative")
        self.ack_flooding = ack_flooding
        self.hop_threshold = hop_threshold  # None: adaptive byte-budget rule

    def attach(self, sim):
        super().attach(sim)
        pop = sim.node_ids
        self.state = {n: MaxPropState.initial(n, pop) for n in pop}
        # node -> {owner: (version, likelihood table)} learned from contacts
        self.known: Dict[str, Dict[str, Tuple[int, Dict[str, float]]]] = {n: {} for n in pop}
        self.version = {n: 0 for n in pop}
        self._cost_cache: Dict[str, Dict[str, float]] = {}

    def tables_of(self, node) -> Dict[str, Dict[str, float]]:
        tables = {owner: t for owner, (_, t) in self.known[node].items()}
        tables[node] = self.state[node].likelihood
        return tables

    def costs(self, node) -> Dict[str, float]:
        c = self._cost_cache.get(node)
        if c is None:
            c = self._cost_cache[node] = maxprop_path_costs(self.tables_of(node), node)
        return c

    def on_link_up(self, a, b):
        for x, y in ((a, b), (b, a)):
            self.state[x] = maxprop_meet_update(self.state[x], y)
            self.version[x] += 1
        snap_a = dict(self.known[a])
        snap_a[a] = (self.version[a], self.state[a].likelihood)
        snap_b = dict(self.known[b])
        snap_b[b] = (self.version[b], self.state[b].likelihood)
        for x, snap in ((a, snap_b), (b, snap_a)):
            mine = self.known[x]
            for owner, (ver, table) in snap.items():
                if owner != x and (owner not in mine or mine[owner][0] < ver):
                    mine[owner] = (ver, table)
        self._cost_cache.pop(a, None)
        self._cost_cache.pop(b, None)

        if self.ack_flooding:
            union = self.state[a].acked | self.state[b].acked
            self.state[a].acked = set(union)
            self.state[b].acked = set(union)
            for x in (a, b):
                stale = [m for m in self.sim.buffers[x].entries if m in union]
                for m in sorted(stale, key=message_key):
                    self.sim.remove_copy(x, m, reason="acked")

    def on_link_down(self, a, b, bytes_moved):
        for x in (a, b):
            st = self.state[x]
            st.bytes_transferred += bytes_moved
            st.n_contacts += 1

    def on_delivered(self, node, msg):
        if self.ack_flooding:
            self.state[node].acked.add(msg.id)

    def _ordered(self, node):
        buf = self.sim.buffers[node]
        msgs = [e[0] for e in buf.entries.values()]
        st = self.state[node]
        p = self.hop_threshold
        if p is None:
            p = adaptive_hop_threshold(msgs, st.avg_transfer_bytes, buf.capacity)
        return maxprop_priority(msgs, self.costs(node), p)

    def send_order(self, sender, receiver):
        have = self.summary(receiver)
        acked = self.state[sender].acked
        transmit, _ = self._ordered(sender)
        todo = [m for m in transmit if m.id not in have and m.id not in acked]
        direct = [m.id for m in todo if m.dest == receiver]
        rest = [m.id for m in todo if m.dest != receiver]
        return direct + rest

    def drop_order(self, node):
        return [m.id for m in self._ordered(node)[1]]


def make_router(name: str, **kwargs) -> Router:
    kind = ROUTER_TOKENS.get(name)
    if kind == "Epidemic":
        return EpidemicRouter()
    if kind == "MaxProp":
        return MaxPropRouter(**kwargs)
    raise ValueError(f"unknown router {name!r}")
