"""Time-sliced store-carry-forward simulator driven by a mobility trace.

The clock advances in fixed steps. Within a step the engine applies due
position fixes, rebuilds the contact graph, creates due messages, advances
in-flight transfers, lets the router start new transfers on idle links and
finally expires messages past their TTL.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field, fields
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, EmptyTrace, MessageLargerThanBuffer, UnknownNodeInTrace
from .routing import ROUTER_TOKENS, Router, make_router, message_key, node_key
from .trace import TraceSample, format_number

KB = 1_000
MB = 1_000_000

# Ranges swept in the reference study; values outside only warn.
REFERENCE_RANGES = {
    "transmit_speed": (125, 375),
    "transmit_range": (10, 30),
    "buffer_size": (500, 10240),
    "wait_time": (60, 900),
    "msg_ttl": (1800, 7200),
    "event_interval": (5, 15),
    "event_size": (20, 50),
}


@dataclass
class ScenarioConfig:
    """One simulator run.

    Units: transmit_speed in kB/s, transmit_range in m, buffer_size in MB,
    event_size in kB, everything time-like in seconds. ``wait_time`` is
    carried as a feature only; trace-driven nodes do not wait.
    """

    transmit_speed: float = 250.0
    transmit_range: float = 20.0
    buffer_size: float = 5000.0
    wait_time: float = 480.0
    router: str = "Epidemic"
    msg_ttl: float = 3600.0
    event_interval: float = 10.0
    event_size: float = 35.0
    seed: int = 0
    time_step: float = 0.1
    sim_duration: Optional[float] = None
    max_messages: Optional[int] = None
    ack_flooding: bool = True
    hop_threshold: Optional[int] = None  # MaxProp only; None = adaptive

    def __post_init__(self):
        self.router = ROUTER_TOKENS.get(self.router, self.router)
        if self.router not in ("Epidemic", "MaxProp"):
            raise ConfigError(f"unknown router {self.router!r}")
        for name in ("transmit_speed", "transmit_range", "buffer_size", "wait_time",
                     "msg_ttl", "event_interval", "event_size", "time_step"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        if self.hop_threshold is not None and self.hop_threshold < 0:
            raise ConfigError("hop_threshold must be non-negative")
        if self.sim_duration is not None and not self.sim_duration > 0:
            raise ConfigError("sim_duration must be positive")

    def out_of_range(self) -> List[str]:
        """Knobs outside the reference sweep ranges."""
        return [k for k, (lo, hi) in REFERENCE_RANGES.items()
                if not lo <= getattr(self, k) <= hi]

    def warn_out_of_range(self):
        bad = self.out_of_range()
        if bad:
            warnings.warn(f"outside the reference sweep ranges: {', '.join(bad)}",
                          stacklevel=2)

    @property
    def router_code(self) -> int:
        return 0 if self.router == "Epidemic" else 1


@dataclass(frozen=True)
class Message:
    id: str
    src: str
    dest: str
    size: float  # bytes
    created_at: float
    ttl: float
    path: Tuple[str, ...]

    @property
    def hop_count(self) -> int:
        return len(self.path) - 1

    def hop(self, node: str) -> "Message":
        return Message(self.id, self.src, self.dest, self.size, self.created_at,
                       self.ttl, self.path + (node,))

    def expired(self, now: float) -> bool:
        return now - self.created_at > self.ttl


class LogRecord(NamedTuple):
    time: float
    kind: str
    msg_id: str
    a: str
    b: str

    def __str__(self):
        return f"{format_number(self.time)} {self.kind} {self.msg_id} {self.a} {self.b}"


class EventLog(list):
    """Ordered :class:`LogRecord` entries with a line-oriented text form."""

    KINDS = ("created", "transfer_started", "relayed", "delivered",
             "dropped", "expired", "aborted")

    def to_text(self) -> str:
        return "".join(f"{r}\n" for r in self)

    @classmethod
    def from_text(cls, text: str) -> "EventLog":
        log = cls()
        for line in text.splitlines():
            if line.strip():
                t, kind, mid, a, b = line.split()
                log.append(LogRecord(float(t), kind, mid, a, b))
        return log


@dataclass
class Transfer:
    msg_id: str
    sender: str
    receiver: str
    size: float
    started_at: int  # step index
    done: float = 0.0


@dataclass
class LinkState:
    endpoints: Tuple[str, str]
    up_since: float
    in_flight: Optional[Transfer] = None
    bytes_moved: float = 0.0
    last_sender: Optional[str] = None
    idle_versions: Optional[Tuple[int, int]] = None


class Buffer:
    """Per-node message store; ``entries`` keeps receive order."""

    def __init__(self, capacity: float):
        self.capacity = capacity
        self.used = 0.0
        self.entries: Dict[str, Tuple[Message, float]] = {}

    def __contains__(self, msg_id):
        return msg_id in self.entries

    def __len__(self):
        return len(self.entries)

    def add(self, msg: Message, received_at: float):
        self.entries[msg.id] = (msg, received_at)
        self.used += msg.size

    def remove(self, msg_id: str) -> Message:
        msg, _ = self.entries.pop(msg_id)
        self.used -= msg.size
        if not self.entries:
            self.used = 0.0
        return msg

    @property
    def free(self) -> float:
        return self.capacity - self.used


def buffer_admit(buffer: Buffer, msg: Message, drop_order: Sequence[str],
                 protected=frozenset()):
    """Make room for ``msg`` by evicting in ``drop_order``.

    Returns ``(admitted, dropped_ids)``. Messages in ``protected`` (e.g.
    currently being sent) are never evicted; if the remaining candidates
    cannot free enough space nothing is evicted and the message is refused.
    The caller stores the message when admitted.
    """
    if msg.size > buffer.capacity:
        raise MessageLargerThanBuffer(
            f"message {msg.id} ({msg.size} B) exceeds buffer capacity {buffer.capacity} B")
    if msg.size <= buffer.free:
        return True, []
    need = msg.size - buffer.free
    victims, freed = [], 0.0
    for mid in drop_order:
        if mid in protected or mid not in buffer.entries:
            continue
        victims.append(mid)
        freed += buffer.entries[mid][0].size
        if freed >= need:
            break
    if freed < need:
        return False, []
    for mid in victims:
        buffer.remove(mid)
    return True, victims


def connectivity(positions: Mapping[str, Tuple[float, float]], range_m: float):
    """Unordered pairs within ``range_m`` of each other (boundary inclusive)."""
    if not range_m > 0:
        raise ValueError("range must be positive")
    ids = sorted(positions, key=node_key)
    if len(ids) < 2:
        return set()
    xy = np.array([positions[n] for n in ids], dtype=float)
    i, j = _linked_pairs(xy, range_m)
    return {(ids[a], ids[b]) for a, b in zip(i.tolist(), j.tolist())}


def _linked_pairs(xy: np.ndarray, range_m: float):
    d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
    i, j = np.nonzero(np.triu(d <= range_m, k=1))
    return i, j


def expire_ttl(buffer: Buffer, now: float) -> List[str]:
    """Remove and return ids of messages with ``now - created_at > ttl``."""
    gone = [mid for mid, (m, _) in buffer.entries.items() if m.expired(now)]
    gone.sort(key=message_key)
    for mid in gone:
        buffer.remove(mid)
    return gone


class Simulation:
    """State of one run. Use :func:`run` unless you need the end state."""

    def __init__(self, config: ScenarioConfig, trace: Sequence[TraceSample],
                 router: Optional[Router] = None):
        if not trace:
            raise EmptyTrace("cannot simulate an empty trace")
        self.config = config
        self.router = router if router is not None else make_router(
            config.router, **({"ack_flooding": config.ack_flooding,
                               "hop_threshold": config.hop_threshold}
                              if config.router == "MaxProp" else {}))

        self.node_ids = sorted({s.node_id for s in trace}, key=node_key)
        self.index = {n: i for i, n in enumerate(self.node_ids)}
        self._times = np.array([s.time for s in trace], dtype=float)
        if np.any(np.diff(self._times) < 0):
            order = np.argsort(self._times, kind="stable")
            trace = [trace[k] for k in order]
            self._times = self._times[order]
        self._nodes = np.array([self.index[s.node_id] for s in trace], dtype=np.intp)
        self._xy = np.array([(s.x, s.y) for s in trace], dtype=float)

        self.start = float(self._times[0])
        duration = config.sim_duration
        if duration is None:
            duration = float(self._times[-1]) - self.start
        self.duration = duration
        self.n_steps = int(math.floor(duration / config.time_step + 1e-9))

        capacity = config.buffer_size * MB
        self.buffers: Dict[str, Buffer] = {n: Buffer(capacity) for n in self.node_ids}
        self.delivered_at: Dict[str, set] = {n: set() for n in self.node_ids}
        self.positions = np.full((len(self.node_ids), 2), np.nan)
        self.links: Dict[Tuple[str, str], LinkState] = {}
        self.log = EventLog()
        self.messages: Dict[str, Message] = {}
        self.delivered: Dict[str, float] = {}
        self._incoming = set()  # (receiver, msg_id) pairs in flight
        self._version = {n: 0 for n in self.node_ids}
        self._expiry: List[Tuple[float, Tuple, str]] = []
        self._rng = np.random.default_rng(config.seed)
        self._ptr = 0
        self._msg_counter = 0
        self.now = self.start
        self.step_index = 0
        self.router.attach(self)

    # -- helpers used by routers
    def summary(self, node: str) -> set:
        held = set(self.buffers[node].entries)
        held |= self.delivered_at[node]
        held |= {m for (r, m) in self._incoming if r == node}
        return held

    def remove_copy(self, node: str, msg_id: str, reason: str):
        """Delete a buffered copy, aborting transfers that send it."""
        if msg_id not in self.buffers[node]:
            return
        self._abort_sending(node, msg_id)
        self.buffers[node].remove(msg_id)
        self._version[node] += 1
        self._emit("dropped", msg_id, node, reason)

    # -- internals
    def _emit(self, kind, msg_id, a, b):
        self.log.append(LogRecord(self.now, kind, msg_id, a, b))

    def _abort(self, link: LinkState):
        tr = link.in_flight
        link.in_flight = None
        self._incoming.discard((tr.receiver, tr.msg_id))
        self._version[tr.receiver] += 1
        self._emit("aborted", tr.msg_id, tr.sender, tr.receiver)

    def _abort_sending(self, node, msg_id):
        for key in sorted(self.links, key=self._pair_key):
            link = self.links[key]
            tr = link.in_flight
            if tr is not None and tr.sender == node and tr.msg_id == msg_id:
                self._abort(link)

    def _pair_key(self, pair):
        return (self.index[pair[0]], self.index[pair[1]])

    def _apply_positions(self) -> bool:
        moved = False
        times, ptr = self._times, self._ptr
        limit = self.now + 1e-9
        while ptr < len(times) and times[ptr] <= limit:
            self.positions[self._nodes[ptr]] = self._xy[ptr]
            ptr += 1
            moved = True
        self._ptr = ptr
        return moved

    def _update_links(self):
        missing = np.isnan(self.positions[:, 0])
        if missing.any():
            bad = self.node_ids[int(np.argmax(missing))]
            raise UnknownNodeInTrace(f"node {bad} has no position at t={self.now}")
        i, j = _linked_pairs(self.positions, self.config.transmit_range)
        ids = self.node_ids
        current = {(ids[a], ids[b]) for a, b in zip(i.tolist(), j.tolist())}
        for key in sorted(set(self.links) - current, key=self._pair_key):
            link = self.links.pop(key)
            if link.in_flight is not None:
                self._abort(link)
            self.router.on_link_down(key[0], key[1], link.bytes_moved)
        for key in sorted(current - set(self.links), key=self._pair_key):
            self.links[key] = LinkState(key, self.now)
            self.router.on_link_up(*key)

    def _create_messages(self):
        cfg = self.config
        n = len(self.node_ids)
        if n < 2:
            return
        while True:
            if cfg.max_messages is not None and self._msg_counter >= cfg.max_messages:
                return
            due = self.start + self._msg_counter * cfg.event_interval
            if due > self.now + 1e-9:
                return
            src = int(self._rng.integers(n))
            dest = int(self._rng.integers(n - 1))
            if dest >= src:
                dest += 1
            self._msg_counter += 1
            s, d = self.node_ids[src], self.node_ids[dest]
            msg = Message(f"M{self._msg_counter}", s, d, cfg.event_size * KB,
                          self.now, cfg.msg_ttl, (s,))
            self.messages[msg.id] = msg
            self._emit("created", msg.id, s, d)
            heapq.heappush(self._expiry, (msg.created_at + msg.ttl, message_key(msg.id), msg.id))
            self._store(s, msg)

    def _store(self, node: str, msg: Message) -> bool:
        buf = self.buffers[node]
        sending = {link.in_flight.msg_id for link in self.links.values()
                   if link.in_flight is not None and link.in_flight.sender == node}
        try:
            ok, victims = buffer_admit(buf, msg, self.router.drop_order(node)
                                       if msg.size > buf.free else (), sending)
        except MessageLargerThanBuffer:
            ok, victims = False, []
        for mid in victims:
            self._emit("dropped", mid, node, "evicted")
        if not ok:
            self._emit("dropped", msg.id, node, "refused")
            return False
        buf.add(msg, self.now)
        self._version[node] += 1
        return True

    def _progress(self):
        step_bytes = self.config.transmit_speed * KB * self.config.time_step
        for key in sorted(self.links, key=self._pair_key):
            link = self.links[key]
            tr = link.in_flight
            if tr is None or tr.started_at == self.step_index:
                continue
            tr.done += step_bytes
            link.bytes_moved += step_bytes
            if tr.done >= tr.size - 1e-9:
                link.in_flight = None
                self._incoming.discard((tr.receiver, tr.msg_id))
                self._complete(tr)

    def _complete(self, tr: Transfer):
        entry = self.buffers[tr.sender].entries.get(tr.msg_id)
        msg = entry[0].hop(tr.receiver)
        self._emit("relayed", msg.id, tr.sender, tr.receiver)
        if tr.receiver == msg.dest:
            if msg.id not in self.delivered:
                self.delivered[msg.id] = self.now
                self.delivered_at[tr.receiver].add(msg.id)
                self._version[tr.receiver] += 1
                self._emit("delivered", msg.id, tr.sender, tr.receiver)
                self.router.on_delivered(tr.receiver, msg)
            return
        if self._store(tr.receiver, msg):
            self.router.on_received(tr.receiver, msg)

    def _schedule(self):
        for key in sorted(self.links, key=self._pair_key):
            link = self.links[key]
            if link.in_flight is not None:
                continue
            a, b = key
            versions = (self._version[a], self._version[b])
            if link.idle_versions == versions:
                continue
            for sender, receiver, mid in self.router.select_transfers(link):
                if mid not in self.buffers[sender] or (receiver, mid) in self._incoming:
                    continue
                if mid in self.buffers[receiver] or mid in self.delivered_at[receiver]:
                    continue
                msg = self.buffers[sender].entries[mid][0]
                link.in_flight = Transfer(mid, sender, receiver, msg.size, self.step_index)
                link.last_sender = sender
                self._incoming.add((receiver, mid))
                self._emit("transfer_started", mid, sender, receiver)
                break
            else:
                link.idle_versions = versions

    def _expire(self):
        while self._expiry and self.now - (self._expiry[0][0]) > 1e-9:
            _, _, mid = heapq.heappop(self._expiry)
            for node in self.node_ids:
                if mid in self.buffers[node]:
                    self._abort_sending(node, mid)
                    self.buffers[node].remove(mid)
                    self._version[node] += 1
                    self._emit("expired", mid, node, "-")

    def step(self):
        moved = self._apply_positions()
        if moved or self.step_index == 0:
            self._update_links()
        self._create_messages()
        self._progress()
        self._schedule()
        self._expire()

    def run(self):
        dt = self.config.time_step
        for k in range(self.n_steps + 1):
            self.step_index = k
            self.now = round(self.start + k * dt, 9)
            self.step()
        return self

    def accounting(self) -> Dict[str, int]:
        """Classify every created message by its best-reached end state."""
        counts = dict(created=len(self.messages), delivered=0, buffered=0,
                      in_flight=0, expired=0, dropped=0)
        buffered = set()
        for buf in self.buffers.values():
            buffered.update(buf.entries)
        flying = {m for (_, m) in self._incoming}
        expired = {r.msg_id for r in self.log if r.kind == "expired"}
        for mid in self.messages:
            if mid in self.delivered:
                counts["delivered"] += 1
            elif mid in buffered:
                counts["buffered"] += 1
            elif mid in flying:
                counts["in_flight"] += 1
            elif mid in expired:
                counts["expired"] += 1
            else:
                counts["dropped"] += 1
        return counts


def run(config: ScenarioConfig, trace: Sequence[TraceSample],
        router_impl: Optional[Router] = None):
    """Simulate one scenario; returns ``(SimReport, EventLog)``."""
    from .metrics import report_from_log

    sim = Simulation(config, trace, router_impl).run()
    return report_from_log(sim.log), sim.log
