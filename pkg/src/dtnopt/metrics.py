"""Run-level reports and dataset-level summary statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import (
    EmptyInput,
    InconsistentCounts,
    NoDeliveries,
    NoMessagesSent,
    TooFewRows,
)
from .trace import format_number

# Written wherever a statistic has no value, e.g. overhead with zero deliveries.
UNDEFINED = float("nan")


def is_undefined(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def format_value(value) -> str:
    if is_undefined(value):
        return "NaN"
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_number(value)


def delivery_probability(received: int, sent: int) -> float:
    if sent <= 0:
        raise NoMessagesSent("no messages were sent")
    if not 0 <= received <= sent:
        raise InconsistentCounts(f"received={received} outside [0, sent={sent}]")
    return received / sent


def average_latency(pairs: Iterable) -> float:
    """Mean of ``received_at - created_at`` over delivered messages."""
    delays = [r - c for c, r in pairs]
    if not delays:
        raise NoDeliveries("no delivered messages")
    if any(d < 0 for d in delays):
        raise ValueError("a message was received before it was created")
    return math.fsum(delays) / len(delays)


def overhead_ratio(relayed: int, delivered: int) -> float:
    """Redundant relays per delivery; NaN when nothing was delivered."""
    if relayed < delivered:
        raise InconsistentCounts(f"relayed={relayed} < delivered={delivered}")
    if delivered == 0:
        return UNDEFINED
    return (relayed - delivered) / delivered


@dataclass
class SimReport:
    created: int = 0
    delivered: int = 0
    relayed: int = 0
    dropped: int = 0
    aborted: int = 0
    expired: int = 0
    started: int = 0
    delivery_prob: float = UNDEFINED
    overhead_ratio: float = UNDEFINED
    avg_latency: float = UNDEFINED
    latencies: List[float] = field(default_factory=list, repr=False)

    def to_text(self) -> str:
        """``key=value`` lines; latency is reported as ``latency_avg``."""
        rows = [
            ("created", self.created), ("started", self.started),
            ("relayed", self.relayed), ("aborted", self.aborted),
            ("dropped", self.dropped), ("expired", self.expired),
            ("delivered", self.delivered), ("delivery_prob", self.delivery_prob),
            ("overhead_ratio", self.overhead_ratio), ("latency_avg", self.avg_latency),
        ]
        return "".join(f"{k}={format_value(v)}\n" for k, v in rows)

    @classmethod
    def from_text(cls, text: str) -> "SimReport":
        rep = cls()
        for line in text.splitlines():
            if "=" not in line:
                continue
            k, v = line.split("=", 1)
            k = "avg_latency" if k == "latency_avg" else k
            if hasattr(rep, k) and k != "latencies":
                cur = getattr(rep, k)
                setattr(rep, k, int(v) if isinstance(cur, int) else float(v))
        return rep


def report_from_log(log) -> SimReport:
    """Summarize an :class:`~dtnopt.engine.EventLog`."""
    rep = SimReport()
    created_at = {}
    first_delivery = {}
    for r in log:
        kind = r.kind
        if kind == "created":
            created_at[r.msg_id] = r.time
        elif kind == "relayed":
            rep.relayed += 1
        elif kind == "delivered":
            first_delivery.setdefault(r.msg_id, r.time)
        elif kind == "dropped":
            rep.dropped += 1
        elif kind == "aborted":
            rep.aborted += 1
        elif kind == "expired":
            rep.expired += 1
        elif kind == "transfer_started":
            rep.started += 1
    rep.created = len(created_at)
    rep.delivered = len(first_delivery)
    rep.latencies = [first_delivery[m] - created_at[m] for m in first_delivery]
    if rep.created:
        rep.delivery_prob = delivery_probability(rep.delivered, rep.created)
    rep.overhead_ratio = overhead_ratio(rep.relayed, rep.delivered)
    if rep.delivered:
        rep.avg_latency = average_latency(
            (created_at[m], first_delivery[m]) for m in first_delivery)
    return rep


@dataclass(frozen=True)
class BoxStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


def box_stats(values: Sequence[float]) -> BoxStats:
    """Five-number summary; quartiles interpolate linearly between order stats."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise EmptyInput("box_stats needs at least one value")
    q = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    return BoxStats(float(v[0]), float(q[0]), float(q[1]), float(q[2]), float(v[-1]))


def pearson_matrix(columns) -> np.ndarray:
    """Pearson correlation between the columns of a 2-D array.

    Uses population moments. Entries involving a constant column are NaN
    (undefined); the diagonal of a non-constant column is exactly 1.
    """
    x = np.asarray(columns, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise TooFewRows("need at least two rows")
    centered = x - x.mean(axis=0)
    sd = np.sqrt((centered ** 2).mean(axis=0))
    cov = centered.T @ centered / x.shape[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        r = cov / np.outer(sd, sd)
    r = np.clip(r, -1.0, 1.0)
    r = (r + r.T) / 2
    const = np.ptp(x, axis=0) == 0
    r[const, :] = np.nan
    r[:, const] = np.nan
    idx = np.flatnonzero(~const)
    r[idx, idx] = 1.0
    return r
