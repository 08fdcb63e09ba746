"""Config files, single runs and parameter sweeps."""

from __future__ import annotations

import itertools
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import FEATURES, Dataset
from .engine import ScenarioConfig, run
from .errors import ConfigError
from .optimizer import CATEGORICAL01, INTEGER, ParamBox, default_box
from .routing import ROUTER_TOKENS

log = logging.getLogger(__name__)

# dotted config key -> ScenarioConfig field
SCENARIO_KEYS = {
    "btInterface.transmitSpeed": "transmit_speed",
    "btInterface.transmitRange": "transmit_range",
    "Group.bufferSize": "buffer_size",
    "Group.waitTime": "wait_time",
    "Group.router": "router",
    "Group.msgTtl": "msg_ttl",
    "Events1.interval": "event_interval",
    "Events1.size": "event_size",
    "Scenario.seed": "seed",
    "Scenario.timeStep": "time_step",
    "Scenario.duration": "sim_duration",
    "Scenario.maxMessages": "max_messages",
    "MaxPropRouter.ackFlooding": "ack_flooding",
    "MaxPropRouter.hopThreshold": "hop_threshold",
}
KEY_ALIASES = {"EventsI.interval": "Events1.interval", "EventsI.size": "Events1.size"}
MOVEMENT_KEY = "Movement.file"
FEATURE_FIELDS = [SCENARIO_KEYS[f] for f in FEATURES]


def _parse_number(text: str) -> float:
    t = text.strip().replace(",", "")
    while t and t[-1].isalpha():  # 250k, 25m, 5583M, 640s
        t = t[:-1]
    return float(t)


def _parse_value(field_name: str, text: str):
    text = text.strip()
    if field_name == "router":
        if text in ROUTER_TOKENS:
            return ROUTER_TOKENS[text]
        if text in ("0", "1"):
            return "Epidemic" if text == "0" else "MaxProp"
        raise ConfigError(f"unknown router {text!r}")
    if field_name == "ack_flooding":
        if text.lower() in ("true", "1", "yes", "on"):
            return True
        if text.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"expected a boolean, got {text!r}")
    value = _parse_number(text)
    if field_name == "hop_threshold" and text.lower() == "adaptive":
        return None
    if field_name in ("seed", "max_messages", "hop_threshold"):
        if value != int(value):
            raise ConfigError(f"{field_name} must be an integer")
        return int(value)
    return value


@dataclass
class ConfigFile:
    scenario: ScenarioConfig
    movement_file: Optional[str] = None


def parse_config(text: str, base_dir: str = ".") -> ConfigFile:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    movement = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value: {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = KEY_ALIASES.get(key, key)
        if key == MOVEMENT_KEY:
            movement = value if os.path.isabs(value) else os.path.join(base_dir, value)
            continue
        if key not in SCENARIO_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[SCENARIO_KEYS[key]] = _parse_value(SCENARIO_KEYS[key], value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    try:
        scenario = ScenarioConfig(**values)
    except ConfigError as exc:
        raise ConfigError(str(exc)) from None
    return ConfigFile(scenario, movement)


def load_config(path) -> ConfigFile:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, os.path.dirname(os.path.abspath(path)))


def format_config(cfg: ScenarioConfig, movement_file: Optional[str] = None) -> str:
    from .metrics import format_value

    inverse = {v: k for k, v in SCENARIO_KEYS.items()}
    lines = []
    for f in FEATURE_FIELDS + ["seed", "time_step", "sim_duration", "max_messages",
                               "ack_flooding", "hop_threshold"]:
        v = getattr(cfg, f)
        if v is None:
            continue
        if f == "router":
            v = f"{v}Router"
        elif isinstance(v, bool):
            v = "true" if v else "false"
        else:
            v = format_value(v)
        lines.append(f"{inverse[f]} = {v}")
    if movement_file:
        lines.append(f"{MOVEMENT_KEY} = {movement_file}")
    return "\n".join(lines) + "\n"


def features_of(cfg: ScenarioConfig) -> np.ndarray:
    return np.array([cfg.router_code if f == "router" else float(getattr(cfg, f))
                     for f in FEATURE_FIELDS])


def apply_features(base: ScenarioConfig, x, seed: Optional[int] = None) -> ScenarioConfig:
    """Overwrite the eight swept knobs of ``base`` with the vector ``x``."""
    changes = {}
    for f, v in zip(FEATURE_FIELDS, np.asarray(x, dtype=float)):
        if f == "router":
            changes[f] = "MaxProp" if v >= 0.5 else "Epidemic"
        else:
            changes[f] = float(v)
    if seed is not None:
        changes["seed"] = int(seed)
    return replace(base, **changes)


@dataclass
class SweepPlan:
    """Which scenarios a sweep runs.

    ``mode="random"`` draws ``runs`` points uniformly from ``box``;
    ``mode="grid"`` runs the full factorial of ``levels`` evenly spaced
    values per knob (router always both values).
    """

    box: ParamBox = field(default_factory=default_box)
    mode: str = "random"
    runs: int = 100
    levels: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("random", "grid"):
            raise ConfigError(f"unknown sweep mode {self.mode!r}")
        if self.runs < 1:
            raise ConfigError("run count must be at least 1")
        if self.levels < 1:
            raise ConfigError("levels must be at least 1")

    def points(self) -> np.ndarray:
        if self.mode == "random":
            rng = np.random.default_rng(np.random.SeedSequence(self.seed).spawn(1)[0])
            return self.box.sample(rng, self.runs)
        axes = []
        for d in self.box.dims:
            if d.kind == CATEGORICAL01:
                axes.append(sorted({float(d.low), float(d.high)}))
                continue
            vals = np.linspace(d.low, d.high, self.levels)
            if d.kind == INTEGER:
                vals = np.floor(vals + 0.5)
            axes.append(sorted(set(vals.tolist())))
        return np.array(list(itertools.product(*axes)), dtype=float)

    def run_seeds(self, n: int) -> List[int]:
        children = np.random.SeedSequence(self.seed).spawn(n + 1)[1:]
        return [int(c.generate_state(1)[0]) for c in children]


_TRACE = None


def _init_worker(trace):
    global _TRACE
    _TRACE = trace


def _run_one(args):
    index, cfg = args
    try:
        rep, _ = run(cfg, _TRACE)
        return index, rep.delivery_prob, rep.overhead_ratio, None
    except Exception as exc:  # one bad run must not sink the sweep
        return index, math.nan, math.nan, f"{type(exc).__name__}: {exc}"


def sweep(plan: SweepPlan, base: ScenarioConfig, trace, workers: int = 1) -> Dataset:
    """Simulate every scenario of ``plan``; one dataset row per run.

    Runs that raise are kept as rows with NaN targets. Output order is the
    run index, so the result does not depend on ``workers``.
    """
    X = plan.points()
    seeds = plan.run_seeds(len(X))
    jobs = [(i, apply_features(base, X[i], seeds[i])) for i in range(len(X))]
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(trace,)) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        _init_worker(trace)
        results = [_run_one(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    dp = np.array([r[1] for r in results], dtype=float)
    oh = np.array([r[2] for r in results], dtype=float)
    for i, _, _, err in results:
        if err:
            log.warning("run %d failed: %s", i, err)
    return Dataset(X, {"delivery_prob": dp, "overhead_ratio": oh})


def simulate_features(base: ScenarioConfig, trace, features: Dict[str, float]):
    """Run one scenario given a ``{feature name: value}`` dict."""
    x = [features[f] for f in FEATURES]
    rep, _ = run(apply_features(base, x), trace)
    return rep


def desk_scenario(seed: int = 7, duration: float = 1800.0, nodes: int = 20):
    """A small random-waypoint setting that runs in well under a second.

    20 nodes on a 1000 m square moving at 5-15 m/s with pauses up to 60 s,
    sampled once a second. Returns ``(base_config, trace)``.
    """
    from .trace import generate_synthetic_trace

    trace = generate_synthetic_trace(nodes, duration, 1000.0, 1000.0, speed=(5.0, 15.0),
                                     pause=(0.0, 60.0), sample_period=1.0, seed=seed)
    return ScenarioConfig(), trace
