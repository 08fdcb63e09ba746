"""Differential evolution over the scenario box and the surrogate objective."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import FEATURES
from .errors import DegenerateBox, OutOfBounds

REAL, INTEGER, CATEGORICAL01 = "real", "integer", "categorical01"


@dataclass(frozen=True)
class Dimension:
    name: str
    low: float
    high: float
    kind: str = REAL


class ParamBox:
    """Ordered per-dimension bounds with a kind per dimension."""

    def __init__(self, dims: Sequence[Dimension]):
        self.dims = tuple(dims)
        for d in self.dims:
            if d.kind == CATEGORICAL01:
                if (d.low, d.high) not in ((0, 1), (0, 0), (1, 1)):
                    raise DegenerateBox(f"{d.name}: categorical bounds must be within {{0, 1}}")
            elif d.kind in (REAL, INTEGER):
                if not d.low < d.high:
                    raise DegenerateBox(f"{d.name}: need low < high, got {d.low}, {d.high}")
                if d.kind == INTEGER and math.ceil(d.low) > math.floor(d.high):
                    raise DegenerateBox(f"{d.name}: no integer inside [{d.low}, {d.high}]")
            else:
                raise ValueError(f"unknown dimension kind {d.kind!r}")
        self.low = np.array([d.low for d in self.dims], dtype=float)
        self.high = np.array([d.high for d in self.dims], dtype=float)

    def __len__(self):
        return len(self.dims)

    @property
    def names(self):
        return [d.name for d in self.dims]

    def repair(self, x: np.ndarray) -> np.ndarray:
        """Clamp into the box, round integer dims, snap categorical dims."""
        x = np.clip(np.asarray(x, dtype=float), self.low, self.high)
        for i, d in enumerate(self.dims):
            if d.kind == INTEGER:
                x[..., i] = np.clip(np.floor(x[..., i] + 0.5), math.ceil(d.low),
                                    math.floor(d.high))
            elif d.kind == CATEGORICAL01:
                x[..., i] = np.clip((x[..., i] >= 0.5).astype(float), d.low, d.high)
        return x

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != len(self) or np.any(x < self.low) or np.any(x > self.high):
            return False
        for i, d in enumerate(self.dims):
            if d.kind in (INTEGER, CATEGORICAL01) and np.any(x[..., i] != np.round(x[..., i])):
                return False
        return True

    def sample(self, rng, n: int) -> np.ndarray:
        u = rng.random((n, len(self)))
        return self.repair(self.low + u * (self.high - self.low))

    def normalize(self, X) -> np.ndarray:
        span = np.where(self.high > self.low, self.high - self.low, 1.0)
        return (np.asarray(X, dtype=float) - self.low) / span

    def narrowed(self, **bounds) -> "ParamBox":
        """Copy with some dimensions given new ``(low, high)`` bounds."""
        dims = []
        for d in self.dims:
            if d.name in bounds:
                lo, hi = bounds[d.name]
                d = Dimension(d.name, lo, hi, d.kind)
            dims.append(d)
        return ParamBox(dims)


def default_box() -> ParamBox:
    """The reference sweep ranges, in dataset column order."""
    spec = {
        "btInterface.transmitSpeed": (125, 375, INTEGER),
        "btInterface.transmitRange": (10, 30, INTEGER),
        "Group.bufferSize": (500, 10240, INTEGER),
        "Group.waitTime": (60, 900, INTEGER),
        "Group.router": (0, 1, CATEGORICAL01),
        "Group.msgTtl": (1800, 7200, INTEGER),
        "Events1.interval": (5, 15, INTEGER),
        "Events1.size": (20, 50, INTEGER),
    }
    return ParamBox([Dimension(n, *spec[n]) for n in FEATURES])


@dataclass
class DEConfig:
    """Settings for :func:`differential_evolution`.

    ``popsize`` is a multiplier: the population holds ``popsize * d``
    members (at least 4) unless ``population`` is given explicitly.
    The run stops early once the best score has improved by less than
    ``tol`` over the last ``patience`` generations.
    """

    popsize: int = 15
    F: float = 0.8
    CR: float = 0.9
    max_generations: int = 200
    tol: float = 1e-10
    patience: int = 30
    max_evaluations: Optional[int] = None
    population: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.F <= 2:
            raise ValueError(f"F={self.F} outside (0, 2]")
        if not 0 <= self.CR <= 1:
            raise ValueError(f"CR={self.CR} outside [0, 1]")
        if self.population is not None and self.population < 4:
            raise ValueError("population must be at least 4")

    def size(self, d: int) -> int:
        return self.population if self.population is not None else max(4, self.popsize * d)


@dataclass
class DEResult:
    x: np.ndarray
    score: float
    history: List[float]
    evaluations: int
    generations: int
    evaluated: Optional[np.ndarray] = field(default=None, repr=False)


def differential_evolution(objective: Callable[[np.ndarray], float], box: ParamBox,
                           cfg: DEConfig = None, record: bool = False) -> DEResult:
    """Minimize ``objective`` over ``box`` with DE/rand/1/bin.

    Every trial vector is repaired into the box (clamp, integer rounding,
    0/1 snapping) before evaluation. ``history[g]`` is the best score after
    generation ``g`` (generation 0 is the initial population). With
    ``record=True`` all evaluated points are kept in ``evaluated``.
    """
    cfg = cfg or DEConfig()
    d = len(box)
    npop = cfg.size(d)
    rng = np.random.default_rng(cfg.seed)
    seen = []

    def evaluate(x):
        if record:
            seen.append(x.copy())
        return float(objective(x))

    pop = box.sample(rng, npop)
    scores = np.array([evaluate(x) for x in pop])
    n_eval = npop
    history = [float(scores.min())]
    gen = 0
    while gen < cfg.max_generations:
        if cfg.max_evaluations is not None and n_eval + npop > cfg.max_evaluations:
            break
        gen += 1
        trials = np.empty_like(pop)
        for i in range(npop):
            others = [j for j in range(npop) if j != i]
            a, b, c = rng.choice(others, size=3, replace=False)
            mutant = pop[a] + cfg.F * (pop[b] - pop[c])
            cross = rng.random(d) < cfg.CR
            cross[rng.integers(d)] = True
            trials[i] = box.repair(np.where(cross, mutant, pop[i]))
        trial_scores = np.array([evaluate(x) for x in trials])
        n_eval += npop
        better = trial_scores <= scores
        pop[better] = trials[better]
        scores[better] = trial_scores[better]
        history.append(float(scores.min()))
        if len(history) > cfg.patience and \
                history[-cfg.patience - 1] - history[-1] < cfg.tol:
            break
    best = int(np.argmin(scores))
    return DEResult(pop[best].copy(), float(scores[best]), history, n_eval, gen,
                    np.array(seen) if record else None)


@dataclass
class ObjectiveSpec:
    """Surrogates plus the min-max ranges used to scale their predictions."""

    delivery_model: object
    overhead_model: object
    delivery_range: Tuple[float, float]
    overhead_range: Tuple[float, float]
    weights: Tuple[float, float] = (0.5, 0.5)
    feature_index: Optional[Sequence[int]] = None

    def __post_init__(self):
        wd, wo = self.weights
        if wd < 0 or wo < 0 or not math.isclose(wd + wo, 1.0, abs_tol=1e-12):
            raise ValueError(f"weights must be non-negative and sum to 1, got {self.weights}")

    @classmethod
    def from_dataset(cls, dataset, delivery_model, overhead_model, weights=(0.5, 0.5)):
        dp = dataset.target("delivery_prob")
        oh = dataset.target("overhead_ratio")
        return cls(delivery_model, overhead_model, (float(dp.min()), float(dp.max())),
                   (float(oh.min()), float(oh.max())), tuple(weights))

    def predict(self, x) -> Tuple[float, float]:
        row = np.asarray(x, dtype=float)[None, :]
        return (float(_model_predict(self.delivery_model, row)[0]),
                float(_model_predict(self.overhead_model, row)[0]))


def _model_predict(model, row):
    names = getattr(model, "feature_names", None)
    if names and len(names) != row.shape[1]:
        idx = [FEATURES.index(n) for n in names]
        row = row[:, idx]
    return model.predict(row)


def min_max_scale(value: float, lo: float, hi: float) -> float:
    """Map into [0, 1]; a degenerate range scales everything to 0."""
    if not hi > lo:
        return 0.0
    return min(1.0, max(0.0, (value - lo) / (hi - lo)))


def score_predictions(pred_d: float, pred_o: float, spec: ObjectiveSpec) -> float:
    """Weighted score, lower is better: high delivery and low overhead win."""
    sd = min_max_scale(pred_d, *spec.delivery_range)
    so = min_max_scale(pred_o, *spec.overhead_range)
    wd, wo = spec.weights
    return wd * (1.0 - sd) + wo * so


def objective(x, spec: ObjectiveSpec, box: Optional[ParamBox] = None) -> float:
    if box is not None and not box.contains(x):
        raise OutOfBounds(f"{np.asarray(x).tolist()} is outside the parameter box")
    return score_predictions(*spec.predict(x), spec)


def decode(x, box: ParamBox = None) -> Dict[str, float]:
    """Vector to ``{feature name: value}`` in dataset column order."""
    names = box.names if box is not None else list(FEATURES)
    return {n: float(v) for n, v in zip(names, np.asarray(x, dtype=float))}


@dataclass
class Recommendation:
    x: Dict[str, float]
    score: float
    predicted: Tuple[float, float]
    simulated: Optional[object] = None
    history: List[float] = field(default_factory=list)

    def to_text(self) -> str:
        from .metrics import format_value

        lines = [f"{k}={format_value(v)}" for k, v in self.x.items()]
        lines.append(f"objective={format_value(self.score)}")
        lines.append(f"predicted.delivery_prob={format_value(self.predicted[0])}")
        lines.append(f"predicted.overhead_ratio={format_value(self.predicted[1])}")
        if self.simulated is not None:
            s = self.simulated
            lines.append(f"simulated.delivery_prob={format_value(s.delivery_prob)}")
            lines.append(f"simulated.overhead_ratio={format_value(s.overhead_ratio)}")
            lines.append(f"delta.delivery_prob={format_value(s.delivery_prob - self.predicted[0])}")
            lines.append(f"delta.overhead_ratio={format_value(s.overhead_ratio - self.predicted[1])}")
        return "\n".join(lines) + "\n"


def recommend_and_validate(spec: ObjectiveSpec, box: ParamBox, cfg: DEConfig = None,
                           simulate: Optional[Callable[[Dict[str, float]], object]] = None
                           ) -> Recommendation:
    """Optimize the surrogate objective, then optionally re-simulate the winner.

    ``simulate`` receives the decoded feature dict and returns a
    :class:`~dtnopt.metrics.SimReport`.
    """
    res = differential_evolution(lambda x: objective(x, spec), box, cfg)
    rec = Recommendation(decode(res.x, box), res.score, spec.predict(res.x),
                         history=res.history)
    if simulate is not None:
        rec.simulated = simulate(rec.x)
    return rec
