"""Average online gradient descent (AOGD) for pairwise AUC losses.

Each arrival takes two steps: one against the running mean of the
opposite-class mapped features, then a correction step against a cached
opposite-class example that is refreshed by a Bernoulli(p) coin.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Union

import numpy as np

from .dataio import Example
from .features import IdentityMap, RffMap, rff_sample
from .loss import PairLoss


class DivergenceError(FloatingPointError):
    """Non-finite gradient or weights; usually a step size that is too large."""

    def __init__(self, t: int, what: str = "gradient"):
        self.t = t
        super().__init__(f"non-finite {what} at step t={t}; reduce the step size")


@dataclass(frozen=True)
class GammaRule:
    """Correction step size: ``fixed`` returns ``value``; ``adaptive`` returns ``value * Gamma_t * M * eta``."""

    kind: str = "adaptive"
    value: float = 0.1

    def __post_init__(self):
        if self.kind not in ("fixed", "adaptive"):
            raise ValueError(f"unknown gamma rule {self.kind!r}")
        if not self.value >= 0:
            raise ValueError("gamma rule value must be >= 0")

    @classmethod
    def parse(cls, text: str) -> "GammaRule":
        kind, _, val = text.partition(":")
        return cls(kind.strip().lower(), float(val) if val else cls.value)

    def __str__(self):
        return f"{self.kind}:{self.value:g}"


@dataclass
class AogdConfig:
    eta: float = 0.1
    gamma_rule: GammaRule = field(default_factory=GammaRule)
    p: float = 0.1
    D: int = 64
    sigma: Union[float, list] = 1.0
    lam: float = 0.0
    seed: int = 0
    loss: str = "squared"
    mapping: str = "rff"
    eta_schedule: str = "constant"

    def validate(self):
        if not self.eta > 0:
            raise ValueError("eta must be > 0")
        if not 0 < self.p <= 1:
            raise ValueError("p must lie in (0, 1]")
        if self.mapping == "rff" and (self.D < 2 or self.D % 2):
            raise ValueError("D must be even and >= 2")
        if self.mapping not in ("rff", "linear"):
            raise ValueError(f"unknown mapping {self.mapping!r}")
        if self.eta_schedule not in ("constant", "inv_sqrt"):
            raise ValueError(f"unknown eta schedule {self.eta_schedule!r}")
        if isinstance(self.gamma_rule, str):
            self.gamma_rule = GammaRule.parse(self.gamma_rule)
        PairLoss(self.loss, self.lam)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["gamma_rule"] = str(self.gamma_rule)
        if isinstance(self.sigma, np.ndarray):
            out["sigma"] = self.sigma.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "AogdConfig":
        d = dict(d)
        if isinstance(d.get("gamma_rule"), str):
            d["gamma_rule"] = GammaRule.parse(d["gamma_rule"])
        return cls(**d)


@dataclass
class StepReport:
    """Losses suffered at one arrival; ``None`` when the step had no opposite-class partner."""

    t: int
    label: int
    avg_loss: Optional[float]
    rand_loss: Optional[float]
    eta: float
    gamma: float

    @property
    def avg_skipped(self) -> bool:
        return self.avg_loss is None

    @property
    def rand_skipped(self) -> bool:
        return self.rand_loss is None


class ClassStats:
    """Running mean, Welford deviation sum and Bernoulli-refreshed cache for one label."""

    def __init__(self, D: int):
        self.mean_phi = np.zeros(D)
        self.count = 0
        self.cached_phi: Optional[np.ndarray] = None
        self.trace_var_accum = 0.0

    def push(self, phi: np.ndarray):
        self.count += 1
        diff = phi - self.mean_phi
        self.mean_phi += diff / self.count
        self.trace_var_accum += float(diff @ (phi - self.mean_phi))

    def to_dict(self) -> dict:
        return {
            "mean_phi": self.mean_phi.tolist(),
            "count": self.count,
            "cached_phi": None if self.cached_phi is None else self.cached_phi.tolist(),
            "trace_var_accum": self.trace_var_accum,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassStats":
        s = cls(len(d["mean_phi"]))
        s.mean_phi = np.asarray(d["mean_phi"], dtype=np.float64)
        s.count = int(d["count"])
        s.cached_phi = None if d["cached_phi"] is None else np.asarray(d["cached_phi"], dtype=np.float64)
        s.trace_var_accum = float(d["trace_var_accum"])
        return s


def build_feature_map(mapping: str, d: int, D: int, sigma, seed: int):
    if mapping == "linear":
        return IdentityMap(d)
    return rff_sample(d, D, sigma, seed)


class OnlineLearner:
    """Shared bookkeeping for the pairwise online learners in this package.

    Subclasses implement :meth:`update` on an already-mapped feature vector;
    :meth:`step` maps a raw :class:`Example` first.
    """

    name = "base"

    def __init__(self, feature_map, loss: PairLoss, eta: float, eta_schedule: str = "constant"):
        self.feature_map = feature_map
        self.loss = loss
        self.eta = float(eta)
        self.eta_schedule = eta_schedule
        self.w = np.zeros(feature_map.dim_out)
        self.t = 0

    def eta_at(self, t: int) -> float:
        if self.eta_schedule == "inv_sqrt":
            return self.eta / math.sqrt(t)
        return self.eta

    def step(self, z: Example) -> StepReport:
        return self.update(self.feature_map.map(z), z.label)

    def update(self, phi: np.ndarray, label: int) -> StepReport:
        raise NotImplementedError

    def fit_stream(self, Phi: np.ndarray, labels: Iterable[int], epochs: int = 1) -> list:
        reports = []
        labels = np.asarray(labels)
        # overflow surfaces as DivergenceError; keep numpy quiet on the way there
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(epochs):
                for phi, y in zip(Phi, labels):
                    reports.append(self.update(phi, int(y)))
        return reports

    def predict(self, x) -> float:
        return float(self.w @ self.feature_map.map(x))

    def decision_function(self, Phi: np.ndarray) -> np.ndarray:
        return np.asarray(Phi) @ self.w

    def _descend(self, w, g, step, what="gradient"):
        if not np.all(np.isfinite(g)):
            raise DivergenceError(self.t, what)
        w = w - step * g
        if not np.all(np.isfinite(w)):
            raise DivergenceError(self.t, "weights")
        return w


class Aogd(OnlineLearner):
    """AOGD learner state.  ``d`` is the raw input dimension."""

    name = "aogd"

    def __init__(self, cfg: AogdConfig, d: int, feature_map=None):
        cfg.validate()
        if d < 1:
            raise ValueError("input dimension d must be >= 1")
        if feature_map is None:
            feature_map = build_feature_map(cfg.mapping, d, cfg.D, cfg.sigma, cfg.seed)
        loss = PairLoss(cfg.loss, cfg.lam)
        if cfg.gamma_rule.kind == "adaptive" and math.isinf(loss.constants(1.0).smoothness_M):
            raise ValueError(f"adaptive gamma needs a smooth loss; use a fixed gamma with {cfg.loss!r}")
        super().__init__(feature_map, loss, cfg.eta, cfg.eta_schedule)
        self.cfg = cfg
        self.d = d
        D = feature_map.dim_out
        self.pos = ClassStats(D)
        self.neg = ClassStats(D)
        self.rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1,)))
        self._M = loss.constants(1.0).smoothness_M

    @property
    def rff(self) -> RffMap:
        return self.feature_map

    def gamma_hat(self) -> float:
        """Pooled within-class total variance of the mapped features seen so far."""
        return (self.pos.trace_var_accum + self.neg.trace_var_accum) / max(1, self.t - 1)

    def gamma_of(self, eta: Optional[float] = None) -> float:
        rule = self.cfg.gamma_rule
        if rule.kind == "fixed":
            return rule.value
        if math.isinf(self._M):
            raise ValueError("adaptive gamma is undefined for a non-smooth loss; use a fixed gamma")
        if eta is None:
            eta = self.eta_at(self.t + 1)
        return rule.value * self.gamma_hat() * self._M * eta

    def update(self, phi: np.ndarray, label: int) -> StepReport:
        if label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {label!r}")
        own, other = (self.pos, self.neg) if label == 1 else (self.neg, self.pos)
        sign = float(label)
        t = self.t + 1
        eta = self.eta_at(t)
        gamma = self.gamma_of(eta)
        self.t = t
        w = self.w

        avg_loss = rand_loss = None
        if other.count:
            # orientation: delta = phi_pos - phi_neg
            avg_loss, g = self.loss.value_and_grad(w, sign * (phi - other.mean_phi))
            w = self._descend(w, g, eta)
        if other.cached_phi is not None:
            rand_loss, g = self.loss.value_and_grad(w, sign * (phi - other.cached_phi))
            w = self._descend(w, g, gamma)
        self.w = w

        own.push(phi)
        coin = self.rng.random()
        if own.cached_phi is None or coin < self.cfg.p:
            own.cached_phi = np.array(phi, dtype=np.float64)
        return StepReport(t, label, avg_loss, rand_loss, eta, gamma)

    # ------------------------------------------------------------ checkpoint

    def to_checkpoint(self) -> dict:
        if isinstance(self.feature_map, RffMap):
            fmap = json.loads(self.feature_map.to_json())
        else:
            fmap = {"linear": self.d}
        return {
            "cfg": self.cfg.to_dict(),
            "d": self.d,
            "feature_map": fmap,
            "w": self.w.tolist(),
            "pos": self.pos.to_dict(),
            "neg": self.neg.to_dict(),
            "t": self.t,
            "rng": self.rng.bit_generator.state,
        }

    @classmethod
    def from_checkpoint(cls, ck: Union[dict, str]) -> "Aogd":
        if isinstance(ck, str):
            ck = json.loads(ck)
        cfg = AogdConfig.from_dict(ck["cfg"])
        fmap = ck["feature_map"]
        feature_map = IdentityMap(fmap["linear"]) if "linear" in fmap else RffMap.from_json(fmap)
        obj = cls(cfg, ck["d"], feature_map)
        obj.w = np.asarray(ck["w"], dtype=np.float64)
        obj.pos = ClassStats.from_dict(ck["pos"])
        obj.neg = ClassStats.from_dict(ck["neg"])
        obj.t = int(ck["t"])
        obj.rng.bit_generator.state = ck["rng"]
        return obj


def init(cfg: AogdConfig, d: int) -> Aogd:
    return Aogd(cfg, d)
