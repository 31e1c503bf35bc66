"""Comparison learners sharing AOGD's mapping, loss and step-size machinery."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .learner import OnlineLearner, StepReport
from .loss import PairLoss


class OgdLast(OnlineLearner):
    """One gradient step per arrival against the most recent opposite-label example."""

    name = "ogd_last"

    def __init__(self, feature_map, loss: PairLoss, eta: float, eta_schedule: str = "constant"):
        super().__init__(feature_map, loss, eta, eta_schedule)
        self.last = {1: None, -1: None}

    def update(self, phi: np.ndarray, label: int) -> StepReport:
        if label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {label!r}")
        self.t += 1
        eta = self.eta_at(self.t)
        partner = self.last[-label]
        loss_val = None
        if partner is not None:
            loss_val, g = self.loss.value_and_grad(self.w, label * (phi - partner))
            self.w = self._descend(self.w, g, eta)
        self.last[label] = np.array(phi, dtype=np.float64)
        return StepReport(self.t, label, loss_val, None, eta, 0.0)


class ReservoirBuffer:
    """Uniform reservoir sample (Algorithm R) of at most ``capacity`` vectors."""

    def __init__(self, capacity: int, dim: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("buffer capacity must be >= 1")
        self.capacity = capacity
        self.items = np.empty((capacity, dim))
        self.size = 0
        self.seen = 0
        self.rng = rng

    def add(self, phi: np.ndarray) -> Optional[int]:
        """Offer ``phi``; return the slot it landed in, or ``None`` if discarded."""
        self.seen += 1
        if self.size < self.capacity:
            slot = self.size
            self.size += 1
        else:
            j = int(self.rng.integers(self.seen))
            if j >= self.capacity:
                return None
            slot = j
        self.items[slot] = phi
        return slot

    @property
    def contents(self) -> np.ndarray:
        return self.items[: self.size]


class BufferOgd(OnlineLearner):
    """OGD on the loss averaged over a per-class reservoir buffer of size ``s``.

    The gradient at each arrival uses the opposite-label buffer *before* the
    arrival is offered to its own-label buffer.
    """

    name = "buffer_ogd"

    def __init__(self, feature_map, loss: PairLoss, eta: float, s: int, seed: int = 0,
                 eta_schedule: str = "constant"):
        super().__init__(feature_map, loss, eta, eta_schedule)
        if s < 1:
            raise ValueError("buffer size s must be >= 1")
        self.s = s
        D = feature_map.dim_out
        pos_ss, neg_ss = np.random.SeedSequence(seed, spawn_key=(2,)).spawn(2)
        self.buffers = {1: ReservoirBuffer(s, D, np.random.default_rng(pos_ss)),
                        -1: ReservoirBuffer(s, D, np.random.default_rng(neg_ss))}
        self.last_grad: Optional[np.ndarray] = None

    def update(self, phi: np.ndarray, label: int) -> StepReport:
        if label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {label!r}")
        self.t += 1
        eta = self.eta_at(self.t)
        other = self.buffers[-label].contents
        loss_val = None
        self.last_grad = None
        if other.shape[0]:
            if label == 1:
                g = self.loss.mean_grad(self.w, phi, other)
                slack = 1.0 - (phi - other) @ self.w
            else:
                g = self.loss.mean_grad(self.w, other, phi)
                slack = 1.0 - (other - phi) @ self.w
            base = slack * slack if self.loss.kind == "squared" else np.maximum(slack, 0.0)
            loss_val = float(base.mean()) + 0.5 * self.loss.lam * float(self.w @ self.w)
            self.last_grad = g
            self.w = self._descend(self.w, g, eta)
        self.buffers[label].add(phi)
        return StepReport(self.t, label, loss_val, None, eta, 0.0)
