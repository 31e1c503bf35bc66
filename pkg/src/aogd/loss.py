"""Pairwise AUC surrogates on (positive, negative) mapped feature pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LOSS_KINDS = ("squared", "hinge")


@dataclass(frozen=True)
class LossConstants:
    lipschitz_G: float
    smoothness_M: float


@dataclass(frozen=True)
class PairLoss:
    """Surrogate ``l(1 - <w, phi_pos - phi_neg>) + (lam/2)||w||^2``.

    ``squared`` uses ``l(m) = m**2``; ``hinge`` uses ``max(0, m)`` with the
    subgradient set to zero at the kink.
    """

    kind: str = "squared"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.kind!r}; expected one of {LOSS_KINDS}")
        if not self.lam >= 0:
            raise ValueError("lam must be >= 0")

    @staticmethod
    def _delta(w, phi_pos, phi_neg):
        w = np.asarray(w, dtype=np.float64)
        delta = np.asarray(phi_pos, dtype=np.float64) - np.asarray(phi_neg, dtype=np.float64)
        if w.shape != delta.shape:
            raise ValueError(f"dimension mismatch: w {w.shape} vs features {delta.shape}")
        return w, delta

    def eval(self, w, phi_pos, phi_neg) -> float:
        w, delta = self._delta(w, phi_pos, phi_neg)
        slack = 1.0 - float(w @ delta)
        base = slack * slack if self.kind == "squared" else max(0.0, slack)
        return base + 0.5 * self.lam * float(w @ w)

    def grad(self, w, phi_pos, phi_neg) -> np.ndarray:
        w, delta = self._delta(w, phi_pos, phi_neg)
        slack = 1.0 - float(w @ delta)
        if self.kind == "squared":
            g = (-2.0 * slack) * delta
        else:
            g = -delta if slack > 0 else np.zeros_like(delta)
        if self.lam:
            g = g + self.lam * w
        return g

    def value_and_grad(self, w: np.ndarray, delta: np.ndarray) -> tuple[float, np.ndarray]:
        """Unchecked fast path on a precomputed ``delta = phi_pos - phi_neg``."""
        slack = 1.0 - float(w @ delta)
        if self.kind == "squared":
            value = slack * slack
            g = (-2.0 * slack) * delta
        elif slack > 0:
            value = slack
            g = -delta
        else:
            value = 0.0
            g = np.zeros_like(delta)
        if self.lam:
            value += 0.5 * self.lam * float(w @ w)
            g = g + self.lam * w
        return value, g

    def mean_grad(self, w, phi_pos, phi_neg) -> np.ndarray:
        """Gradient of the average loss over rows of ``phi_pos``/``phi_neg`` (broadcast)."""
        w = np.asarray(w, dtype=np.float64)
        delta = np.atleast_2d(np.asarray(phi_pos) - np.asarray(phi_neg))
        if delta.shape[1] != w.shape[0]:
            raise ValueError("dimension mismatch")
        slack = 1.0 - delta @ w
        if self.kind == "squared":
            coef = -2.0 * slack
        else:
            coef = -(slack > 0).astype(np.float64)
        g = (coef @ delta) / delta.shape[0]
        if self.lam:
            g = g + self.lam * w
        return g

    def constants(self, w_bound: float, feat_bound: float = 2.0) -> LossConstants:
        """Lipschitz and smoothness constants over ``||w|| <= w_bound``, ``||delta|| <= feat_bound``.

        Unit-norm RFF features give ``||phi_pos - phi_neg|| <= 2``.
        """
        if w_bound < 0 or feat_bound <= 0:
            raise ValueError("bounds must be non-negative (feat_bound positive)")
        lam = self.lam
        if self.kind == "squared":
            G = 2.0 * (1.0 + w_bound * feat_bound) * feat_bound + lam * w_bound
            M = 2.0 * feat_bound ** 2 + lam
        else:
            G = feat_bound + lam * w_bound
            M = math.inf
        return LossConstants(G, M)


def constants(loss: PairLoss, w_bound: float, feat_bound: float = 2.0) -> LossConstants:
    return loss.constants(w_bound, feat_bound)
