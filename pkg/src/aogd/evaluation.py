"""Exact AUC, all-pairs loss oracles, Jensen-gap and regret diagnostics.

Histories are sequences of ``(phi, label)`` pairs in arrival order.  The
oracles here are deliberately naive (explicit loops over pairs) so they can
serve as independent checks on the streaming learners.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .loss import PairLoss

PAIR_COUNT_LIMIT = 10_000


def _check_auc_input(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == -1))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one example of each label")
    if n_pos + n_neg != labels.size:
        raise ValueError("labels must be -1 or +1")
    return scores, labels, n_pos, n_neg


def auc_pairs(scores, labels) -> float:
    """AUC by explicit (positive, negative) pair counting; ties count one half."""
    scores, labels, n_pos, n_neg = _check_auc_input(scores, labels)
    pos = scores[labels == 1]
    neg = scores[labels == -1]
    wins = 0.0
    for start in range(0, pos.size, 1024):
        block = pos[start:start + 1024, None]
        wins += np.sum(block > neg[None, :]) + 0.5 * np.sum(block == neg[None, :])
    return float(wins / (n_pos * n_neg))


def auc_rank(scores, labels) -> float:
    """AUC from the Mann-Whitney rank statistic with mid-ranks for ties."""
    scores, labels, n_pos, n_neg = _check_auc_input(scores, labels)
    ranks = rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc(scores, labels) -> float:
    if np.size(scores) <= PAIR_COUNT_LIMIT:
        return auc_pairs(scores, labels)
    return auc_rank(scores, labels)


# --------------------------------------------------------------- oracles


def _oriented(loss_fn, phi_t, y_t, phi_i):
    return loss_fn(phi_t, phi_i) if y_t == 1 else loss_fn(phi_i, phi_t)


def local_loss_oracle(w, history, z_t, loss: PairLoss) -> Optional[float]:
    """Average loss of ``z_t`` paired with every opposite-label example in ``history``.

    Returns ``None`` when no opposite-label example exists.
    """
    if not len(history):
        raise ValueError("history must be nonempty")
    phi_t, y_t = z_t
    total, n = 0.0, 0
    for phi_i, y_i in history:
        if y_i == y_t:
            continue
        total += _oriented(lambda a, b: loss.eval(w, a, b), phi_t, y_t, phi_i)
        n += 1
    return None if n == 0 else total / n


def local_loss_grad_oracle(w, history, z_t, loss: PairLoss) -> Optional[np.ndarray]:
    """Gradient of :func:`local_loss_oracle` in ``w``, summed pair by pair."""
    phi_t, y_t = z_t
    total, n = None, 0
    for phi_i, y_i in history:
        if y_i == y_t:
            continue
        g = _oriented(lambda a, b: loss.grad(w, a, b), phi_t, y_t, phi_i)
        total = g.copy() if total is None else total + g
        n += 1
    return None if n == 0 else total / n


def opposite_mean(history, y_t) -> np.ndarray:
    phis = [phi for phi, y in history if y != y_t]
    if not phis:
        raise ValueError("no opposite-label example in history")
    return np.mean(np.asarray(phis), axis=0)


def trace_cov(phis) -> float:
    """Exact trace of the (population) covariance of the rows of ``phis``."""
    P = np.atleast_2d(np.asarray(phis, dtype=np.float64))
    return float(np.sum((P - P.mean(axis=0)) ** 2) / P.shape[0])


def jensen_gap(w, history, z_t, loss: PairLoss) -> float:
    """All-pairs local loss minus the loss against the opposite-class mean feature."""
    phi_t, y_t = z_t
    full = local_loss_oracle(w, history, z_t, loss)
    if full is None:
        raise ValueError("no opposite-label example in history")
    mean = opposite_mean(history, y_t)
    at_mean = _oriented(lambda a, b: loss.eval(w, a, b), phi_t, y_t, mean)
    return full - at_mean


def jensen_bound(history, y_t, loss: PairLoss) -> float:
    """``Gamma * M / 2`` with Gamma the exact opposite-class covariance trace."""
    opp = [phi for phi, y in history if y != y_t]
    return 0.5 * trace_cov(opp) * loss.constants(1.0).smoothness_M


# -------------------------------------------------------- vectorized losses


def _slack_to_loss(loss: PairLoss, slack):
    return slack * slack if loss.kind == "squared" else np.maximum(slack, 0.0)


def local_losses(W, Phi, labels, loss: PairLoss) -> tuple[np.ndarray, np.ndarray]:
    """Local all-pairs loss ``L_t`` at every arrival ``t`` of a stream.

    ``W`` is either one weight vector (a fixed model) or a ``(T, D)`` array
    whose row ``t`` is the model used at arrival ``t``.  Returns
    ``(values, paired)``; arrivals without an opposite-label predecessor get
    value 0 and ``paired=False``.
    """
    Phi = np.asarray(Phi, dtype=np.float64)
    labels = np.asarray(labels)
    T = labels.size
    W = np.asarray(W, dtype=np.float64)
    fixed = W.ndim == 1
    S = Phi @ W if fixed else Phi @ W.T  # S[i, t] = <phi_i, w_t>
    values = np.zeros(T)
    paired = np.zeros(T, dtype=bool)
    for t in range(1, T):
        y = labels[t]
        opp = np.flatnonzero(labels[:t] != y)
        if opp.size == 0:
            continue
        col = S if fixed else S[:, t]
        slack = 1.0 - y * (col[t] - col[opp])
        wt = W if fixed else W[t]
        values[t] = _slack_to_loss(loss, slack).mean() + 0.5 * loss.lam * float(wt @ wt)
        paired[t] = True
    return values, paired


@dataclass
class RegretCurve:
    t: np.ndarray
    learner_cum_loss: np.ndarray
    comparator_cum_loss: np.ndarray
    regret: np.ndarray
    paired: np.ndarray

    def __post_init__(self):
        n = len(self.t)
        if not (len(self.learner_cum_loss) == len(self.comparator_cum_loss) == len(self.regret) == n):
            raise ValueError("curve columns differ in length")

    def per_round(self, effective: bool = True) -> np.ndarray:
        """``R_t / t``; with ``effective`` the divisor counts only paired rounds."""
        denom = np.cumsum(self.paired) if effective else self.t
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(denom > 0, self.regret / np.maximum(denom, 1), 0.0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "learner_cum_loss", "comparator_cum_loss", "regret"])
        for row in zip(self.t, self.learner_cum_loss, self.comparator_cum_loss, self.regret):
            w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
        return buf.getvalue()


def regret_curve(models, comparator_w, Phi, labels, loss: PairLoss) -> RegretCurve:
    """Cumulative regret of the per-arrival ``models`` against a fixed comparator.

    ``models[t]`` must be the learner's weights *before* arrival ``t``.
    """
    learner, paired = local_losses(models, Phi, labels, loss)
    comp, _ = local_losses(np.asarray(comparator_w), Phi, labels, loss)
    lc, cc = np.cumsum(learner), np.cumsum(comp)
    t = np.arange(1, len(learner) + 1)
    return RegretCurve(t, lc, cc, lc - cc, paired)


# --------------------------------------------------------------- comparator


def _pair_weights(labels):
    """Per-arrival count of opposite-label predecessors."""
    labels = np.asarray(labels)
    is_pos = labels == 1
    pos_before = np.concatenate([[0], np.cumsum(is_pos)[:-1]])
    neg_before = np.arange(labels.size) - pos_before
    return np.where(is_pos, neg_before, pos_before)


def cumulative_local_loss(w, Phi, labels, loss: PairLoss) -> float:
    return float(local_losses(np.asarray(w), Phi, labels, loss)[0].sum())


def _cumulative_grad(w, Phi, labels, loss: PairLoss, n_opp):
    """Gradient of the summed local loss, accumulated as per-example weights on ``Phi``."""
    T = labels.size
    s = Phi @ w
    alpha = np.zeros(T)
    n_active = 0
    for t in range(1, T):
        if n_opp[t] == 0:
            continue
        n_active += 1
        y = labels[t]
        opp = np.flatnonzero(labels[:t] != y)
        slack = 1.0 - y * (s[t] - s[opp])
        coef = -2.0 * slack if loss.kind == "squared" else -(slack > 0).astype(np.float64)
        coef = coef / n_opp[t]
        alpha[t] += y * coef.sum()
        np.subtract.at(alpha, opp, y * coef)
    return Phi.T @ alpha + n_active * loss.lam * w


def _squared_normal_equations(Phi, labels, loss: PairLoss, n_opp):
    """Half-Hessian ``A`` and linear term ``b`` of the summed squared local loss.

    Expanding ``sum_t (1/n_t) sum_i (1 - w.delta_ti)^2`` with prefix class
    sums keeps the assembly at O(T D^2).
    """
    T, D = Phi.shape
    active = n_opp > 0
    y = labels.astype(np.float64)
    # opposite-class prefix means m_t (exclusive of t)
    csum = {c: np.cumsum(Phi * (labels == c)[:, None], axis=0) - Phi * (labels == c)[:, None]
            for c in (1, -1)}
    opp_sum = np.where((labels == 1)[:, None], csum[-1], csum[1])
    M = np.zeros_like(Phi)
    M[active] = opp_sum[active] / n_opp[active][:, None]
    Pa, Ma = Phi[active], M[active]
    cross = Pa.T @ Ma
    A = Pa.T @ Pa - cross - cross.T
    # weight on phi_i phi_i^T: sum over later opposite arrivals t of 1/n_t
    r = np.where(active, 1.0 / np.maximum(n_opp, 1), 0.0)
    seen_weight = np.zeros(T)
    for c in (1, -1):
        rc = np.where(labels == c, r, 0.0)
        later = np.cumsum(rc[::-1])[::-1] - rc
        seen_weight = np.where(labels == -c, later, seen_weight)
    A += (Phi * seen_weight[:, None]).T @ Phi
    b = ((Pa - Ma) * y[active][:, None]).sum(axis=0)
    return A, b, int(active.sum())


def comparator_fit(Phi, labels, loss: PairLoss, max_iter: int = 10_000, tol: float = 1e-6,
                   method: str = "auto") -> np.ndarray:
    """Approximate ``argmin_w sum_t L_t(w)`` over the stream in its given order.

    ``method="exact"`` solves the normal equations (squared loss only, the
    objective being quadratic); ``"gd"`` runs full-batch gradient descent
    until the gradient norm drops below ``tol`` or ``max_iter`` iterations.
    ``"auto"`` picks ``exact`` for the squared loss.
    """
    Phi = np.asarray(Phi, dtype=np.float64)
    labels = np.asarray(labels)
    if not (np.any(labels == 1) and np.any(labels == -1)):
        raise ValueError("comparator_fit needs both classes")
    n_opp = _pair_weights(labels)
    if method == "auto":
        method = "exact" if loss.kind == "squared" else "gd"
    D = Phi.shape[1]
    if method == "exact":
        if loss.kind != "squared":
            raise ValueError("exact comparator solve needs the squared loss")
        A, b, n_active = _squared_normal_equations(Phi, labels, loss, n_opp)
        H = 2.0 * A + n_active * loss.lam * np.eye(D)
        w = np.linalg.lstsq(H, 2.0 * b, rcond=None)[0]
        return w
    if method != "gd":
        raise ValueError(f"unknown method {method!r}")
    # step from a bound on the largest curvature: 2 * sum_t max ||delta||^2 <= 2 * 4 * max||phi||^2 * T
    n_active = int(np.sum(n_opp > 0))
    lip = 8.0 * float(np.max(np.sum(Phi * Phi, axis=1))) * n_active + n_active * loss.lam
    step = 1.0 / lip
    w = np.zeros(D)
    for _ in range(max_iter):
        g = _cumulative_grad(w, Phi, labels, loss, n_opp)
        if np.linalg.norm(g) <= tol:
            break
        w = w - step * g
    return w
