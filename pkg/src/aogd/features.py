"""Random Fourier features for the Gaussian kernel, plus exact-kernel oracles.

The kernel is ``G(x, x') = exp(-1/2 * sum_j sigma_j (x_j - x'_j)**2)`` whose
spectral density is ``N(0, diag(sigma))``.  Note that ``sigma`` here is a
per-dimension *precision*: larger values give a narrower kernel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .dataio import Example


def _as_sigma(sigma, d: int) -> np.ndarray:
    s = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (d,)).copy()
    if not np.all(s > 0) or not np.all(np.isfinite(s)):
        raise ValueError("sigma must be positive and finite")
    return s


@dataclass(frozen=True, eq=False)
class RffMap:
    """Frozen projection ``x -> sqrt(2/D) [cos(u_i.x), sin(u_i.x)]_i`` (interleaved)."""

    d: int
    D: int
    sigma: np.ndarray
    seed: int
    freqs: np.ndarray = field(repr=False)

    @property
    def dim_out(self) -> int:
        return self.D

    def project(self, x) -> np.ndarray:
        """Return ``u_i . x`` for every frequency row; ``x`` is an Example or dense vector."""
        if isinstance(x, Example):
            if x.indices.size and x.indices[-1] > self.d:
                raise ValueError(f"feature index {int(x.indices[-1])} exceeds map dimension {self.d}")
            return self.freqs[:, x.indices - 1] @ x.values
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"expected a vector of length {self.d}, got shape {x.shape}")
        return self.freqs @ x

    def map(self, x) -> np.ndarray:
        return _interleave(self.project(x)[None, :], self.D)[0]

    def transform(self, X) -> np.ndarray:
        """Map the rows of a dense ``(n, d)`` matrix to ``(n, D)``."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} columns, got {X.shape[1]}")
        return _interleave(X @ self.freqs.T, self.D)

    def to_json(self) -> str:
        return json.dumps({"d": self.d, "D": self.D, "sigma": self.sigma.tolist(), "seed": self.seed})

    @classmethod
    def from_json(cls, blob: Union[str, dict]) -> "RffMap":
        params = json.loads(blob) if isinstance(blob, str) else blob
        return rff_sample(params["d"], params["D"], params["sigma"], params["seed"])


def _interleave(proj: np.ndarray, D: int) -> np.ndarray:
    out = np.empty((proj.shape[0], D))
    scale = math.sqrt(2.0 / D)
    out[:, 0::2] = np.cos(proj)
    out[:, 1::2] = np.sin(proj)
    out *= scale
    return out


def rff_sample(d: int, D: int, sigma, seed: int) -> RffMap:
    """Draw ``D/2`` frequency rows from ``N(0, diag(sigma))``; bit-identical per seed."""
    if d < 1:
        raise ValueError("input dimension d must be >= 1")
    if D < 2 or D % 2:
        raise ValueError(f"feature count D must be even and >= 2, got {D}")
    s = _as_sigma(sigma, d)
    rng = np.random.default_rng(seed)
    freqs = rng.standard_normal((D // 2, d)) * np.sqrt(s)
    freqs.flags.writeable = False
    s.flags.writeable = False
    return RffMap(d=d, D=D, sigma=s, seed=int(seed), freqs=freqs)


def rff_map(m: RffMap, x) -> np.ndarray:
    return m.map(x)


class IdentityMap:
    """Raw linear features (no kernel); densifies sparse input."""

    def __init__(self, d: int):
        if d < 1:
            raise ValueError("input dimension d must be >= 1")
        self.d = d

    @property
    def dim_out(self) -> int:
        return self.d

    def map(self, x) -> np.ndarray:
        if isinstance(x, Example):
            if x.indices.size and x.indices[-1] > self.d:
                raise ValueError(f"feature index {int(x.indices[-1])} exceeds dimension {self.d}")
            return x.dense(self.d)
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise ValueError(f"expected a vector of length {self.d}, got shape {x.shape}")
        return x.copy()

    def transform(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=np.float64)).copy()


def default_feature_count(T: int) -> int:
    """Smallest even integer >= sqrt(T) * ln(T) (at least 2)."""
    if T < 2:
        return 2
    n = math.ceil(math.sqrt(T) * math.log(T))
    n += n % 2
    return max(n, 2)


def median_sq_distance(X, max_rows: int = 500, seed: int = 0) -> float:
    """Median squared Euclidean distance between distinct rows (subsampled)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] > max_rows:
        X = X[np.random.default_rng(seed).choice(X.shape[0], max_rows, replace=False)]
    sq = np.sum(X * X, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * X @ X.T, 0.0)
    vals = d2[np.triu_indices(X.shape[0], k=1)]
    med = float(np.median(vals)) if vals.size else 0.0
    return med if med > 0 else 1.0


# ----------------------------------------------------------- exact oracles


def exact_gaussian(x, x2, sigma) -> float:
    x = np.asarray(x, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x.shape != x2.shape:
        raise ValueError("dimension mismatch")
    s = _as_sigma(sigma, x.size)
    diff = x - x2
    return float(np.exp(-0.5 * np.sum(s * diff * diff)))


def pairwise_kernel(x1, x2, x1p, x2p, sigma) -> float:
    G = exact_gaussian
    return G(x1, x1p, sigma) + G(x2, x2p, sigma) - G(x1, x2p, sigma) - G(x2, x1p, sigma)


def rff_error_profile(m_sizes: Sequence[int], n_pairs: int, sigma=1.0, seed: int = 0,
                      d: int = 5) -> list[tuple[int, float, float]]:
    """Absolute error of the RFF pairwise-kernel estimate over random unit-cube quadruples.

    Returns ``(D, max_abs_error, mean_abs_error)`` per requested ``D``.  The
    quadruples are shared across ``D``; each ``D`` gets its own frequency draw.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    ss = np.random.SeedSequence(seed)
    quad_seed, map_seed = ss.spawn(2)
    Q = np.random.default_rng(quad_seed).random((4, n_pairs, d))
    exact = np.array([pairwise_kernel(Q[0, i], Q[1, i], Q[2, i], Q[3, i], sigma)
                      for i in range(n_pairs)])
    map_seeds = [int(c.generate_state(1)[0]) for c in map_seed.spawn(len(m_sizes))]
    rows = []
    for D, mseed in zip(m_sizes, map_seeds):
        m = rff_sample(d, int(D), sigma, mseed)
        R = [m.transform(Q[k]) for k in range(4)]
        approx = np.sum((R[0] - R[1]) * (R[2] - R[3]), axis=1)
        err = np.abs(approx - exact)
        rows.append((int(D), float(err.max()), float(err.mean())))
    return rows
