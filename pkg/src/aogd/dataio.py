"""LIBSVM ingestion, synthetic streams and arrival orders."""

from __future__ import annotations

import gzip
import io
import os
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence, Union

import numpy as np


class ParseError(ValueError):
    """Malformed LIBSVM input; ``lineno`` is 1-based (0 when not line-specific)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


class Example:
    """One labeled instance with sparse features (1-based, increasing indices)."""

    __slots__ = ("indices", "values", "label")

    def __init__(self, indices, values, label: int):
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        val = np.asarray(values, dtype=np.float64).reshape(-1)
        if idx.shape != val.shape:
            raise ValueError("indices and values differ in length")
        if idx.size and (idx[0] < 1 or np.any(np.diff(idx) <= 0)):
            raise ValueError("feature indices must be positive and strictly increasing")
        if label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {label!r}")
        idx.flags.writeable = False
        val.flags.writeable = False
        self.indices = idx
        self.values = val
        self.label = int(label)

    @classmethod
    def from_dict(cls, features: dict, label: int) -> "Example":
        keys = sorted(features)
        return cls(keys, [features[k] for k in keys], label)

    @classmethod
    def from_dense(cls, x, label: int) -> "Example":
        x = np.asarray(x, dtype=np.float64)
        nz = np.flatnonzero(x)
        return cls(nz + 1, x[nz], label)

    @property
    def features(self) -> dict:
        return dict(zip(self.indices.tolist(), self.values.tolist()))

    def dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        out[self.indices - 1] = self.values
        return out

    def _key(self):
        return (self.label, self.indices.tobytes(), self.values.tobytes())

    def __eq__(self, other):
        if not isinstance(other, Example):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"Example({self.features!r}, label={self.label:+d})"


@dataclass(frozen=True)
class Dataset:
    examples: tuple
    dim: int
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(self.examples))
        if not self.examples:
            raise ValueError("empty dataset")
        top = max((int(e.indices[-1]) for e in self.examples if e.indices.size), default=0)
        if self.dim < top:
            raise ValueError(f"dim={self.dim} smaller than max feature index {top}")
        labels = {e.label for e in self.examples}
        if labels != {-1, 1}:
            raise ValueError(f"dataset {self.name!r} is single-class (labels {sorted(labels)})")

    def __len__(self):
        return len(self.examples)

    @property
    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.examples], dtype=np.int64)

    def to_dense(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.zeros((len(self.examples), self.dim))
        for i, e in enumerate(self.examples):
            X[i, e.indices - 1] = e.values
        return X, self.labels

    def subset(self, rows: Iterable[int], name: Optional[str] = None) -> "Dataset":
        return Dataset(tuple(self.examples[i] for i in rows), self.dim, name or self.name)

    @classmethod
    def from_dense(cls, X, y, name: str = "") -> "Dataset":
        X = np.asarray(X, dtype=np.float64)
        return cls(tuple(Example.from_dense(x, int(l)) for x, l in zip(X, y)), X.shape[1], name)


# ---------------------------------------------------------------- LIBSVM


def _binarize(raw: float, positive_labels) -> int:
    if positive_labels is None:
        return 1 if raw > 0 else -1
    return 1 if raw in positive_labels else -1


def parse_libsvm(text: Union[bytes, str], positive_labels: Optional[Iterable[float]] = None,
                 name: str = "") -> Dataset:
    """Parse LIBSVM text into a binary :class:`Dataset`.

    Labels are binarized as ``+1`` when the numeric label is in
    ``positive_labels`` (or, when that is ``None``, when it is positive), and
    ``-1`` otherwise.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    pos = None if positive_labels is None else {float(v) for v in positive_labels}
    examples = []
    dim = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            raw = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        idx, val = [], []
        for tok in tokens[1:]:
            k, sep, v = tok.partition(":")
            if not sep:
                raise ParseError(f"expected <index>:<value>, got {tok!r}", lineno)
            try:
                k_i, v_f = int(k), float(v)
            except ValueError:
                raise ParseError(f"bad feature {tok!r}", lineno) from None
            if k_i < 1:
                raise ParseError(f"feature index {k_i} is not positive", lineno)
            if idx and k_i <= idx[-1]:
                raise ParseError(f"feature index {k_i} does not increase", lineno)
            idx.append(k_i)
            val.append(v_f)
        if idx:
            dim = max(dim, idx[-1])
        examples.append(Example(idx, val, _binarize(raw, pos)))
    if not examples:
        raise ParseError("empty dataset")
    return Dataset(tuple(examples), dim, name)


def load_libsvm(path: Union[str, os.PathLike], positive_labels=None, name: Optional[str] = None,
                dim: Optional[int] = None) -> Dataset:
    """Read a LIBSVM file (gzip when the name ends in ``.gz``)."""
    path = os.fspath(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as fh:
        raw = fh.read()
    if name is None:
        name = os.path.basename(path)
        if name.endswith(".gz"):
            name = name[:-3]
    ds = parse_libsvm(raw, positive_labels, name)
    if dim is not None and dim != ds.dim:
        ds = Dataset(ds.examples, dim, ds.name)
    return ds


def serialize_libsvm(ds: Dataset) -> str:
    buf = io.StringIO()
    for e in ds.examples:
        feats = " ".join(f"{k}:{v!r}" for k, v in zip(e.indices.tolist(), e.values.tolist()))
        buf.write(f"{e.label:+d} {feats}".rstrip() + "\n")
    return buf.getvalue()


# ---------------------------------------------------------- preprocessing

NORMALIZATIONS = ("none", "unit_l2", "minmax")


def normalize(ds: Dataset, scheme: str = "none") -> Dataset:
    """Rescale features per example (``unit_l2``) or per dimension (``minmax``)."""
    scheme = scheme.lower()
    if scheme == "none":
        return ds
    if scheme == "unit_l2":
        out = []
        for e in ds.examples:
            norm = np.linalg.norm(e.values)
            out.append(e if norm == 0 else Example(e.indices, e.values / norm, e.label))
        return Dataset(tuple(out), ds.dim, ds.name)
    if scheme == "minmax":
        X, y = ds.to_dense()
        lo, hi = X.min(axis=0), X.max(axis=0)
        span = hi - lo
        scaled = np.where(span > 0, (X - lo) / np.where(span > 0, span, 1.0), 0.0)
        return Dataset.from_dense(scaled, y, ds.name)
    raise ValueError(f"unknown normalization {scheme!r}; expected one of {NORMALIZATIONS}")


# ------------------------------------------------------------ stream orders


@dataclass(frozen=True)
class StreamOrder:
    """Arrival order: ``shuffled``, ``asis``, ``sorted`` (all -1 then all +1) or ``blocks``."""

    kind: str = "shuffled"
    seed: int = 0
    block_size: int = 1

    def __post_init__(self):
        if self.kind not in ("shuffled", "asis", "sorted", "blocks"):
            raise ValueError(f"unknown stream order {self.kind!r}")
        if self.kind == "blocks" and self.block_size < 1:
            raise ValueError("block_size must be >= 1")

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> "StreamOrder":
        """Parse the CLI form ``shuffled|asis|sorted|blocks:<n>``."""
        kind, _, arg = text.strip().lower().partition(":")
        if kind == "blocks":
            if not arg:
                raise ValueError("blocks order needs a size, e.g. blocks:10")
            return cls("blocks", seed, int(arg))
        if arg:
            raise ValueError(f"order {kind!r} takes no argument")
        return cls(kind, seed)

    def __str__(self):
        return f"blocks:{self.block_size}" if self.kind == "blocks" else self.kind

    def with_seed(self, seed: int) -> "StreamOrder":
        return StreamOrder(self.kind, seed, self.block_size)

    def permutation(self, labels: Sequence[int]) -> np.ndarray:
        labels = np.asarray(labels)
        n = labels.size
        if self.kind == "asis":
            return np.arange(n)
        if self.kind == "shuffled":
            return np.random.default_rng(self.seed).permutation(n)
        if self.kind == "sorted":
            return np.argsort(labels, kind="stable")
        rng = np.random.default_rng(self.seed)
        runs = {lab: list(rng.permutation(np.flatnonzero(labels == lab))) for lab in (-1, 1)}
        order, lab = [], -1
        while runs[-1] or runs[1]:
            take = runs[lab][: self.block_size]
            runs[lab] = runs[lab][self.block_size:]
            order.extend(take)
            lab = -lab
        return np.asarray(order, dtype=np.int64)


def stream(ds: Dataset, order: StreamOrder = StreamOrder("asis")) -> Iterator[Example]:
    for i in order.permutation(ds.labels):
        yield ds.examples[i]


# ---------------------------------------------------------------- synthetic


def _gaussian_rows(rng, n_per_class, dim, separation):
    X = rng.standard_normal((2 * n_per_class, dim))
    y = np.repeat([1, -1], n_per_class)
    X[:, 0] += y * separation / 2.0
    return X, y


def make_synthetic_gaussians(n_per_class: int, dim: int, separation: float, seed: int) -> Dataset:
    """Two unit-variance Gaussian clouds centred at ``±(separation/2)·e₁``."""
    if n_per_class < 1 or dim < 1 or separation < 0:
        raise ValueError("need n_per_class >= 1, dim >= 1, separation >= 0")
    rng = np.random.default_rng(seed)
    X, y = _gaussian_rows(rng, n_per_class, dim, separation)
    perm = rng.permutation(len(y))
    return Dataset.from_dense(X[perm], y[perm], f"gauss{dim}d_sep{separation:g}")


def synthetic_stream(n: int, dim: int, separation: float, seed: int) -> Iterator[tuple[np.ndarray, int]]:
    """Yield ``n`` dense ``(x, label)`` draws lazily; memory does not grow with ``n``."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        label = 1 if rng.random() < 0.5 else -1
        x = rng.standard_normal(dim)
        x[0] += label * separation / 2.0
        yield x, label

