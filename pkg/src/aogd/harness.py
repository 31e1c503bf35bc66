"""Experiment runner: grid search with k-fold CV, repeated trials, curves and reports.

Every random choice (splits, folds, stream orders, feature draws, Bernoulli
coins) is derived from the config's master seed through
:func:`derive_seed`, so a (config, seed) pair fixes every emitted number.
Wall-clock measurements are the only exception and are kept out of CSV
outputs.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import logging
import math
import time
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import StratifiedKFold, train_test_split

from .baselines import BufferOgd, OgdLast
from .dataio import Dataset, StreamOrder, load_libsvm, make_synthetic_gaussians, normalize
from .evaluation import RegretCurve, auc, comparator_fit, jensen_bound, jensen_gap, regret_curve
from .features import IdentityMap, default_feature_count, median_sq_distance, rff_sample
from .learner import Aogd, AogdConfig, DivergenceError, GammaRule
from .loss import PairLoss

log = logging.getLogger(__name__)

LEARNERS = ("aogd", "ogd_last", "buffer_ogd")
ETA_GRID = [2.0 ** k for k in range(-8, 0)]
LAMBDA_GRID = [10.0 ** k for k in range(-8, 0)]
SIGMA_GRID = [0.01, 0.1, 1.0, 10.0]


def derive_seed(master: int, *keys) -> int:
    """Child seed for ``keys`` (ints or strings) under ``master``; order-independent of use."""
    ints = tuple(k if isinstance(k, int) else zlib.crc32(str(k).encode()) for k in keys)
    return int(np.random.SeedSequence(master, spawn_key=ints).generate_state(1)[0])


@dataclass
class ExperimentConfig:
    """One experiment.  ``dataset`` is a LIBSVM path or ``synthetic:<n_per_class>:<dim>:<sep>``.

    ``sigma_grid`` holds multipliers ``c``; the kernel precision used is
    ``c / median squared pairwise distance`` of the training split.
    """

    dataset: str
    name: Optional[str] = None
    positive_labels: Optional[list] = None
    normalization: str = "minmax"
    learner: str = "aogd"
    buffer_size: int = 10
    loss: str = "squared"
    eta_grid: list = field(default_factory=lambda: list(ETA_GRID))
    lambda_grid: list = field(default_factory=lambda: list(LAMBDA_GRID))
    sigma_grid: list = field(default_factory=lambda: list(SIGMA_GRID))
    gamma_rule: str = "adaptive:0.1"
    p: float = 0.1
    D: Optional[int] = None
    mapping: str = "rff"
    order: str = "shuffled"
    folds: int = 3
    repeats: int = 5
    test_fraction: float = 0.2
    seed: int = 0
    epochs: int = 1
    eta_schedule: str = "constant"

    def validate(self):
        if self.learner not in LEARNERS:
            raise ValueError(f"unknown learner {self.learner!r}; expected one of {LEARNERS}")
        if not (self.eta_grid and self.lambda_grid and self.sigma_grid):
            raise ValueError("hyperparameter grids must be nonempty")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        StreamOrder.parse(self.order)
        GammaRule.parse(self.gamma_rule)
        PairLoss(self.loss, 0.0)

    @property
    def run_name(self) -> str:
        if self.name:
            return self.name
        if self.dataset.startswith("synthetic:"):
            return self.dataset.replace(":", "_")
        base = self.dataset.replace("\\", "/").rsplit("/", 1)[-1]
        return base[:-3] if base.endswith(".gz") else base

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class GridPoint:
    eta: float
    lam: float
    sigma_mult: float


@dataclass
class ResultRow:
    dataset: str
    learner: str
    hyperparams: list
    mean_auc: float
    stderr: float
    seconds: float
    trace: str = ""
    aucs: list = field(default_factory=list)

    CSV_FIELDS = ("dataset", "learner", "mean_auc", "stderr", "n_repeats", "hyperparams", "trace")

    def csv_record(self) -> dict:
        return {
            "dataset": self.dataset,
            "learner": self.learner,
            "mean_auc": repr(self.mean_auc),
            "stderr": repr(self.stderr),
            "n_repeats": len(self.aucs),
            "hyperparams": json.dumps(self.hyperparams, sort_keys=True),
            "trace": self.trace,
        }


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset.startswith("synthetic:"):
        _, n, dim, sep = cfg.dataset.split(":")
        ds = make_synthetic_gaussians(int(n), int(dim), float(sep), derive_seed(cfg.seed, "data"))
    else:
        ds = load_libsvm(cfg.dataset, cfg.positive_labels)
    return normalize(ds, cfg.normalization)


# ------------------------------------------------------------- single runs


def make_learner(cfg: ExperimentConfig, hp: GridPoint, feature_map, d: int, seed: int):
    loss = PairLoss(cfg.loss, hp.lam)
    if cfg.learner == "aogd":
        acfg = AogdConfig(eta=hp.eta, gamma_rule=GammaRule.parse(cfg.gamma_rule), p=cfg.p,
                          D=feature_map.dim_out if cfg.mapping == "rff" else 2,
                          sigma=getattr(feature_map, "sigma", np.ones(1)).tolist(), lam=hp.lam, seed=seed, loss=cfg.loss,
                          mapping=cfg.mapping, eta_schedule=cfg.eta_schedule)
        return Aogd(acfg, d, feature_map)
    if cfg.learner == "ogd_last":
        return OgdLast(feature_map, loss, hp.eta, cfg.eta_schedule)
    return BufferOgd(feature_map, loss, hp.eta, cfg.buffer_size, seed, cfg.eta_schedule)


class _Features:
    """Feature maps (and mapped matrices) for one training split, cached per sigma multiplier."""

    def __init__(self, cfg: ExperimentConfig, X_train: np.ndarray, seed: int):
        self.cfg = cfg
        self.d = X_train.shape[1]
        self.D = cfg.D or default_feature_count(X_train.shape[0])
        self.med = median_sq_distance(X_train, seed=seed)
        self.seed = seed
        self._cache = {}

    def sigma(self, mult: float) -> float:
        return mult / self.med

    def get(self, mult: float):
        if self.cfg.mapping == "linear":
            mult = 0.0
        if mult not in self._cache:
            if self.cfg.mapping == "linear":
                self._cache[mult] = IdentityMap(self.d)
            else:
                self._cache[mult] = rff_sample(self.d, self.D, self.sigma(mult), self.seed)
        return self._cache[mult]


def _train(cfg, hp, fmap, d, Phi, y, seed):
    """Single pass (or ``epochs`` passes) in the configured order; returns learner, reports, seconds."""
    order = StreamOrder.parse(cfg.order, derive_seed(seed, "order"))
    perm = order.permutation(y)
    learner = make_learner(cfg, hp, fmap, d, derive_seed(seed, "learner"))
    Phi_s, y_s = Phi[perm], y[perm]
    start = time.perf_counter()
    reports = learner.fit_stream(Phi_s, y_s, epochs=cfg.epochs)
    return learner, reports, time.perf_counter() - start


def cross_validate(cfg: ExperimentConfig, X: np.ndarray, y: np.ndarray, seed: int,
                   points: Optional[Sequence[GridPoint]] = None) -> dict:
    """Mean validation AUC per grid point; diverged points map to ``None``."""
    feats = _Features(cfg, X, derive_seed(seed, "rff"))
    skf = StratifiedKFold(n_splits=cfg.folds, shuffle=True, random_state=derive_seed(seed, "folds"))
    folds = list(skf.split(X, y))
    if points is None:
        points = grid_points(cfg)
    mapped = {}
    results = {}
    for hp in points:
        fmap = feats.get(hp.sigma_mult)
        if id(fmap) not in mapped:
            mapped[id(fmap)] = fmap.transform(X)
        Phi = mapped[id(fmap)]
        scores = []
        try:
            for k, (tr, va) in enumerate(folds):
                learner, _, _ = _train(cfg, hp, fmap, X.shape[1], Phi[tr], y[tr], derive_seed(seed, "fold", k))
                scores.append(auc(learner.decision_function(Phi[va]), y[va]))
        except DivergenceError as exc:
            log.warning("grid point %s failed: %s", hp, exc)
            results[hp] = None
            continue
        results[hp] = float(np.mean(scores))
    return results


def grid_points(cfg: ExperimentConfig) -> list:
    sigmas = [0.0] if cfg.mapping == "linear" else cfg.sigma_grid
    return [GridPoint(float(e), float(l), float(s))
            for s, l, e in itertools.product(sigmas, cfg.lambda_grid, cfg.eta_grid)]


def select(results: dict) -> GridPoint:
    """Best mean validation AUC; ties go to smaller eta, then smaller lambda, then smaller sigma."""
    ok = [(hp, a) for hp, a in results.items() if a is not None]
    if not ok:
        raise RuntimeError("every grid point diverged")
    return min(ok, key=lambda item: (-item[1], item[0].eta, item[0].lam, item[0].sigma_mult))[0]


def _split(cfg, y, r):
    idx = np.arange(y.size)
    return train_test_split(idx, test_size=cfg.test_fraction, stratify=y,
                            random_state=derive_seed(cfg.seed, "split", r))


def _trace_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "label", "avg_loss", "rand_loss", "eta", "gamma"])
    fmt = lambda v: "" if v is None else repr(float(v))
    for rep in reports:
        w.writerow([rep.t, rep.label, fmt(rep.avg_loss), fmt(rep.rand_loss), fmt(rep.eta), fmt(rep.gamma)])
    return buf.getvalue()


def run_experiment(cfg: ExperimentConfig, search: bool = True, out_dir=None,
                   timings: Optional[dict] = None) -> ResultRow:
    """Select hyperparameters by CV inside each repeat's train split, then score on its test split.

    With ``search=False`` the first value of each grid is used directly.
    """
    cfg.validate()
    ds = load_dataset(cfg)
    X, y = ds.to_dense()
    aucs, chosen, secs = [], [], []
    trace_path = ""
    for r in range(cfg.repeats):
        tr, te = _split(cfg, y, r)
        rep_seed = derive_seed(cfg.seed, "repeat", r)
        if search:
            hp = select(cross_validate(cfg, X[tr], y[tr], derive_seed(rep_seed, "cv")))
        else:
            hp = grid_points(cfg)[0]
        feats = _Features(cfg, X[tr], derive_seed(rep_seed, "final-rff"))
        fmap = feats.get(hp.sigma_mult)
        learner, reports, dt = _train(cfg, hp, fmap, X.shape[1], fmap.transform(X[tr]), y[tr],
                                      derive_seed(rep_seed, "final"))
        aucs.append(auc(learner.decision_function(fmap.transform(X[te])), y[te]))
        secs.append(dt)
        chosen.append({"eta": hp.eta, "lam": hp.lam, "sigma_mult": hp.sigma_mult,
                       "sigma": 0.0 if cfg.mapping == "linear" else feats.sigma(hp.sigma_mult),
                       "D": fmap.dim_out, "n_train": int(tr.size), "n_test": int(te.size)})
        log.info("%s/%s repeat %d: auc=%.4f %s", cfg.run_name, cfg.learner, r, aucs[-1], hp)
        if out_dir is not None:
            path = f"{out_dir}/trace_{cfg.run_name}_{cfg.learner}_r{r}.csv"
            with open(path, "w") as fh:
                fh.write(_trace_csv(reports))
            if r == 0:
                trace_path = path.rsplit("/", 1)[-1]
    mean = float(np.mean(aucs))
    stderr = float(np.std(aucs, ddof=1) / math.sqrt(len(aucs))) if len(aucs) > 1 else 0.0
    row = ResultRow(cfg.run_name, cfg.learner, chosen, mean, stderr,
                    float(np.sum(secs)), trace_path, [float(a) for a in aucs])
    if timings is not None:
        timings[f"{row.dataset}/{row.learner}"] = {"train_seconds": secs}
    return row


@dataclass
class CurvePoint:
    examples_seen: int
    test_auc: float
    seconds: float


def run_curve(cfg: ExperimentConfig, checkpoints: Sequence[int], hp: Optional[GridPoint] = None,
              repeat: int = 0) -> list:
    """Test AUC at each checkpoint during one online pass over the train split.

    ``seconds`` accumulates learner time only (AUC evaluation excluded).
    Checkpoints past the end of the stream are clipped to its length.
    """
    cfg.validate()
    ds = load_dataset(cfg)
    X, y = ds.to_dense()
    tr, te = _split(cfg, y, repeat)
    rep_seed = derive_seed(cfg.seed, "repeat", repeat)
    if hp is None:
        hp = select(cross_validate(cfg, X[tr], y[tr], derive_seed(rep_seed, "cv")))
    feats = _Features(cfg, X[tr], derive_seed(rep_seed, "final-rff"))
    fmap = feats.get(hp.sigma_mult)
    Phi_tr, Phi_te = fmap.transform(X[tr]), fmap.transform(X[te])
    seed = derive_seed(rep_seed, "final")
    perm = StreamOrder.parse(cfg.order, derive_seed(seed, "order")).permutation(y[tr])
    learner = make_learner(cfg, hp, fmap, X.shape[1], derive_seed(seed, "learner"))
    stops = sorted({min(int(c), perm.size) for c in checkpoints})
    points, elapsed, seen = [], 0.0, 0
    for stop in stops:
        start = time.perf_counter()
        for i in perm[seen:stop]:
            learner.update(Phi_tr[i], int(y[tr][i]))
        elapsed += time.perf_counter() - start
        seen = stop
        points.append(CurvePoint(stop, auc(learner.decision_function(Phi_te), y[te]), elapsed))
    by_stop = {p.examples_seen: p for p in points}
    return [by_stop[min(int(c), perm.size)] for c in checkpoints]


def curve_csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["examples_seen", "test_auc"])
    for p in points:
        w.writerow([p.examples_seen, repr(p.test_auc)])
    return buf.getvalue()


# ------------------------------------------------------------------- oracle


@dataclass
class OracleResult:
    curve: RegretCurve
    jensen: list  # (t, gap, bound) at sampled arrivals
    comparator_w: np.ndarray
    models: np.ndarray  # row t = weights before arrival t


def run_oracle(cfg: ExperimentConfig, hp: Optional[GridPoint] = None,
               jensen_every: int = 0) -> OracleResult:
    """Regret against the best fixed model in hindsight, over the whole dataset as one stream.

    Intended for small data: the comparator solve and the Jensen checks are
    exact.  ``jensen_every > 0`` evaluates the Jensen gap at the model in use
    every that many arrivals.
    """
    cfg.validate()
    ds = load_dataset(cfg)
    X, y = ds.to_dense()
    if hp is None:
        hp = grid_points(cfg)[0]
    seed = derive_seed(cfg.seed, "oracle")
    perm = StreamOrder.parse(cfg.order, derive_seed(seed, "order")).permutation(y)
    X, y = X[perm], y[perm]
    fmap = _Features(cfg, X, derive_seed(seed, "rff")).get(hp.sigma_mult)
    Phi = fmap.transform(X)
    learner = make_learner(cfg, hp, fmap, X.shape[1], derive_seed(seed, "learner"))
    models = np.empty_like(Phi)
    for t in range(y.size):
        models[t] = learner.w
        learner.update(Phi[t], int(y[t]))
    loss = PairLoss(cfg.loss, hp.lam)
    w_star = comparator_fit(Phi, y, loss)
    curve = regret_curve(models, w_star, Phi, y, loss)
    jensen = []
    if jensen_every > 0:
        labels = [int(v) for v in y]
        for t in range(jensen_every, y.size, jensen_every):
            history = list(zip(Phi[:t], labels[:t]))
            if -labels[t] not in labels[:t]:
                continue
            z = (Phi[t], labels[t])
            jensen.append((t + 1, jensen_gap(models[t], history, z, loss),
                           jensen_bound(history, labels[t], loss)))
    return OracleResult(curve, jensen, w_star, models)


def jensen_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "gap", "bound"])
    for t, gap, bound in rows:
        w.writerow([t, repr(float(gap)), repr(float(bound))])
    return buf.getvalue()


# ------------------------------------------------------------------- report


def _sorted(rows):
    return sorted(rows, key=lambda r: (r.dataset, r.learner))


def report(rows: Sequence[ResultRow], fmt: str = "csv") -> str:
    if not rows:
        raise ValueError("no rows to report")
    rows = _sorted(rows)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=ResultRow.CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.csv_record())
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([dataclasses.asdict(r) for r in rows], indent=2, sort_keys=True) + "\n"
    if fmt == "markdown":
        learners = sorted({r.learner for r in rows})
        datasets = sorted({r.dataset for r in rows})
        cell = {(r.dataset, r.learner): r for r in rows}
        lines = ["| Dataset | " + " | ".join(learners) + " |",
                 "|---|" + "---|" * len(learners)]
        for ds in datasets:
            vals = []
            for lr in learners:
                r = cell.get((ds, lr))
                vals.append("" if r is None else f"{100 * r.mean_auc:.2f} ± {100 * r.stderr:.2f}")
            lines.append(f"| {ds} | " + " | ".join(vals) + " |")
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


def rows_from_json(text: str) -> list:
    return [ResultRow(**d) for d in json.loads(text)]
