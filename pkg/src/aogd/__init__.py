"""Streaming pairwise AUC maximization with averaged online gradient descent."""

from .baselines import BufferOgd, OgdLast, ReservoirBuffer
from .dataio import Dataset, Example, ParseError, StreamOrder, load_libsvm, normalize, parse_libsvm
from .evaluation import auc, comparator_fit, local_loss_oracle, regret_curve
from .features import RffMap, rff_sample
from .learner import Aogd, AogdConfig, DivergenceError, GammaRule
from .loss import PairLoss

__all__ = [
    "Aogd", "AogdConfig", "BufferOgd", "Dataset", "DivergenceError", "Example", "GammaRule",
    "OgdLast", "PairLoss", "ParseError", "ReservoirBuffer", "RffMap", "StreamOrder", "auc",
    "comparator_fit", "load_libsvm", "local_loss_oracle", "normalize", "parse_libsvm",
    "regret_curve", "rff_sample",
]
__version__ = "0.1.0"
