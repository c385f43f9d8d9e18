"""savae: a sequence-aware variational autoencoder document-modeling toolkit.

Trains a generative document model whose decoder combines a per-document
latent vector with a local window of previous-word embeddings ("savae"
mode) or the latent vector alone ("nvdm" mode), infers posterior-mean
document representations, and evaluates them via retrieval, clustering,
word-neighborhood and linear-probe protocols.
"""

from . import corpus, evaluation, inference, model, numerics, training
from .errors import SavaeError

__all__ = [
    "SavaeError",
    "corpus",
    "evaluation",
    "inference",
    "model",
    "numerics",
    "training",
]

__version__ = "0.1.0"
