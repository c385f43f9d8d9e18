import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from savae.corpus import Document
from savae.model import ModelConfig, init_params
from savae.numerics import RngStream


def tiny_config(mode="savae", m=6, d=2, k=2, layers=(4,)):
    return ModelConfig(mode=mode, m=m, d=d, k=k, encoder_layers=layers)


def random_doc(rng, m, min_len=1, max_len=8):
    l = min_len + int(rng.uniform() * (max_len - min_len + 1))
    l = min(l, max_len)
    return Document(ids=[int(rng.uniform() * m) for _ in range(l)])


def random_model(config, seed=0):
    return init_params(config, RngStream(seed))


def zero_model(config):
    params = init_params(config, RngStream(0))
    for arr in params.named_arrays().values():
        arr[...] = 0.0
    return params


@pytest.fixture
def np_rng():
    return np.random.default_rng(12345)
