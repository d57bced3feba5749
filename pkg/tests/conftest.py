import numpy as np
import pytest

from memegrid.config import GridConfig
from memegrid.neural import Genome, init_genome, layer_shapes


@pytest.fixture
def base_config():
    return GridConfig(rows=16, cols=16, steps=10, seed=12345)


def zero_genome(config) -> Genome:
    return Genome({
        name: np.zeros(shape)
        for name, shape in layer_shapes(config.msg_len, config.msg_channels,
                                        config.task_on)
    })


def random_genome(config, agent=0) -> Genome:
    return init_genome(config, agent)


@pytest.fixture
def zero_g(base_config):
    return zero_genome(base_config)


@pytest.fixture
def rand_g(base_config):
    return random_genome(base_config)
