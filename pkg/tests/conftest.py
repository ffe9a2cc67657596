import numpy as np
import pytest

from zonocp.mlp import Mlp, UncertaintyIndex
from zonocp.placement import Placement


def identity_net(n):
    """f(x) = x, a single affine layer."""
    return Mlp([(np.eye(n), np.zeros(n))])


def output_placement(n_y, template=None):
    idx = [UncertaintyIndex("output", -1, j) for j in range(n_y)]
    return Placement(idx, np.eye(n_y) if template is None else template, "orand", 0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
