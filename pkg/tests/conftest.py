import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from csvgd.network import LayeredNet


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_net(rng, widths=(3, 4, 1), nonneg=None, low=0.05, high=0.6):
    """Softplus chain with weights bounded away from zero so FD probes stay
    inside the nonnegativity domain."""
    n_links = len(widths) - 1
    nonneg = nonneg if nonneg is not None else (False,) * n_links
    weights = []
    for k in range(n_links):
        w = rng.uniform(low, high, size=(widths[k + 1], widths[k]))
        if not nonneg[k]:
            w *= rng.choice([-1.0, 1.0], size=w.shape)
        weights.append(w)
    acts = ("softplus",) * (n_links - 1) + ("identity",)
    return LayeredNet(tuple(widths), tuple(weights), (), acts, tuple(nonneg))
