import os
from pathlib import Path

import numpy as np
import pytest

from freqmoe.model import build_net
from freqmoe.training import substream


def etth1_path():
    """ETTh1.csv is user-supplied; look in $FREQMOE_ETTH1 then ./data/."""
    env = os.environ.get("FREQMOE_ETTH1")
    candidates = [Path(env)] if env else []
    candidates += [Path(__file__).resolve().parent.parent / "data" / "ETTh1.csv"]
    for cand in candidates:
        if cand and cand.exists():
            return cand
    return None


requires_etth1 = pytest.mark.skipif(
    etth1_path() is None,
    reason="ETTh1.csv not available (set FREQMOE_ETTH1 or place it in ./data/)",
)


@pytest.fixture
def tiny_net():
    """Small model with every parameter group active and off the symmetric init."""
    net = build_net("freqmoe", channels=2, lookback=16, horizon=8, n_experts=2,
                    n_blocks=2, dropout=0.3, mask_mode="soft",
                    rng=substream(7, "init"))
    flat = net.param_set.to_flat()
    flat += substream(7, "jitter").normal(0.0, 0.1, size=flat.size)
    net.param_set.assign_flat(flat)
    return net


@pytest.fixture
def tiny_batch():
    rng = np.random.default_rng(3)
    return rng.normal(size=(2, 2, 16)), rng.normal(size=(2, 2, 8))
