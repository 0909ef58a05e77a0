import numpy as np
import pytest

from tsaseg.synth import SynthSpec, generate


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def easy_video():
    """Four well-separated planted classes over six segments."""
    return generate(
        SynthSpec(
            n_segments=6,
            frames_per_segment=(30, 40),
            dims=16,
            n_action_classes=4,
            noise_sigma=0.1,
            center_separation=1.0,
            seed=7,
        )
    )


def adjusted_rand_index(a, b) -> float:
    """Independent partition-agreement oracle (pair-counting form)."""
    from math import comb

    a = np.asarray(a)
    b = np.asarray(b)
    table = np.zeros((int(a.max()) + 1, int(b.max()) + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    sum_cells = sum(comb(int(x), 2) for x in table.ravel())
    sum_rows = sum(comb(int(x), 2) for x in table.sum(axis=1))
    sum_cols = sum(comb(int(x), 2) for x in table.sum(axis=0))
    total = comb(a.size, 2)
    expected = sum_rows * sum_cols / total
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return (sum_cells - expected) / (max_index - expected)
