import numpy as np
import pytest

from infoconc import potentials, samplers


@pytest.fixture(scope="session")
def neg_log_1d():
    return potentials.make_builtin("neg_log", d=1)


@pytest.fixture(scope="session")
def gaussian_1d():
    return potentials.make_builtin("gaussian", d=1)


@pytest.fixture(scope="session")
def neg_log_composite_5d():
    one = potentials.make_builtin("neg_log", d=1)
    parts = [(potentials.embed(one, 5, [i]), 1.0) for i in range(5)]
    return potentials.compose_sum(parts)


@pytest.fixture(scope="session")
def logistic_box_2d():
    row = np.array([[1.0, 1.0]]) / np.sqrt(2.0)
    base = potentials.make_builtin("logistic", rows=row)
    box = potentials.SupportSpec.box([-1.0, -1.0], [1.0, 1.0],
                                     lower_open=[False, False],
                                     upper_open=[False, False])
    return potentials.add_nonsmooth(base, potentials.indicator(box))


@pytest.fixture(scope="session")
def neg_log_exact_100k(neg_log_1d):
    return samplers.sample_exact(neg_log_1d, 100_000, seed=20240501)


def interior_points(support, n, seed, pad=0.05):
    """Random points safely inside a support (away from boundaries)."""
    gen = np.random.Generator(np.random.Philox(key=seed))
    d = support.dimension
    if support.kind == "full":
        return gen.standard_normal((n, d))
    if support.kind == "box":
        lo = np.where(np.isfinite(support.lower), support.lower, -3.0)
        hi = np.where(np.isfinite(support.upper), support.upper, 3.0)
        width = hi - lo
        return lo + (pad + (1 - 2 * pad) * gen.random((n, d))) * width
    if support.kind == "simplex":
        g = gen.standard_exponential((n, d + 1))
        w = g / g.sum(axis=1, keepdims=True)
        return pad / d + (1 - 2 * pad) * w[:, :d]
    raise ValueError(support.kind)
