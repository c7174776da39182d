import pytest

from dcmwalk import BiDegreeDistribution, MarkedOffspringLaw, out_size_biased

# The worked example distribution: in-degrees 0/5, out-degrees 2/3, all
# pairs equally likely. Mean-balanced with lambda = 5/2, delta_out = 2.
TOY_PMF = {(0, 2): 0.25, (0, 3): 0.25, (5, 2): 0.25, (5, 3): 0.25}

# Reference values for the toy distribution (interval-arithmetic precision
# 1e-6 at the source).
TOY_NU_HAT = 0.181095
TOY_H_HAT = 0.936426
TOY_A0 = 1.06671
TOY_PHI_A0 = 1.65129
TOY_EXPONENT = 1.56708


@pytest.fixture
def toy_dist() -> BiDegreeDistribution:
    return BiDegreeDistribution(dict(TOY_PMF))


@pytest.fixture
def toy_biased(toy_dist) -> MarkedOffspringLaw:
    return out_size_biased(toy_dist)


def zqcy_dist(m: int) -> BiDegreeDistribution:
    """In-degree 1 or m (skewed), out-degree always 2; mean-balanced."""
    return BiDegreeDistribution(
        {(1, 2): (m - 2) / (m - 1), (m, 2): 1 / (m - 1)}, max_degree=max(64, m)
    )
