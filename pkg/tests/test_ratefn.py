import math

import numpy as np
import pytest

from dcmwalk import (
    BiDegreeDistribution,
    FiniteLogLaw,
    ValidationError,
    analyze_distribution,
    bernoulli_rate,
    compute_bp_parameters,
    cumulant_gf,
    minimize_phi,
    out_size_biased,
    phi,
    rate_function,
    rout_exponent,
    single_survivor_law,
)

from conftest import TOY_A0, TOY_EXPONENT, TOY_PHI_A0, zqcy_dist

LOG2, LOG3, LOG32 = math.log(2), math.log(3), math.log(1.5)


@pytest.fixture
def toy_law(toy_dist) -> FiniteLogLaw:
    params = compute_bp_parameters(toy_dist)
    tilde = single_survivor_law(out_size_biased(toy_dist), params.s_minus)
    return FiniteLogLaw.from_marked_law(tilde)


def toy_rate_closed_form(z: float) -> float:
    """Closed-form transform: Z = log2 + log(3/2) * Bernoulli(3/5)."""
    x = (z - LOG2) / LOG32
    if -1e-12 < x < 0.0 or 1.0 < x < 1.0 + 1e-12:  # affine-map rounding
        x = min(1.0, max(0.0, x))
    return bernoulli_rate(x, 0.6)


def test_cumulant_zero_at_origin(toy_law):
    assert cumulant_gf(toy_law, 0.0) == pytest.approx(0.0, abs=1e-14)


def test_cumulant_point_mass():
    law = FiniteLogLaw({LOG2: 1.0})
    assert cumulant_gf(law, 1.0) == pytest.approx(LOG2, abs=1e-14)


def test_cumulant_toy_at_one(toy_law):
    assert cumulant_gf(toy_law, 1.0) == pytest.approx(math.log(2.6), abs=1e-12)


def test_rate_zero_at_mean(toy_law):
    assert rate_function(toy_law, toy_law.mean) <= 1e-10


def test_rate_infinite_off_support(toy_law):
    assert rate_function(toy_law, LOG3 + 1e-6) == math.inf
    assert rate_function(toy_law, LOG2 - 1e-6) == math.inf


def test_rate_endpoints(toy_law):
    assert rate_function(toy_law, LOG2) == pytest.approx(-math.log(0.4), abs=1e-12)
    assert rate_function(toy_law, LOG3) == pytest.approx(-math.log(0.6), abs=1e-12)


def test_rate_matches_bernoulli_closed_form(toy_law):
    grid = np.linspace(LOG2, LOG3, 100)
    for z in grid:
        assert rate_function(toy_law, float(z)) == pytest.approx(
            toy_rate_closed_form(float(z)), abs=1e-9
        )


def test_rate_convexity(toy_law):
    rng = np.random.default_rng(17)
    for _ in range(1000):
        z1, z2 = rng.uniform(LOG2, LOG3, size=2)
        theta = rng.uniform()
        mid = theta * z1 + (1 - theta) * z2
        lhs = rate_function(toy_law, float(mid))
        rhs = theta * rate_function(toy_law, float(z1)) + (1 - theta) * rate_function(
            toy_law, float(z2)
        )
        assert lhs <= rhs + 1e-9


def test_rate_nonnegative_and_monotone(toy_law):
    rng = np.random.default_rng(29)
    h = toy_law.mean
    for _ in range(300):
        z1, z2 = sorted(rng.uniform(h, LOG3, size=2))
        i1, i2 = rate_function(toy_law, float(z1)), rate_function(toy_law, float(z2))
        assert i1 >= -1e-12 and i2 >= -1e-12
        assert i2 >= i1 - 1e-9


def test_finite_log_law_rejects_unit_marks():
    with pytest.raises(ValidationError):
        FiniteLogLaw({0.0: 1.0})


def test_phi_at_one(toy_dist, toy_law):
    params = compute_bp_parameters(toy_dist)
    assert phi(params, toy_law, 1.0) == pytest.approx(
        abs(math.log(params.nu_hat)), abs=1e-9
    )


def test_phi_infinite_for_deterministic_mark_off_one():
    dist = zqcy_dist(10)
    params = compute_bp_parameters(dist)
    law = FiniteLogLaw.from_marked_law(
        single_survivor_law(out_size_biased(dist), params.s_minus)
    )
    assert phi(params, law, 1.2) == math.inf
    assert phi(params, law, 1.0) == pytest.approx(abs(math.log(params.nu_hat)))


def test_phi_toy_minimum_value(toy_dist, toy_law):
    params = compute_bp_parameters(toy_dist)
    assert phi(params, toy_law, TOY_A0) == pytest.approx(TOY_PHI_A0, abs=1e-4)


def test_minimize_phi_toy(toy_dist, toy_law):
    params = compute_bp_parameters(toy_dist)
    report = minimize_phi(params, toy_law)
    assert report.a0 == pytest.approx(TOY_A0, abs=1e-4)
    assert report.phi_a0 == pytest.approx(TOY_PHI_A0, abs=1e-4)
    assert report.exponent == pytest.approx(TOY_EXPONENT, abs=1e-4)
    assert not report.point_domain and not report.degenerate
    assert report.exponent >= 1.0
    assert report.phi_a0 <= abs(math.log(params.nu_hat)) + 1e-12


def test_minimize_phi_zqcy_family():
    previous = None
    for m in (5, 10, 20):
        report, record = analyze_distribution(zqcy_dist(m))
        nu_hat = record["nu_hat"]
        assert report.a0 == 1.0
        assert report.phi_a0 == pytest.approx(abs(math.log(nu_hat)), abs=1e-12)
        assert report.exponent == pytest.approx(
            1.0 + LOG2 / abs(math.log(nu_hat)), abs=1e-9
        )
        if previous is not None:
            assert report.exponent > previous
        previous = report.exponent


def test_minimize_phi_degenerate_regime():
    dist = BiDegreeDistribution({(2, 2): 1.0})
    params = compute_bp_parameters(dist)
    report = minimize_phi(params, None)
    assert params.nu_hat == 0.0
    assert report.exponent == 1.0
    assert report.phi_a0 == math.inf
    assert report.degenerate


def test_minimizer_beats_random_feasible_points(toy_dist, toy_law):
    params = compute_bp_parameters(toy_dist)
    report = minimize_phi(params, toy_law)
    rng = np.random.default_rng(41)
    a_hi = toy_law.z_max / params.H_hat
    for a in rng.uniform(1.0, a_hi, size=200):
        assert report.phi_a0 <= phi(params, toy_law, float(a)) + 1e-9


def test_rate_function_cramer_sanity(toy_law):
    # Empirical -(1/t) log P{mean of t samples >= z} should bracket I(z).
    rng = np.random.default_rng(53)
    t, reps = 40, 10**6
    atoms = sorted(toy_law.atoms)
    probs = [toy_law.atoms[z] for z in atoms]
    samples = rng.choice(atoms, p=probs, size=(reps, t)).mean(axis=1)
    for z in (0.98, 1.02):
        p_hat = float((samples >= z).mean())
        assert p_hat > 0, "need a less extreme z for this sample size"
        rate_emp = -math.log(p_hat) / t
        assert abs(rate_emp - rate_function(toy_law, z)) <= 0.15


def test_rout_exponent_r2():
    # Independent oracle: largest root of 1 - s = exp(-2 s) by scipy solver.
    from scipy.optimize import brentq

    s = brentq(lambda v: 1.0 - v - math.exp(-2.0 * v), 1e-9, 1.0 - 1e-12)
    assert s == pytest.approx(0.7968, abs=1e-4)
    expected = 1.0 + LOG2 / (2.0 * s - LOG2)
    assert rout_exponent(2) == pytest.approx(expected, abs=1e-10)
    assert rout_exponent(2) == pytest.approx(1.7697, abs=1e-4)


def test_rout_exponent_monotone_decreasing():
    values = [rout_exponent(r) for r in range(2, 11)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] > 1.0


def poisson_in_const_out_dist(r: int, kmax: int) -> BiDegreeDistribution:
    pmf = {}
    for k in range(kmax + 1):
        pmf[(k, r)] = math.exp(-r) * r**k / math.factorial(k)
    total = sum(pmf.values())
    return BiDegreeDistribution({p: w / total for p, w in pmf.items()})


def test_rout_matches_general_pipeline():
    dist = poisson_in_const_out_dist(2, 40)
    report, _ = analyze_distribution(dist)
    assert report.exponent == pytest.approx(rout_exponent(2), abs=2e-3)
