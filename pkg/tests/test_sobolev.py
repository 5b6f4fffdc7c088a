import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reinhardt import MonomialPolynomial, WeightSpec, closed_form_table, unit_disc
from reinhardt.errors import MomentRangeError
from reinhardt.sobolev import (
    betas_up_to,
    boundedness_experiment,
    boundedness_sweep,
    derivative_pairs,
    monomial_family,
    monomial_log_projection_derivative,
    monomial_log_sobolev,
    projection_derivative_norm,
    sobolev_norm,
    trend_of,
)

from conftest import table_for


def disc(degree=60):
    return closed_form_table(unit_disc(), WeightSpec(), degree)


def exact_disc_ratio(p, q, k, beta):
    """||d^beta B z^p zbar^q||^2 / ||z^p zbar^q||_k^2 with d_m^2 = pi / (m + 1); pi cancels."""
    d2 = lambda m: Fraction(1, m + 1)
    den = Fraction(0)
    for b in range(k + 1):
        for g in range(k + 1 - b):
            if g <= p and b <= q:
                den += (math.perm(p, g) * math.perm(q, b)) ** 2 * d2(p - g + q - b)
    m = p - q
    if m < beta:
        return Fraction(0)
    proj = d2(p) / d2(m)
    return proj ** 2 * math.perm(m, beta) ** 2 * d2(m - beta) / den


def test_sobolev_norm_of_z():
    # ||z||^2 + ||1||^2 = pi/2 + pi
    assert sobolev_norm(disc(), MonomialPolynomial.monomial([1]), 1, squared=True) == (
        pytest.approx(3 * math.pi / 2, rel=1e-14))


def test_projection_derivative_value():
    # B(z^2 zbar) = (2/3) z, derivative 2/3, norm^2 (4/9) pi
    f = MonomialPolynomial.from_records([[2, 1, 1.0, 0.0]])
    assert projection_derivative_norm(disc(), f, [1]) == pytest.approx(4 * math.pi / 9,
                                                                       rel=1e-14)


def test_order_zero_norm_is_l2():
    f = MonomialPolynomial.from_records([[2, 1, 1, 0], [0, 3, 0, 2]])
    t = disc()
    assert sobolev_norm(t, f, 0) == pytest.approx(math.sqrt((math.pi / 4) * (1 + 4)))
    with pytest.raises(ValueError):
        sobolev_norm(t, f, -1)


def test_derivative_pair_count():
    # pairs (bar_beta, gamma) in N^n x N^n with total <= k
    assert len(list(derivative_pairs(2, 3))) == math.comb(4 + 3, 4)


@pytest.mark.parametrize("name", ["disc", "ball2", "ellipsoid21"])
@pytest.mark.parametrize("k", [1, 2])
def test_vectorized_path_matches_polynomial_path(name, k):
    t = table_for(name, "exp", 12)
    n = t.dimension
    P, Q = monomial_family(n, 3)
    rng = np.random.default_rng(0)
    beta = betas_up_to(n, k)[-1]
    log_den = monomial_log_sobolev(t, P, Q, k)
    log_num = monomial_log_projection_derivative(t, P, Q, beta)
    for i in rng.choice(len(P), min(25, len(P)), replace=False):
        f = MonomialPolynomial.from_terms(n, [((tuple(P[i]), tuple(Q[i])), 1.0)])
        assert math.exp(log_den[i]) == pytest.approx(sobolev_norm(t, f, k, squared=True),
                                                     rel=1e-12)
        num = projection_derivative_norm(t, f, beta)
        if num == 0:
            assert log_num[i] == -math.inf
        else:
            assert math.exp(log_num[i]) == pytest.approx(num, rel=1e-12)


@pytest.mark.parametrize("k, beta", [(1, 1), (2, 1), (2, 2), (3, 1), (3, 3)])
def test_disc_sup_matches_exact_rationals(k, beta):
    top = 15
    rep = boundedness_experiment(disc(), k, [beta], top)
    running = Fraction(0)
    for d, s in rep.per_degree:
        for p in range(d + 1):
            for q in range(d + 1):
                if max(p, q) == d:
                    running = max(running, exact_disc_ratio(p, q, k, beta))
        assert s == pytest.approx(float(running), rel=1e-12)


def test_holomorphic_sup_on_disc():
    # for k = beta = 1 the sup over degree <= D is D(D+1) / (1 + D(D+1))
    rep = boundedness_experiment(disc(80), 1, [1], 40)
    assert rep.overall_sup == pytest.approx(1640 / 1641, rel=1e-12)
    assert rep.argmax == ((40,), (0,))
    assert rep.trend == "plateau" and rep.passed


def test_per_degree_values_start_as_expected():
    rep = boundedness_experiment(disc(), 3, [1], 5)
    sups = [s for _, s in rep.per_degree]
    assert sups[0] == 0.0
    assert sups[1] == pytest.approx(2 / 3, rel=1e-13)
    assert sups == sorted(sups)


def test_sweep_requires_double_degree():
    with pytest.raises(MomentRangeError):
        boundedness_experiment(disc(30), 1, [1], 16)
    with pytest.raises(ValueError):
        boundedness_experiment(disc(30), 1, [2], 5)


def test_random_family_is_seeded():
    t = table_for("ball2", "pow1", 12, "closed-form")
    a = boundedness_experiment(t, 2, [1, 0], 6, "random-mixed", seed=3, count=4)
    b = boundedness_experiment(t, 2, [1, 0], 6, "random-mixed", seed=3, count=4)
    c = boundedness_experiment(t, 2, [1, 0], 6, "random-mixed", seed=4, count=4)
    assert a.csv_rows() == b.csv_rows()
    assert a.csv_rows() != c.csv_rows()
    with pytest.raises(ValueError):
        boundedness_experiment(t, 2, [1, 0], 6, "random-mixed")


def test_random_family_stays_below_monomial_bound_scale():
    t = table_for("disc", "pow1", 30, "closed-form")
    rep = boundedness_experiment(t, 2, [1], 12, "random-mixed", seed=1, count=10)
    assert rep.passed and math.isfinite(rep.overall_sup)


def test_sweep_shares_denominators():
    t = table_for("ball2", "one", 20, "closed-form")
    reports = boundedness_sweep(t, 2, betas_up_to(2, 2), 10)
    assert len(reports) == 6
    single = boundedness_experiment(t, 2, [1, 1], 10)
    match = [r for r in reports if r.beta == (1, 1)][0]
    assert match.per_degree == single.per_degree


def test_summary_line():
    rep = boundedness_experiment(disc(), 1, [1], 5)
    line = rep.summary()
    assert line.startswith("# ") and "trend=plateau" in line and "k=1" in line


@pytest.mark.parametrize("values, trend", [
    ([0.1, 0.5, 0.9, 0.91, 0.92], "plateau"),
    ([1.0, 2.0, 4.0, 8.0], "growing"),
    ([0.0, 0.0, 0.0], "plateau"),
    ([1.0, 1.0], "plateau"),
])
def test_trend_classification(values, trend):
    assert trend_of(values) == trend


@settings(max_examples=60)
@given(st.lists(st.floats(0.0, 1e6), min_size=3, max_size=12))
def test_trend_of_nondecreasing_sequences(values):
    values = sorted(values)
    tail = values[-3:]
    expect = "plateau" if tail[-1] == 0 or (tail[-1] - tail[0]) / tail[-1] < 0.05 else "growing"
    assert trend_of(values) == expect


def xdisc():
    return table_for("disc", "pow1", 30, "closed-form")


@pytest.mark.parametrize("records", [[[0, 1, 1, 0]], [[1, 1, 1, 0]]])
def test_projection_derivative_vanishes(records):
    f = MonomialPolynomial.from_records(records)
    assert projection_derivative_norm(xdisc(), f, [1]) == 0.0


def test_trivial_families():
    t = table_for("ball2", "exp", 12)
    hol = boundedness_experiment(t, 0, [0, 0], 6)
    # holomorphic inputs give ratio 1 when beta = k = 0; mixed ones give less
    assert hol.overall_sup == pytest.approx(1.0, rel=1e-12)
    from reinhardt.sobolev import monomial_log_projection_derivative, monomial_log_sobolev
    P = np.zeros((5, 2), dtype=np.int64)
    Q = np.array([[1, 0], [0, 2], [3, 1], [1, 1], [0, 5]])
    assert np.all(monomial_log_projection_derivative(t, P, Q, [0, 0]) == -np.inf)


polys2 = st.lists(
    st.tuples(st.tuples(st.tuples(st.integers(0, 4), st.integers(0, 4)),
                        st.tuples(st.integers(0, 4), st.integers(0, 4))),
              st.complex_numbers(min_magnitude=0.1, max_magnitude=2)),
    min_size=1, max_size=4).map(lambda items: MonomialPolynomial.from_terms(2, items))


@settings(max_examples=40, deadline=None)
@given(polys2, st.integers(0, 3))
def test_sobolev_norm_is_monotone_in_k(f, k):
    t = table_for("ellipsoid21", "pow2", 12, "closed-form")
    assert sobolev_norm(t, f, k + 1) >= sobolev_norm(t, f, k)


@settings(max_examples=40, deadline=None)
@given(polys2, st.tuples(st.integers(0, 2), st.integers(0, 2)))
def test_projection_is_identity_on_holomorphic_inputs(f, beta):
    from reinhardt.operators import derivative, norm_sq
    t = table_for("ball2", "pow1", 12, "closed-form")
    h = MonomialPolynomial(2, {(p, (0, 0)): c for (p, _), c in f.terms.items()})
    assert projection_derivative_norm(t, h, beta) == pytest.approx(
        norm_sq(t, derivative(h, beta)), rel=1e-12, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(polys2, st.complex_numbers(min_magnitude=0.01, max_magnitude=100))
def test_ratio_is_scale_invariant(f, c):
    t = table_for("polydisc2", "one", 12, "closed-form")
    den = sobolev_norm(t, f, 2, squared=True)
    num = projection_derivative_norm(t, f, [1, 0])
    den_c = sobolev_norm(t, f * c, 2, squared=True)
    num_c = projection_derivative_norm(t, f * c, [1, 0])
    assert num_c / den_c == pytest.approx(num / den, rel=1e-10, abs=1e-300)
