import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st
from scipy import integrate

from reinhardt import WeightSpec, ball, build_table, closed_form_table, polydisc, unit_disc
from reinhardt.errors import MomentRangeError, QuadratureError, TableFormatError
from reinhardt.geometry import complex_ellipsoid, custom_domain
from reinhardt.moments import (
    MomentTable,
    closed_form_moment,
    compute_moment,
    load_table,
    log_convexity_violation,
    save_table,
)
from reinhardt.weight import log_weight

from conftest import DOMAINS, WEIGHTS, table_for


def scipy_moment(domain, weight, gamma):
    """Oracle: nested scipy quadrature of prod r^(2g+1) lambda over the radial image."""
    n = domain.dimension
    lam = lambda *r: float(np.exp(log_weight(weight, domain, np.array(r))))
    if n == 1:
        R = domain.semi_axes[0]
        val, _ = integrate.quad(lambda r: r ** (2 * gamma[0] + 1) * lam(r), 0, R,
                                epsabs=0, epsrel=1e-12, limit=200)
    else:
        R1, R2 = domain.semi_axes

        def top(r1):
            # largest r2 with rho(r1, r2) <= 0
            if domain.family == "polydisc":
                return R2
            s = (r1 / R1) ** (2 * domain.exponents[0] if domain.exponents else 2)
            p2 = domain.exponents[1] if domain.exponents else 1
            return R2 * max(0.0, 1 - s) ** (1 / (2 * p2))

        def inner(r1):
            hi = top(r1)
            # the polydisc defining function has a kink on r2 / R2 = r1 / R1
            kink = r1 * R2 / R1
            pts = [kink] if domain.family == "polydisc" and 0 < kink < hi else None
            v, _ = integrate.quad(
                lambda r2: r2 ** (2 * gamma[1] + 1) * lam(r1, r2), 0, hi,
                points=pts, epsabs=0, epsrel=1e-12, limit=200)
            return r1 ** (2 * gamma[0] + 1) * v

        val, _ = integrate.quad(inner, 0, R1, epsabs=0, epsrel=1e-11, limit=200)
    return (2 * math.pi) ** n * val


# -- frozen oracle values --------------------------------------------------------

def test_disc_volume():
    assert math.exp(closed_form_moment(unit_disc(), WeightSpec(), [0])) == pytest.approx(math.pi)


def test_disc_power_two_gamma_three():
    # pi * 3! 2! / 6!
    value = math.exp(closed_form_moment(unit_disc(), WeightSpec.power(2), [3]))
    assert value == pytest.approx(math.pi / 60, rel=1e-13)


def test_polydisc_product():
    value = math.exp(closed_form_moment(polydisc([1, 1]), WeightSpec(), [1, 2]))
    assert value == pytest.approx(math.pi ** 2 / 6, rel=1e-13)


def test_ball_volume():
    value = math.exp(closed_form_moment(ball(2), WeightSpec(), [0, 0]))
    assert value == pytest.approx(math.pi ** 2 / 2, rel=1e-13)


@pytest.mark.parametrize("a", [0, 1, 2, 3])
@pytest.mark.parametrize("m", [0, 1, 4, 9])
def test_disc_closed_form_matches_exact_symbolic_integral(a, m):
    r = sp.symbols("r", positive=True)
    exact = 2 * sp.pi * sp.integrate(r ** (2 * m + 1) * (1 - r ** 2) ** a, (r, 0, 1))
    got = math.exp(closed_form_moment(unit_disc(), WeightSpec.power(a), [m]))
    assert got == pytest.approx(float(exact), rel=1e-13)


@pytest.mark.parametrize("dname", sorted(DOMAINS))
@pytest.mark.parametrize("wname", sorted(WEIGHTS))
def test_quadrature_matches_scipy(dname, wname):
    d, w = DOMAINS[dname](), WEIGHTS[wname]()
    gamma = [3] if d.dimension == 1 else [2, 1]
    got = math.exp(compute_moment(d, w, gamma))
    assert got == pytest.approx(scipy_moment(d, w, gamma), rel=1e-8)


@pytest.mark.parametrize("dname", ["ball2", "polydisc2", "ellipsoid21"])
def test_closed_forms_match_scipy(dname):
    d = DOMAINS[dname]()
    for w in (WeightSpec(), WeightSpec.power(1.5)):
        for gamma in ([0, 0], [3, 1], [0, 5]):
            got = math.exp(closed_form_moment(d, w, gamma))
            assert got == pytest.approx(scipy_moment(d, w, gamma), rel=1e-8)


def test_radial_reduction_against_cartesian_monte_carlo():
    # independent of the radial formula: sample C^2 directly
    rng = np.random.default_rng(11)
    z = rng.uniform(-1, 1, (400_000, 4))
    r2 = np.stack([z[:, 0] ** 2 + z[:, 1] ** 2, z[:, 2] ** 2 + z[:, 3] ** 2], axis=1)
    inside = r2.sum(axis=1) < 1
    integrand = np.where(inside, r2[:, 0] * (1 - r2.sum(axis=1)), 0.0)
    est = 16 * integrand.mean()
    err = 16 * integrand.std() / math.sqrt(len(z))
    exact = math.exp(closed_form_moment(ball(2), WeightSpec.power(1), [1, 0]))
    assert abs(est - exact) < 5 * err


def test_scaling_covariance():
    # d_gamma^2(sD) = s^(2|gamma| + 2n) d_gamma^2(D)
    s, gamma = 2.0, (2, 3)
    for w in (WeightSpec(), WeightSpec.exponential()):
        small = compute_moment(ball(2), w, gamma)
        big = compute_moment(ball(2, s), w, gamma)
        assert big - small == pytest.approx((2 * sum(gamma) + 4) * math.log(s), abs=1e-9)


def test_larger_power_gives_smaller_moments():
    d = ball(2)
    for gamma in ([0, 0], [4, 2]):
        logs = [closed_form_moment(d, WeightSpec.power(a), gamma) for a in (0, 1, 2, 3)]
        assert logs == sorted(logs, reverse=True)


def test_polydisc_power_weight_uses_max_defining_function():
    d, w, gamma = polydisc([1, 2]), WeightSpec.power(2), [1, 0]
    assert math.exp(closed_form_moment(d, w, gamma)) == pytest.approx(
        scipy_moment(d, w, gamma), rel=1e-9)


def test_closed_form_unavailable_for_exponential():
    with pytest.raises(ValueError):
        closed_form_moment(unit_disc(), WeightSpec.exponential(), [0])


# -- tables -----------------------------------------------------------------------

@pytest.mark.parametrize("dname", sorted(DOMAINS))
@pytest.mark.parametrize("wname", ["one", "pow1", "pow2"])
def test_table_matches_closed_form(dname, wname):
    deg = 30 if DOMAINS[dname]().dimension == 1 else 12
    q = table_for(dname, wname, deg)
    c = table_for(dname, wname, deg, "closed-form")
    np.testing.assert_allclose(q.log_array, c.log_array, rtol=0, atol=1e-9)
    assert q.provenance == "quadrature"
    assert c.provenance == "closed-form"


@pytest.mark.parametrize("dname", sorted(DOMAINS))
@pytest.mark.parametrize("wname", sorted(WEIGHTS))
def test_tables_are_log_convex(dname, wname):
    deg = 30 if DOMAINS[dname]().dimension == 1 else 12
    worst, _ = log_convexity_violation(table_for(dname, wname, deg))
    assert worst <= 1e-9


def test_table_is_read_only_and_checks_range():
    t = table_for("disc", "one", 30)
    with pytest.raises(ValueError):
        t.log_array[0] = 0.0
    with pytest.raises(MomentRangeError):
        t.log_d2([31])
    with pytest.raises(MomentRangeError):
        t.require(40, "test")
    assert t.covers([30]) and not t.covers([31])


def test_custom_domain_indicator_quadrature():
    d = custom_domain("disc-custom", lambda r: r[..., 0] ** 2 - 1, [1.0])
    t = build_table(d, WeightSpec(), 4, tol=1e-7)
    assert t.provenance == "quadrature-indicator"
    expect = closed_form_table(unit_disc(), WeightSpec(), 4)
    np.testing.assert_allclose(t.log_array, expect.log_array, atol=1e-6)


def test_unreachable_tolerance_raises():
    with pytest.raises(QuadratureError) as info:
        build_table(unit_disc(), WeightSpec(), 3, tol=1e-18)
    assert info.value.achieved is not None and info.value.achieved > 1e-18
    d = custom_domain("c", lambda r: np.sum(r * r, axis=-1) - 1, [1.0, 1.0])
    with pytest.raises(QuadratureError):
        compute_moment(d, WeightSpec(), [0, 0], tol=1e-13)


def test_exponential_weight_high_degree_stays_finite():
    t = table_for("disc", "exp", 80)
    assert np.all(np.isfinite(t.log_array))
    assert np.all(np.diff(t.log_array) < 0)


# -- persistence ------------------------------------------------------------------

@pytest.mark.parametrize("dname", sorted(DOMAINS))
def test_save_load_round_trip_is_bit_exact(dname, tmp_path):
    t = table_for(dname, "exp", 6)
    path = tmp_path / "t.txt"
    save_table(t, path)
    back = load_table(path)
    assert back.log_array.tobytes() == t.log_array.tobytes()
    assert back.domain == t.domain and back.weight == t.weight
    assert back.provenance == "loaded-from-file" and back.origin == "quadrature"
    save_table(back, tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_bytes() == path.read_bytes()


def _corrupt(tmp_path, edit):
    t = table_for("ball2", "one", 3)
    path = tmp_path / "t.txt"
    save_table(t, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(edit(lines)) + "\n")
    return path


@pytest.mark.parametrize("edit, message", [
    (lambda ls: [ls[0], ls[1].replace(": 1", ": 2")] + ls[2:], "version"),
    (lambda ls: ls[:-1], "entries"),
    (lambda ls: ls[:-1] + [ls[-2]], "duplicate"),
    (lambda ls: ls[:-1] + ["3 x 0x1p0"], "malformed"),
    (lambda ls: ["something else"] + ls[1:], "not a moment table"),
    (lambda ls: ls[:4], "truncated"),
])
def test_corrupted_tables_are_rejected(tmp_path, edit, message):
    with pytest.raises(TableFormatError, match=message):
        load_table(_corrupt(tmp_path, edit))


def test_missing_entry_is_named(tmp_path):
    # replace the last record by an out-of-range index; count still matches
    path = _corrupt(tmp_path, lambda ls: ls[:-1] + ["0 9 0x1p0"])
    with pytest.raises(TableFormatError, match=r"gamma=\(3, 3\)"):
        load_table(path)


# -- invariants -------------------------------------------------------------------

@settings(max_examples=80, deadline=None)
@given(st.floats(0.0, 6.0), st.integers(0, 40), st.integers(1, 10))
def test_disc_power_moments_are_log_convex_in_degree(a, m, step):
    w = WeightSpec.power(a)
    lo, mid, hi = (closed_form_moment(unit_disc(), w, [k]) for k in (m, m + step, m + 2 * step))
    assert 2 * mid <= lo + hi + 1e-12


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 12), min_size=2, max_size=2),
       st.lists(st.integers(0, 12), min_size=2, max_size=2))
def test_moment_symmetry_on_symmetric_domains(g, h):
    for name in ("ball2", "polydisc2"):
        t = table_for(name, "exp", 12)
        assert t.log_d2(g) == pytest.approx(t.log_d2(g[::-1]), abs=1e-11)


@pytest.mark.parametrize("dname", sorted(DOMAINS))
def test_moments_decrease_in_each_index(dname):
    t = table_for(dname, "exp", 30 if DOMAINS[dname]().dimension == 1 else 12)
    for axis in range(t.dimension):
        assert np.all(np.diff(t.log_array, axis=axis) < 0)
