"""Numerical checks of the inequalities behind the moment bound.

* Prekopa-Leindler on sampled triples (f, g, h) over a box.
* The moment ratio d_alpha d_{alpha+2beta} / d_{alpha+beta}^2, bounded below
  by 1 (Cauchy-Schwarz) and above by 4^|beta| / sqrt(delta).  The upper
  constant comes from the scalar bound with K = 2^eta applied to
  eta = 2 beta_i in each coordinate.
* The binomial factor binom(alpha+beta, beta) / binom(alpha+2beta, beta) <= 1.
* The scalar bound 2^b ((u+v)/2)^(a+b) >= sqrt(u^a v^(a+2b)).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from reinhardt.geometry import as_multi_index
from reinhardt.moments import MomentTable
from reinhardt.weight import WeightSpec

CAUCHY_SCHWARZ_TOL = 1e-9
QUADRATURE_BOUND_TOL = 1e-6
PL_TOL = 1e-8


@dataclass(frozen=True)
class InequalityReport:
    name: str
    parameters: dict
    worst_ratio: float
    worst_witness: tuple
    passed: bool
    samples: int
    status: str = ""
    extra: dict = field(default_factory=dict)

    def csv_row(self) -> list:
        params = ";".join(f"{k}={_fmt(v)}" for k, v in self.parameters.items())
        return [self.name, params, repr(float(self.worst_ratio)), _fmt(self.worst_witness),
                "pass" if self.passed else "fail"]


CSV_HEADER = ["name", "params", "worst_ratio", "witness", "pass"]


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        return "(" + " ".join(_fmt(x) for x in v) + ")"
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -- binomial and moment ratios ---------------------------------------------

def log_binomial_factor(alpha, beta) -> float:
    a = np.asarray(as_multi_index(alpha), dtype=float)
    b = np.asarray(as_multi_index(beta, len(a)), dtype=float)
    return float(np.sum(2 * gammaln(a + b + 1) - gammaln(a + 1) - gammaln(a + 2 * b + 1)))


def binomial_factor(alpha, beta) -> float:
    """(alpha+beta)!^2 / (alpha! (alpha+2beta)!), a value in (0, 1]."""
    return math.exp(log_binomial_factor(alpha, beta))


def lemma_coeff_log_ratio(table: MomentTable, alpha, beta) -> float:
    n = table.dimension
    alpha = as_multi_index(alpha, n)
    beta = as_multi_index(beta, n)
    a1 = tuple(x + y for x, y in zip(alpha, beta))
    a2 = tuple(x + 2 * y for x, y in zip(alpha, beta))
    return 0.5 * table.log_d2(alpha) + 0.5 * table.log_d2(a2) - table.log_d2(a1)


def lemma_coeff_ratio(table: MomentTable, alpha, beta) -> float:
    """d_alpha d_{alpha+2beta} / d_{alpha+beta}^2."""
    return math.exp(lemma_coeff_log_ratio(table, alpha, beta))


def lemma_coeff_bound(beta, delta: float = 1.0) -> float:
    """4^|beta| / sqrt(delta); delta = 1 for every supported weight family."""
    return 4.0 ** sum(as_multi_index(beta)) / math.sqrt(delta)


def scan_lemma_coeff(table: MomentTable, beta, max_degree: int,
                     delta: float = 1.0) -> InequalityReport:
    """Worst moment ratio over all alpha with alpha_i <= max_degree."""
    n = table.dimension
    beta = as_multi_index(beta, n)
    table.require(max_degree + 2 * max(beta), "lemma scan")
    L = table.log_array
    a0 = tuple(slice(0, max_degree + 1) for _ in beta)
    a1 = tuple(slice(b, b + max_degree + 1) for b in beta)
    a2 = tuple(slice(2 * b, 2 * b + max_degree + 1) for b in beta)
    logs = 0.5 * L[a0] + 0.5 * L[a2] - L[a1]
    imax = np.unravel_index(int(np.argmax(logs)), logs.shape)
    imin = np.unravel_index(int(np.argmin(logs)), logs.shape)
    worst = math.exp(float(logs[imax]))
    lowest = math.exp(float(logs[imin]))
    bound = lemma_coeff_bound(beta, delta)
    passed = worst <= bound + QUADRATURE_BOUND_TOL and lowest >= 1 - CAUCHY_SCHWARZ_TOL
    return InequalityReport(
        "lemma-coeff",
        {"domain": table.domain.name, "weight": table.weight.label, "beta": beta,
         "max_degree": max_degree, "bound": bound},
        worst, tuple(int(i) for i in imax), passed, int(logs.size),
        status="pass" if passed else "fail",
        extra={"min_ratio": lowest, "min_witness": tuple(int(i) for i in imin)},
    )


# -- scalar midpoint inequality ---------------------------------------------

def scalar_midpoint_log_margin(u, v, a, b):
    """log(2^b ((u+v)/2)^(a+b)) - log(sqrt(u^a v^(a+2b))), vectorized; 0^0 = 1."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = b * math.log(2.0) + np.where(a + b > 0, (a + b) * np.log((u + v) / 2), 0.0)
        rhs = (np.where(a > 0, 0.5 * a * np.log(u), 0.0)
               + np.where(a + 2 * b > 0, (0.5 * a + b) * np.log(v), 0.0))
        margin = lhs - rhs
    # rhs = 0 (and lhs >= 0) whenever a zero base meets a positive exponent
    return np.where(np.isneginf(rhs), np.inf, margin)


def check_scalar_midpoint(u: float, v: float, a: int, b: int, tol: float = 1e-12) -> bool:
    if u < 0 or v < 0 or a < 0 or b < 0:
        raise ValueError("check_scalar_midpoint needs u, v, a, b >= 0")
    return bool(scalar_midpoint_log_margin(u, v, a, b) >= -tol)


def sweep_scalar_midpoint(samples: int, seed: int, u_max: float = 10.0, a_max: int = 50,
                          b_max: int = 5, tol: float = 1e-12) -> InequalityReport:
    """Seeded random sweep of the scalar bound; worst_ratio is the smallest LHS/RHS."""
    rng = np.random.default_rng(seed)
    # u, v uniform on (0, u_max]
    u = u_max * (1.0 - rng.random(samples))
    v = u_max * (1.0 - rng.random(samples))
    a = rng.integers(0, a_max + 1, samples)
    b = rng.integers(0, b_max + 1, samples)
    margin = scalar_midpoint_log_margin(u, v, a, b)
    i = int(np.argmin(margin))
    t = np.sqrt(u / v)
    am_gm = float(np.min((t + 1.0 / t) / 2))
    passed = bool(margin[i] >= -tol) and am_gm >= 1.0 - 1e-15
    return InequalityReport(
        "scalar-midpoint",
        {"samples": samples, "seed": seed, "u_max": u_max, "a_max": a_max, "b_max": b_max},
        math.exp(float(margin[i])), (float(u[i]), float(v[i]), int(a[i]), int(b[i])),
        passed, samples, status="pass" if passed else "fail", extra={"min_t_form": am_gm},
    )


# -- Prekopa-Leindler --------------------------------------------------------

Sampled = Callable[[np.ndarray], np.ndarray]


def check_prekopa_leindler(f: Sampled, g: Sampled, h: Sampled, box: Sequence[tuple[float, float]],
                           t: float = 0.5, grid: int = 2048, pair_grid: Optional[int] = None,
                           name: str = "prekopa-leindler", parameters: Optional[dict] = None,
                           tol: float = PL_TOL) -> InequalityReport:
    """Grid check of h((1-t)x + ty) >= f(x)^(1-t) g(y)^t and of the integral conclusion.

    The functions take arrays of shape (..., n) and return non-negative
    values.  Integrals use the midpoint rule with ``grid`` cells per axis.
    The hypothesis is checked on all pairs of a ``pair_grid`` lattice of
    cell midpoints (default: the full grid when n = 1, 48 per axis otherwise).
    A failed hypothesis marks the report ``hypothesis-not-verified``.
    """
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    box = [(float(lo), float(hi)) for lo, hi in box]
    n = len(box)
    if pair_grid is None:
        pair_grid = grid if n == 1 else min(grid, 48)

    def lattice(m):
        axes = [lo + (np.arange(m) + 0.5) * (hi - lo) / m for lo, hi in box]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)

    pts = lattice(pair_grid)
    fx = np.asarray(f(pts), dtype=float)
    gy = np.asarray(g(pts), dtype=float)
    with np.errstate(divide="ignore"):
        lf, lg = np.log(fx), np.log(gy)
    hyp_worst, hyp_witness = np.inf, None
    step = max(1, 4_000_000 // len(pts))
    for s in range(0, len(pts), step):
        x = pts[s:s + step]
        mid = (1 - t) * x[:, None, :] + t * pts[None, :, :]
        with np.errstate(divide="ignore"):
            lh = np.log(np.asarray(h(mid.reshape(-1, n)), dtype=float)).reshape(len(x), len(pts))
        rhs = (1 - t) * lf[s:s + step, None] + t * lg[None, :]
        with np.errstate(invalid="ignore"):
            gap = np.where(np.isneginf(rhs), np.inf, lh - rhs)
        i = np.unravel_index(int(np.argmin(gap)), gap.shape)
        if gap[i] < hyp_worst:
            hyp_worst = float(gap[i])
            hyp_witness = (tuple(map(float, x[i[0]])), tuple(map(float, pts[i[1]])))
    hypothesis_ok = hyp_worst >= math.log1p(-1e-12)

    cells = lattice(grid)
    vol = float(np.prod([(hi - lo) / grid for lo, hi in box]))
    If = math.fsum(np.asarray(f(cells), dtype=float)) * vol
    Ig = math.fsum(np.asarray(g(cells), dtype=float)) * vol
    Ih = math.fsum(np.asarray(h(cells), dtype=float)) * vol
    rhs = If ** (1 - t) * Ig ** t
    conclusion_ok = Ih >= rhs - tol
    ratio = Ih / rhs if rhs > 0 else math.inf
    if not hypothesis_ok:
        status = "hypothesis-not-verified"
    else:
        status = "pass" if conclusion_ok else "fail"
    params = dict(parameters or {})
    params.update({"t": t, "grid": grid})
    return InequalityReport(
        name, params, ratio, hyp_witness, hypothesis_ok and conclusion_ok,
        len(pts) ** 2, status=status,
        extra={"int_f": If, "int_g": Ig, "int_h": Ih, "hypothesis_log_gap": hyp_worst},
    )


def indicator_triple():
    def ind(x):
        return np.all((x >= 0) & (x <= 1), axis=-1).astype(float)
    return ind, ind, ind, [(-0.5, 1.5)]


def gaussian_triple(shift: float = 0.0):
    """h = exp(-|x|^2), f and g shifted by -/+ shift along every axis."""
    def f(x):
        return np.exp(-np.sum((x - shift) ** 2, axis=-1))

    def g(x):
        return np.exp(-np.sum((x + shift) ** 2, axis=-1))

    def h(x):
        return np.exp(-np.sum(x ** 2, axis=-1))
    return f, g, h, [(-5.0, 5.0)]


def lemma_coeff_triple(domain, weight: WeightSpec, zeta, eta):
    """h = K r^(zeta+eta) lambda chi, f = r^zeta lambda chi, g = r^(zeta+2eta) lambda chi.

    ``K = 2^|eta|`` is folded into h, so the hypothesis is exactly the scalar
    bound combined with the weight midpoint ratio (delta = 1).
    """
    from reinhardt.weight import log_weight

    n = domain.dimension
    zeta = np.asarray(as_multi_index(zeta, n), dtype=float)
    eta = np.asarray(as_multi_index(eta, n), dtype=float)
    K = 2.0 ** eta.sum()

    def make(expo, scale):
        def fn(r):
            r = np.asarray(r, dtype=float)
            lam = np.exp(log_weight(weight, domain, r))
            with np.errstate(invalid="ignore"):
                return scale * np.prod(np.power(r, expo), axis=-1) * lam
        return fn

    box = [(0.0, b) for b in domain.radial_box]
    return make(zeta, 1.0), make(zeta + 2 * eta, 1.0), make(zeta + eta, K), box


def run_pl_triple(kind: str, t: float = 0.5, grid: int = 2048, domain=None, weight=None,
                  zeta=0, eta=0, shift: float = 0.0) -> InequalityReport:
    if kind == "indicator":
        f, g, h, box = indicator_triple()
        params = {"triple": kind}
    elif kind == "gaussian":
        f, g, h, box = gaussian_triple(shift)
        params = {"triple": kind, "shift": shift}
    elif kind == "lemma-coeff":
        f, g, h, box = lemma_coeff_triple(domain, weight or WeightSpec(), zeta, eta)
        params = {"triple": kind, "domain": domain.name,
                  "weight": (weight or WeightSpec()).label,
                  "zeta": as_multi_index(zeta, domain.dimension),
                  "eta": as_multi_index(eta, domain.dimension)}
    else:
        raise ValueError(f"unknown Prekopa-Leindler triple {kind!r}")
    return check_prekopa_leindler(f, g, h, box, t=t, grid=grid,
                                  name="prekopa-leindler", parameters=params)


def binomial_monotone_in_beta(alpha, beta_max: int) -> bool:
    """binomial_factor(alpha, beta) is non-increasing in each component of beta."""
    n = len(as_multi_index(alpha))
    for beta in itertools.product(range(beta_max), repeat=n):
        base = log_binomial_factor(alpha, beta)
        for i in range(n):
            bumped = list(beta)
            bumped[i] += 1
            if log_binomial_factor(alpha, bumped) > base + 1e-12:
                return False
    return True
