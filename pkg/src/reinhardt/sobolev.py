"""Weighted Sobolev norms and the boundedness experiment for d^beta B.

    ||f||_{k,lambda}^2 = sum_{|b + g| <= k} || d^(b+g) f / dzbar^b dz^g ||_lambda^2

On monomials z^p zbar^q everything is explicit:

    || d^g_z d^b_zbar z^p zbar^q ||^2 = (p!/(p-g)!)^2 (q!/(q-b)!)^2 d^2_{p-g+q-b}
    d^beta B (z^p zbar^q) = (d_p^2 / d_{p-q}^2) (m!/(m-beta)!) z^(m-beta),  m = p - q

The monomial family is therefore evaluated on whole index grids at once in
the log domain.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from reinhardt.geometry import MultiIndex, as_multi_index, multi_indices
from reinhardt.moments import MomentTable
from reinhardt.operators import MonomialPolynomial, derivative, norm_sq, project

PLATEAU_THRESHOLD = 0.05


def derivative_pairs(n: int, k: int):
    """All (bar_beta, gamma) with |bar_beta + gamma| <= k."""
    for idx in multi_indices(2 * n, k):
        yield idx[:n], idx[n:]


def sobolev_norm(table: MomentTable, poly: MonomialPolynomial, k: int,
                 squared: bool = False) -> float:
    if k < 0:
        raise ValueError("Sobolev order must be >= 0")
    total = math.fsum(norm_sq(table, derivative(poly, g, b))
                      for b, g in derivative_pairs(poly.dimension, k))
    return total if squared else math.sqrt(total)


def projection_derivative_norm(table: MomentTable, poly: MonomialPolynomial, beta) -> float:
    """|| d^beta B f ||_lambda^2."""
    beta = as_multi_index(beta, poly.dimension)
    return norm_sq(table, derivative(project(table, poly), beta))


@dataclass(frozen=True)
class BoundednessReport:
    domain: str
    weight: str
    k: int
    beta: MultiIndex
    family: str
    per_degree: tuple[tuple[int, float], ...]
    overall_sup: float
    trend: str
    argmax: tuple = ()

    @property
    def passed(self) -> bool:
        return self.trend == "plateau" and math.isfinite(self.overall_sup)

    def csv_rows(self) -> list:
        return [[d, repr(float(s))] for d, s in self.per_degree]

    def summary(self) -> str:
        return (f"# domain={self.domain} weight={self.weight} k={self.k} "
                f"beta={'-'.join(map(str, self.beta))} family={self.family} "
                f"overall_sup={self.overall_sup!r} trend={self.trend}")


def trend_of(sups: Sequence[float], threshold: float = PLATEAU_THRESHOLD) -> str:
    """plateau iff the last three values differ by less than ``threshold`` relative."""
    tail = [s for s in sups[-3:]]
    if len(tail) < 3:
        return "plateau"
    top = max(tail)
    if top == 0:
        return "plateau"
    return "plateau" if (top - min(tail)) / top < threshold else "growing"


def _log_falling(p, k):
    """log prod p!/(p-k)! on integer arrays; -inf where k > p."""
    valid = np.all(p >= k, axis=-1)
    with np.errstate(invalid="ignore"):
        val = np.sum(gammaln(p + 1) - gammaln(np.maximum(p - k, 0) + 1), axis=-1)
    return np.where(valid, val, -np.inf)


def _lookup(table, idx, valid):
    safe = np.where(valid[:, None], idx, 0)
    return np.where(valid, table.log_array[tuple(safe.T)], -np.inf)


def monomial_family(n: int, max_degree: int):
    """Index arrays P, Q covering all z^p zbar^q with |p|, |q| <= max_degree."""
    idx = np.array(list(multi_indices(n, max_degree)), dtype=np.int64)
    P = np.repeat(idx, len(idx), axis=0)
    Q = np.tile(idx, (len(idx), 1))
    return P, Q


def monomial_log_sobolev(table: MomentTable, P, Q, k: int) -> np.ndarray:
    """log ||z^p zbar^q||^2_{k,lambda} for every row of P, Q."""
    n = table.dimension
    terms = []
    for b, g in derivative_pairs(n, k):
        b = np.asarray(b)
        g = np.asarray(g)
        coef = _log_falling(P, g) + _log_falling(Q, b)
        valid = np.isfinite(coef)
        terms.append(2 * coef + _lookup(table, P - g + Q - b, valid))
    return logsumexp(np.stack(terms), axis=0)


def monomial_log_projection_derivative(table: MomentTable, P, Q, beta) -> np.ndarray:
    """log ||d^beta B z^p zbar^q||^2 for every row of P, Q."""
    beta = np.asarray(beta)
    M = P - Q
    hol = np.all(M >= 0, axis=1)
    with np.errstate(invalid="ignore"):
        proj = _lookup(table, P, hol) - _lookup(table, M, hol)
    coef = _log_falling(np.where(hol[:, None], M, 0), beta)
    valid = hol & np.isfinite(coef)
    return np.where(valid, 2 * proj + 2 * coef + _lookup(table, M - beta, valid), -np.inf)


def _cumulative(degrees, ratios, max_degree):
    per = []
    running = 0.0
    for d in range(max_degree + 1):
        sel = ratios[degrees == d]
        if sel.size:
            running = max(running, float(np.max(sel)))
        per.append((d, running))
    return per


def boundedness_sweep(table: MomentTable, k: int, betas, max_degree: int,
                      family: str = "pure-monomials", seed: int | None = None,
                      count: int = 20) -> list[BoundednessReport]:
    """Run the experiment for several beta sharing one set of Sobolev denominators.

    The ratio is ||d^beta B f||^2 / ||f||^2_{k,lambda}.  Inputs are graded
    by degree max(|p|, |q|) (largest over terms for polynomials), and the
    reported value at degree D is the sup over all inputs of degree <= D.
    """
    n = table.dimension
    betas = [as_multi_index(b, n) for b in betas]
    for beta in betas:
        if sum(beta) > k:
            raise ValueError(f"|beta| = {sum(beta)} exceeds Sobolev order {k}")
    table.require(2 * max_degree, "boundedness experiment")
    reports = []
    if family == "pure-monomials":
        P, Q = monomial_family(n, max_degree)
        degree = np.maximum(P.sum(axis=1), Q.sum(axis=1))
        log_den = monomial_log_sobolev(table, P, Q, k)
        for beta in betas:
            log_ratio = monomial_log_projection_derivative(table, P, Q, beta) - log_den
            ratios = np.exp(log_ratio)
            per = _cumulative(degree, ratios, max_degree)
            i = int(np.argmax(ratios))
            reports.append(BoundednessReport(
                table.domain.name, table.weight.label, k, beta, family, tuple(per),
                per[-1][1], trend_of([s for _, s in per]),
                (tuple(map(int, P[i])), tuple(map(int, Q[i]))),
            ))
        return reports
    if family == "random-mixed":
        if seed is None:
            raise ValueError("random-mixed family requires a seed")
        polys, degree = _random_family(n, max_degree, seed, count)
        den = np.array([sobolev_norm(table, f, k, squared=True) for f in polys])
        for beta in betas:
            num = np.array([projection_derivative_norm(table, f, beta) for f in polys])
            ratios = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
            per = _cumulative(degree, ratios, max_degree)
            reports.append(BoundednessReport(
                table.domain.name, table.weight.label, k, beta,
                f"random-mixed(seed={seed},count={count})", tuple(per), per[-1][1],
                trend_of([s for _, s in per]), (int(np.argmax(ratios)),),
            ))
        return reports
    raise ValueError(f"unknown input family {family!r}")


def _random_family(n, max_degree, seed, count, terms=4):
    rng = np.random.default_rng(seed)
    by_degree = {d: [m for m in multi_indices(n, d) if sum(m) == d] for d in range(max_degree + 1)}
    polys, degree = [], []
    for d in range(max_degree + 1):
        lower = [m for e in range(d + 1) for m in by_degree[e]]
        top = by_degree[d]
        for _ in range(count):
            items = []
            for t in range(terms):
                # first term pins the degree at d
                p = top[rng.integers(len(top))] if t == 0 else lower[rng.integers(len(lower))]
                q = lower[rng.integers(len(lower))]
                if rng.random() < 0.5:
                    p, q = q, p
                c = complex(rng.standard_normal(), rng.standard_normal())
                items.append(((p, q), c))
            f = MonomialPolynomial.from_terms(n, items)
            polys.append(f)
            degree.append(max(max(sum(p), sum(q)) for p, q in f.terms))
    return polys, np.array(degree)


def boundedness_experiment(table: MomentTable, k: int, beta, max_degree: int,
                           family: str = "pure-monomials", seed: int | None = None,
                           count: int = 20) -> BoundednessReport:
    return boundedness_sweep(table, k, [beta], max_degree, family, seed, count)[0]


def betas_up_to(n: int, k: int) -> list[MultiIndex]:
    return list(multi_indices(n, k))
