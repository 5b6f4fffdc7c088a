"""Mixed monomial polynomials and the operators acting on them.

A ``MonomialPolynomial`` is a finite sum  sum c_{p,q} z^p zbar^q.  On a
Reinhardt domain with a multi-radial weight the monomials are orthogonal in
the sense

    <z^p zbar^q, z^s zbar^t>_lambda = d_{p+t}^2   if p + t == q + s, else 0,

so every operator here (projection, truncation, M_beta, inner products) is
computed exactly from a ``MomentTable``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from reinhardt.errors import DimensionError, ReinhardtError
from reinhardt.geometry import MultiIndex, as_multi_index, multi_indices
from reinhardt.inequalities import binomial_factor, lemma_coeff_ratio, log_binomial_factor
from reinhardt.moments import MomentTable

Term = tuple[MultiIndex, MultiIndex]


class NotHolomorphicError(ReinhardtError, ValueError):
    pass


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def _geq(a, b):
    return all(x >= y for x, y in zip(a, b))


@dataclass(frozen=True)
class MonomialPolynomial:
    dimension: int
    terms: Mapping[Term, complex]

    def __post_init__(self):
        clean = {}
        for (p, q), c in self.terms.items():
            key = (as_multi_index(p, self.dimension), as_multi_index(q, self.dimension))
            c = complex(c)
            if c != 0:
                clean[key] = clean.get(key, 0) + c
        clean = {k: v for k, v in clean.items() if v != 0}
        object.__setattr__(self, "terms", MappingProxyType(clean))

    # -- construction -----------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "MonomialPolynomial":
        return cls(n, {})

    @classmethod
    def monomial(cls, p, q=None, coef: complex = 1.0, n: int | None = None
                 ) -> "MonomialPolynomial":
        p = as_multi_index(p, n)
        q = as_multi_index(q if q is not None else (0,) * len(p), len(p))
        return cls(len(p), {(p, q): coef})

    @classmethod
    def from_terms(cls, n: int, items: Iterable[tuple[Term, complex]]) -> "MonomialPolynomial":
        acc: dict = defaultdict(complex)
        for key, c in items:
            acc[key] += c
        return cls(n, acc)

    @classmethod
    def from_records(cls, records, n: int | None = None) -> "MonomialPolynomial":
        """Build from ``[(p, q, re, im), ...]`` records (ints allowed for n = 1)."""
        acc: dict = defaultdict(complex)
        for rec in records:
            if len(rec) != 4:
                raise DimensionError(f"polynomial record needs (p, q, re, im), got {rec!r}")
            p, q, re, im = rec
            p = as_multi_index(p, n)
            n = len(p)
            acc[(p, as_multi_index(q, n))] += complex(float(re), float(im))
        if n is None:
            raise DimensionError("empty polynomial record list needs an explicit dimension")
        return cls(n, acc)

    def to_records(self) -> list:
        return [[list(p), list(q), c.real, c.imag] for (p, q), c in sorted(self.terms.items())]

    # -- algebra ----------------------------------------------------------

    def __add__(self, other: "MonomialPolynomial") -> "MonomialPolynomial":
        if other.dimension != self.dimension:
            raise DimensionError("dimension mismatch")
        return MonomialPolynomial.from_terms(
            self.dimension, list(self.terms.items()) + list(other.terms.items()))

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, c: complex) -> "MonomialPolynomial":
        return MonomialPolynomial(self.dimension, {k: c * v for k, v in self.terms.items()})

    __rmul__ = __mul__

    def __len__(self):
        return len(self.terms)

    @property
    def is_holomorphic(self) -> bool:
        return all(not any(q) for _, q in self.terms)

    @property
    def degree(self) -> int:
        """Largest total holomorphic degree |p|."""
        return max((sum(p) for p, _ in self.terms), default=0)

    @property
    def max_index(self) -> int:
        """Largest component of p + q; the moment range its norms need."""
        return max((max(_add(p, q)) for p, q in self.terms), default=0)

    def evaluate(self, z) -> complex:
        z = np.asarray(z, dtype=complex).reshape(-1)
        if len(z) != self.dimension:
            raise DimensionError("point dimension mismatch")
        zc = np.conj(z)
        return complex(sum(c * np.prod(z ** np.array(p)) * np.prod(zc ** np.array(q))
                           for (p, q), c in self.terms.items()))

    def allclose(self, other: "MonomialPolynomial", rtol: float = 1e-12) -> bool:
        keys = set(self.terms) | set(other.terms)
        scale = max([abs(v) for v in self.terms.values()] + [abs(v) for v in other.terms.values()]
                    + [0.0])
        return all(abs(self.terms.get(k, 0) - other.terms.get(k, 0)) <= rtol * scale
                   for k in keys)


def _require_holomorphic(poly: MonomialPolynomial, what: str):
    if not poly.is_holomorphic:
        raise NotHolomorphicError(f"{what} is defined on holomorphic polynomials only")


def _fsum_complex(values) -> complex:
    values = sorted(values, key=abs)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


# -- kernel ---------------------------------------------------------------

@dataclass(frozen=True)
class TruncatedKernel:
    table: MomentTable
    degree: int

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("kernel degree must be >= 0")
        self.table.require(self.degree, "truncated kernel")


def kernel_eval(kernel: TruncatedKernel, z, w) -> complex:
    """sum_{|gamma| <= j} z^gamma conj(w)^gamma / d_gamma^2."""
    table = kernel.table
    n = table.dimension
    z = np.asarray(z, dtype=complex).reshape(-1)
    w = np.asarray(w, dtype=complex).reshape(-1)
    if len(z) != n or len(w) != n:
        raise DimensionError(f"kernel points must have dimension {n}")
    zw = z * np.conj(w)
    terms = [complex(np.prod(zw ** np.array(g))) / math.exp(table.log_array[g])
             for g in multi_indices(n, kernel.degree)]
    return _fsum_complex(terms)


# -- basic operators -----------------------------------------------------------

def truncate(poly: MonomialPolynomial, j: int) -> MonomialPolynomial:
    _require_holomorphic(poly, "truncation")
    return MonomialPolynomial(poly.dimension,
                              {k: c for k, c in poly.terms.items() if sum(k[0]) <= j})


def inner_product(table: MomentTable, u: MonomialPolynomial, v: MonomialPolynomial) -> complex:
    """<u, v>_lambda, linear in u and conjugate-linear in v."""
    if u.dimension != table.dimension or v.dimension != table.dimension:
        raise DimensionError("polynomial and table dimensions differ")
    by_shift = defaultdict(list)
    for (s, t), e in v.terms.items():
        by_shift[tuple(x - y for x, y in zip(s, t))].append((t, e))
    parts = []
    for (p, q), c in u.terms.items():
        # need p + t == q + s, i.e. s - t == p - q
        for t, e in by_shift.get(tuple(x - y for x, y in zip(p, q)), ()):
            parts.append(c * e.conjugate() * math.exp(table.log_d2(_add(p, t))))
    return _fsum_complex(parts)


def norm_sq(table: MomentTable, poly: MonomialPolynomial) -> float:
    return inner_product(table, poly, poly).real


def project(table: MomentTable, poly: MonomialPolynomial) -> MonomialPolynomial:
    """Weighted Bergman projection: z^p zbar^q -> (d_p^2 / d_{p-q}^2) z^(p-q) if p >= q, else 0."""
    n = poly.dimension
    zero = (0,) * n
    items = []
    for (p, q), c in poly.terms.items():
        if _geq(p, q):
            m = _sub(p, q)
            items.append(((m, zero), c * math.exp(table.log_d2(p) - table.log_d2(m))))
    return MonomialPolynomial.from_terms(n, items)


def falling(p: MultiIndex, k: MultiIndex) -> int:
    """prod p_i! / (p_i - k_i)!, zero if some k_i > p_i."""
    return math.prod(math.perm(a, b) for a, b in zip(p, k))


def derivative(poly: MonomialPolynomial, beta, bar_beta=None) -> MonomialPolynomial:
    """Exact d^beta/dz^beta d^bar_beta/dzbar^bar_beta, term by term."""
    n = poly.dimension
    beta = as_multi_index(beta, n)
    bar_beta = as_multi_index(bar_beta if bar_beta is not None else (0,) * n, n)
    items = []
    for (p, q), c in poly.terms.items():
        if _geq(p, beta) and _geq(q, bar_beta):
            coef = falling(p, beta) * falling(q, bar_beta)
            items.append(((_sub(p, beta), _sub(q, bar_beta)), c * coef))
    return MonomialPolynomial.from_terms(n, items)


# -- M_beta ---------------------------------------------------------------

def m_beta_log_coefficient(table: MomentTable, alpha, beta) -> float:
    """log of (alpha+beta)!^2 / (alpha! (alpha+2beta)!) * d_alpha^2 / d_{alpha+beta}^2."""
    return (log_binomial_factor(alpha, beta) + table.log_d2(alpha)
            - table.log_d2(_add(alpha, beta)))


def m_beta_apply(table: MomentTable, beta, poly: MonomialPolynomial) -> MonomialPolynomial:
    """M_beta(z^alpha) = coefficient * z^(alpha + 2 beta), extended linearly."""
    _require_holomorphic(poly, "M_beta")
    n = poly.dimension
    beta = as_multi_index(beta, n)
    if not any(beta):
        return poly
    zero = (0,) * n
    two_beta = tuple(2 * b for b in beta)
    items = []
    for (alpha, _), c in poly.terms.items():
        table.log_d2(_add(alpha, two_beta))  # range check on the output index
        coef = math.exp(m_beta_log_coefficient(table, alpha, beta))
        items.append(((_add(alpha, two_beta), zero), c * coef))
    return MonomialPolynomial.from_terms(n, items)


def m_beta_norm_ratio(table: MomentTable, alpha, beta) -> float:
    """||M_beta z^alpha|| / ||z^alpha|| = binomial factor * moment ratio."""
    return binomial_factor(alpha, beta) * lemma_coeff_ratio(table, alpha, beta)


def adjoint_residual(table: MomentTable, h: MonomialPolynomial, g: MonomialPolynomial,
                     beta) -> float:
    """Relative gap between <h, d^beta g> and <d^beta M_beta h, g>; 0 when both vanish."""
    lhs = inner_product(table, h, derivative(g, beta))
    rhs = inner_product(table, derivative(m_beta_apply(table, beta, h), beta), g)
    if lhs == 0:
        return abs(rhs)
    return abs(lhs - rhs) / abs(lhs)


def adjoint_identity_residual(table: MomentTable, alpha, beta) -> float:
    n = table.dimension
    alpha = as_multi_index(alpha, n)
    beta = as_multi_index(beta, n)
    h = MonomialPolynomial.monomial(alpha)
    g = MonomialPolynomial.monomial(_add(alpha, beta))
    return adjoint_residual(table, h, g, beta)


def projection_by_inner_products(table: MomentTable, poly: MonomialPolynomial
                                 ) -> MonomialPolynomial:
    """Reference projection: sum over m of <f, z^m>_lambda / d_m^2 z^m, m up to the table range."""
    n = poly.dimension
    zero = (0,) * n
    items = []
    top = max((sum(p) for p, _ in poly.terms), default=0)
    for m in multi_indices(n, top):
        if max(m, default=0) > table.max_degree:
            continue
        c = inner_product(table, poly, MonomialPolynomial.monomial(m))
        if c != 0:
            items.append(((m, zero), c / math.exp(table.log_d2(m))))
    return MonomialPolynomial.from_terms(n, items)
