"""Weighted monomial moments d_gamma^2 and immutable moment tables.

    d_gamma^2 = int_Omega |z^gamma|^2 lambda dV = (2 pi)^n int_R r^(2 gamma + 1) lambda(r) dr

where R is the radial image.  All values are stored as natural logs.

Structured families (ball, polydisc, complex ellipsoid) are integrated with
nested adaptive Gauss-Legendre quadrature: the slice of R along each
coordinate is read off from ``RadialDomain.breakpoints`` and each level
refines a shared mesh for a whole batch of outer points and exponents at
once.  Custom domains fall back to a midpoint rule on the indicator of
``rho < 0`` with Richardson-style refinement.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import gammaln

from reinhardt.errors import MomentRangeError, QuadratureError, TableFormatError
from reinhardt.geometry import MultiIndex, RadialDomain, as_multi_index
from reinhardt.weight import WeightSpec, log_weight

DEFAULT_TOL = 1e-10
FORMAT_VERSION = 1
LOG_CONVEXITY_TOL = 1e-9
UNDERFLOW = 1e-300

_GL_ORDER = 16
_GL_X, _GL_W = leggauss(_GL_ORDER)
_GL_X = (_GL_X + 1.0) / 2.0
_GL_W = _GL_W / 2.0
_MAX_ROUNDS = 60
_MAX_INTERVALS = 4000
_BLOCK_ELEMENTS = 2_000_000


# -- adaptive Gauss-Legendre on [0, 1] ------------------------------------

def _adaptive(evaluate, tol):
    """Globally adaptive bisection on [0, 1] for a vector-valued integrand.

    ``evaluate(a, b)`` takes arrays of interval endpoints (M,) and returns the
    Gauss-Legendre integrals over each, stacked as (M, ...).  Every entry of
    the result is held to relative error ``tol``; entries below the
    underflow floor count as zero.
    """
    a = np.array([0.0, 0.5])
    b = np.array([0.5, 1.0])
    whole = evaluate(np.array([0.0]), np.array([1.0]))[0]
    halves = evaluate(a, b)
    # active intervals: endpoints, own value, children values
    ends = np.array([[0.0, 1.0]])
    own = whole[None]
    kids = halves[None]
    for _ in range(_MAX_ROUNDS):
        best = kids.sum(axis=1)
        err = np.abs(own - best)
        total = best.sum(axis=0)
        scale = np.where(np.abs(total) > UNDERFLOW, np.abs(total), np.inf)
        scaled = (err / scale).reshape(len(ends), -1).max(axis=1)
        achieved = float(scaled.sum())
        if achieved <= tol:
            return total
        if len(ends) >= _MAX_INTERVALS:
            break
        refine = scaled > tol / len(ends)
        refine[np.argmax(scaled)] = True
        keep = ~refine
        lo, hi = ends[refine, 0], ends[refine, 1]
        mid = (lo + hi) / 2
        # children of the refined intervals become active; evaluate their halves
        new_ends = np.stack([np.concatenate([lo, mid]), np.concatenate([mid, hi])], axis=1)
        new_own = np.concatenate([kids[refine, 0], kids[refine, 1]])
        q = (new_ends[:, 0] + new_ends[:, 1]) / 2
        vals = evaluate(np.concatenate([new_ends[:, 0], q]), np.concatenate([q, new_ends[:, 1]]))
        m = len(new_ends)
        new_kids = np.stack([vals[:m], vals[m:]], axis=1)
        ends = np.concatenate([ends[keep], new_ends])
        own = np.concatenate([own[keep], new_own])
        kids = np.concatenate([kids[keep], new_kids])
    raise QuadratureError(
        f"adaptive quadrature stalled at relative error {achieved:.3e} (tol {tol:.1e})",
        achieved=achieved,
    )


def _nested_level(domain, weight, exps, k, outer, tol):
    """Integrate coordinates k..n-1 for every row of ``outer``.

    Returns shape (N, G_k, ..., G_{n-1}); entry [i, g_k, ...] is
    int prod_{j>=k} r_j^(2 g_j + 1) lambda(outer_i, r_k, ...) dr_k ... dr_{n-1}.
    """
    n = domain.dimension
    N = outer.shape[0]
    bp = domain.breakpoints(outer)
    lo = bp[:, :-1]
    width = np.diff(bp, axis=1)
    S = width.shape[1]
    powers = 2.0 * np.asarray(exps[k], dtype=float) + 1.0

    def evaluate_block(a, b):
        M = len(a)
        t = a[:, None] + (b - a)[:, None] * _GL_X[None, :]
        w = (b - a)[:, None] * _GL_W[None, :]
        # r_k on (M, N, S, m)
        rk = lo[None, :, :, None] + width[None, :, :, None] * t[:, None, None, :]
        jac = w[:, None, None, :] * width[None, :, :, None]
        pts = np.concatenate(
            [np.broadcast_to(outer[None, :, None, None, :], rk.shape + (k,)), rk[..., None]],
            axis=-1,
        ).reshape(-1, k + 1)
        with np.errstate(under="ignore"):
            radial = np.power(rk[..., None], powers)
        if k == n - 1:
            lam = np.exp(log_weight(weight, domain, pts)).reshape(rk.shape)
            return np.einsum("mnsi,mnsig->mng", jac * lam, radial)
        inner = _nested_level(domain, weight, exps, k + 1, pts, tol * 0.1)
        inner = inner.reshape(rk.shape + inner.shape[1:])
        return np.einsum("mnsi,mnsig,mnsi...->mng...", jac, radial, inner)

    per_interval = N * S * _GL_ORDER * int(np.prod([len(e) for e in exps[k:]]))
    chunk = max(1, _BLOCK_ELEMENTS // max(per_interval, 1))

    def evaluate(a, b):
        if len(a) <= chunk:
            return evaluate_block(a, b)
        return np.concatenate([evaluate_block(a[i:i + chunk], b[i:i + chunk])
                               for i in range(0, len(a), chunk)])

    return _adaptive(evaluate, tol)


def _structured_integrals(domain, weight, exps, tol):
    """(G_0, ..., G_{n-1}) array of radial integrals without the (2 pi)^n factor."""
    return _nested_level(domain, weight, exps, 0, np.zeros((1, 0)), tol)[0]


def _indicator_integrals(domain, weight, gammas, tol, max_level=None):
    """Midpoint rule on the indicator of rho < 0 over the radial box.

    Successive grids double the resolution; a first-order Richardson
    combination of the last two grids is returned once consecutive
    extrapolants agree to ``tol``.  The error estimate is heuristic.
    """
    n = domain.dimension
    if max_level is None:
        max_level = {1: 18, 2: 10}.get(n, 6)
    box = np.asarray(domain.radial_box)
    pw = np.array([[2 * g + 1 for g in gam] for gam in gammas], dtype=float)
    prev_sum = prev_rich = None
    achieved = np.inf
    for level in range(3, max_level + 1):
        m = 2 ** level
        axes = [(np.arange(m) + 0.5) * (bi / m) for bi in box]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        lam = np.exp(log_weight(weight, domain, grid))
        mask = lam > 0
        g, lam = grid[mask], lam[mask]
        cell = float(np.prod(box / m))
        with np.errstate(divide="ignore"):
            logr = np.log(g)
        sums = np.array([cell * np.sum(lam * np.exp(logr @ p)) for p in pw])
        if prev_sum is not None:
            rich = 2.0 * sums - prev_sum
            if prev_rich is not None:
                achieved = float(np.max(np.abs(rich - prev_rich) / np.abs(rich)))
                if achieved <= tol:
                    return rich, achieved
            prev_rich = rich
        prev_sum = sums
    raise QuadratureError(
        f"indicator quadrature did not reach tol {tol:.1e} (achieved {achieved:.3e})",
        achieved=achieved,
    )


def compute_moment(domain: RadialDomain, weight: WeightSpec, gamma, tol: float = DEFAULT_TOL
                   ) -> float:
    """log d_gamma^2 by quadrature; relative error on d_gamma^2 is at most about ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    gamma = as_multi_index(gamma, domain.dimension)
    n = domain.dimension
    if domain.family == "custom":
        vals, _ = _indicator_integrals(domain, weight, [gamma], tol)
        val = vals[0]
    else:
        val = float(_structured_integrals(domain, weight, [[g] for g in gamma], tol).reshape(-1)[0])
    if not val > 0:
        raise QuadratureError(f"moment {gamma} underflowed to {val}")
    return n * math.log(2 * math.pi) + math.log(val)


def closed_form_moment(domain: RadialDomain, weight: WeightSpec, gamma) -> float:
    """log d_gamma^2 for power weights f(x) = x^a via log-Gamma arithmetic.

    ball / complex ellipsoid (s_i = (r_i/R_i)^(2 p_i) maps R onto the simplex)::

        (2 pi)^n prod(R_i^(2 g_i + 2) / (2 p_i) Gamma(c_i)) Gamma(a+1) / Gamma(sum c_i + a + 1)
        with c_i = (g_i + 1) / p_i

    polydisc with rho = max (r_i/R_i)^2 - 1::

        pi^n prod(R_i^(2 g_i + 2) / (g_i + 1)) Gamma(|g| + n + 1) Gamma(a+1) / Gamma(|g| + n + a + 1)

    which is the product of disc moments when a = 0.
    """
    if domain.family == "custom" or not weight.is_power:
        raise ValueError(
            f"no closed form for {domain.family} domain with {weight.family} weight"
        )
    gamma = as_multi_index(gamma, domain.dimension)
    n = domain.dimension
    a = weight.a
    g = np.asarray(gamma, dtype=float)
    logR = np.log(np.asarray(domain.semi_axes))
    if domain.family == "polydisc":
        total = g.sum()
        return float(n * math.log(math.pi) + np.sum((2 * g + 2) * logR) - np.sum(np.log(g + 1))
                     + gammaln(total + n + 1) + gammaln(a + 1) - gammaln(total + n + a + 1))
    p = np.asarray(domain.exponents if domain.family == "complex-ellipsoid" else [1.0] * n)
    c = (g + 1) / p
    return float(n * math.log(2 * math.pi)
                 + np.sum((2 * g + 2) * logR - np.log(2 * p) + gammaln(c))
                 + gammaln(a + 1) - gammaln(c.sum() + a + 1))


# -- tables ---------------------------------------------------------------

def _gammas(n, max_degree):
    return list(itertools.product(range(max_degree + 1), repeat=n))


@dataclass(frozen=True)
class MomentTable:
    """Immutable map MultiIndex -> log d_gamma^2 for all gamma with gamma_i <= max_degree."""

    domain: RadialDomain
    weight: WeightSpec
    max_degree: int
    entries: Mapping[MultiIndex, float]
    tolerance: float
    provenance: str
    origin: str = ""
    error_estimate: float = 0.0
    log_array: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.domain.dimension
        shape = (self.max_degree + 1,) * n
        arr = np.empty(shape)
        missing = None
        for gamma in _gammas(n, self.max_degree):
            if gamma not in self.entries:
                missing = gamma
                break
            arr[gamma] = self.entries[gamma]
        if missing is not None:
            raise MomentRangeError(f"moment table is missing entry {missing}")
        if len(self.entries) != arr.size:
            raise TableFormatError(f"table has {len(self.entries)} entries, expected {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise QuadratureError("moment table contains a non-positive d_gamma^2")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))
        object.__setattr__(self, "log_array", arr)

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    def covers(self, gamma) -> bool:
        gamma = as_multi_index(gamma, self.dimension)
        return max(gamma, default=0) <= self.max_degree

    def require(self, degree: int, what: str = "operation"):
        if degree > self.max_degree:
            raise MomentRangeError(
                f"{what} needs moments up to degree {degree}; table max_degree is {self.max_degree}"
            )

    def log_d2(self, gamma) -> float:
        gamma = as_multi_index(gamma, self.dimension)
        if max(gamma, default=0) > self.max_degree:
            raise MomentRangeError(
                f"gamma={gamma} outside table range (max_degree {self.max_degree})"
            )
        return float(self.log_array[gamma])

    def d2(self, gamma) -> float:
        return math.exp(self.log_d2(gamma))

    def key(self) -> dict:
        """Metadata identifying the table for caching."""
        return {
            "domain": self.domain.record(),
            "weight": self.weight.record(),
            "max_degree": self.max_degree,
            "tolerance": self.tolerance,
        }


def log_convexity_violation(table: MomentTable) -> tuple[float, tuple | None]:
    """Largest 2 L(alpha+beta) - L(alpha) - L(alpha+2 beta) over the table, beta != 0."""
    L = table.log_array
    D = table.max_degree
    n = table.dimension
    worst, where = -np.inf, None
    for beta in itertools.product(range(D // 2 + 1), repeat=n):
        if not any(beta):
            continue
        lim = [D - 2 * b for b in beta]
        a0 = tuple(slice(0, m + 1) for m in lim)
        a1 = tuple(slice(b, b + m + 1) for b, m in zip(beta, lim))
        a2 = tuple(slice(2 * b, 2 * b + m + 1) for b, m in zip(beta, lim))
        excess = 2 * L[a1] - L[a0] - L[a2]
        i = np.unravel_index(int(np.argmax(excess)), excess.shape)
        if excess[i] > worst:
            worst, where = float(excess[i]), (tuple(int(v) for v in i), beta)
    return worst, where


def _finish_table(domain, weight, max_degree, logs, tol, provenance, err=0.0):
    table = MomentTable(domain, weight, max_degree, logs, tol, provenance, provenance, err)
    worst, where = log_convexity_violation(table)
    if worst > LOG_CONVEXITY_TOL:
        raise QuadratureError(
            f"table violates directional log-convexity by {worst:.3e} at alpha, beta = {where}"
        )
    return table


def build_table(domain: RadialDomain, weight: WeightSpec, max_degree: int,
                tol: float = DEFAULT_TOL) -> MomentTable:
    """Quadrature table of log d_gamma^2 for every gamma with gamma_i <= max_degree.

    For structured families all entries share one nested quadrature pass
    (vectorized over exponents); the mesh is refined until every entry meets
    ``tol``.
    """
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    n = domain.dimension
    base = n * math.log(2 * math.pi)
    gammas = _gammas(n, max_degree)
    if domain.family == "custom":
        vals, err = _indicator_integrals(domain, weight, gammas, tol)
        provenance = "quadrature-indicator"
        flat = dict(zip(gammas, vals))
    else:
        exps = [list(range(max_degree + 1))] * n
        try:
            arr = _structured_integrals(domain, weight, exps, tol)
        except QuadratureError as exc:
            raise QuadratureError(f"building {domain.name}/{weight.label} table: {exc}",
                                  achieved=exc.achieved) from None
        flat = {gamma: float(arr[gamma]) for gamma in gammas}
        provenance, err = "quadrature", tol
    bad = [gam for gam, v in flat.items() if not v > 0]
    if bad:
        raise QuadratureError(f"moment d^2 at gamma={bad[0]} underflowed to zero")
    logs = {gam: base + math.log(v) for gam, v in flat.items()}
    return _finish_table(domain, weight, max_degree, logs, tol, provenance, err)


def closed_form_table(domain: RadialDomain, weight: WeightSpec, max_degree: int) -> MomentTable:
    logs = {gam: closed_form_moment(domain, weight, gam)
            for gam in _gammas(domain.dimension, max_degree)}
    return _finish_table(domain, weight, max_degree, logs, 0.0, "closed-form")


# -- persistence ----------------------------------------------------------

_MAGIC = "reinhardt-moment-table"
_HEADER_KEYS = ("format_version", "domain", "weight", "max_degree", "tolerance",
                "provenance", "error_estimate", "entries")


def save_table(table: MomentTable, path) -> None:
    """Write the table as UTF-8 text; log values are stored as hexadecimal floats."""
    head = {
        "format_version": str(FORMAT_VERSION),
        "domain": json.dumps(table.domain.record(), sort_keys=True),
        "weight": json.dumps(table.weight.record(), sort_keys=True),
        "max_degree": str(table.max_degree),
        "tolerance": repr(table.tolerance),
        "provenance": table.origin or table.provenance,
        "error_estimate": repr(table.error_estimate),
        "entries": str(len(table.entries)),
    }
    lines = [_MAGIC] + [f"{k}: {head[k]}" for k in _HEADER_KEYS]
    for gamma in _gammas(table.dimension, table.max_degree):
        lines.append(" ".join(map(str, gamma)) + " " + float.hex(table.log_array[gamma]))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_table(path) -> MomentTable:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or text[0] != _MAGIC:
        raise TableFormatError(f"{path}: not a moment table file")
    head = {}
    for lineno, key in enumerate(_HEADER_KEYS, start=2):
        if lineno - 1 >= len(text):
            raise TableFormatError(f"{path}:{lineno}: truncated header")
        k, sep, v = text[lineno - 1].partition(": ")
        if k != key or not sep:
            raise TableFormatError(f"{path}:{lineno}: expected header field {key!r}")
        head[k] = v
    if head["format_version"] != str(FORMAT_VERSION):
        raise TableFormatError(
            f"{path}: format version mismatch (file {head['format_version']}, "
            f"supported {FORMAT_VERSION})"
        )
    try:
        domain = RadialDomain.from_record(json.loads(head["domain"]))
        weight = WeightSpec.from_record(json.loads(head["weight"]))
        max_degree = int(head["max_degree"])
        tolerance = float(head["tolerance"])
        error_estimate = float(head["error_estimate"])
        count = int(head["entries"])
    except (ValueError, json.JSONDecodeError) as exc:
        raise TableFormatError(f"{path}: malformed header: {exc}") from None
    n = domain.dimension
    body = text[len(_HEADER_KEYS) + 1:]
    if len(body) != count:
        raise TableFormatError(f"{path}: header declares {count} entries, found {len(body)}")
    entries = {}
    for lineno, line in enumerate(body, start=len(_HEADER_KEYS) + 2):
        parts = line.split()
        try:
            gamma = tuple(int(v) for v in parts[:-1])
            value = float.fromhex(parts[-1])
        except (ValueError, IndexError):
            raise TableFormatError(f"{path}:{lineno}: malformed record {line!r}") from None
        if len(gamma) != n:
            raise TableFormatError(f"{path}:{lineno}: record has {len(gamma)} indices, expected {n}")
        if gamma in entries:
            raise TableFormatError(f"{path}:{lineno}: duplicate entry {gamma}")
        entries[gamma] = value
    for gamma in _gammas(n, max_degree):
        if gamma not in entries:
            raise TableFormatError(f"{path}: missing entry for gamma={gamma}")
    if len(entries) != (max_degree + 1) ** n:
        raise TableFormatError(f"{path}: entries outside the declared max_degree")
    return MomentTable(domain, weight, max_degree, entries, tolerance, "loaded-from-file",
                       head["provenance"], error_estimate)
