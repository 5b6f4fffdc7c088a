"""Convex Reinhardt domains described through their radial images.

A Reinhardt domain in C^n is determined by its radial image, the set of
modulus vectors ``r = (|z_1|, ..., |z_n|)``.  Every domain here carries an
explicit multi-radial convex defining function ``rho`` evaluated on moduli:
negative inside, zero on the boundary.

Supported families::

    ball               rho(r) = sum (r_i / R)^2 - 1
    polydisc           rho(r) = max (r_i / R_i)^2 - 1
    complex-ellipsoid  rho(r) = sum (r_i / R_i)^(2 p_i) - 1,  p_i >= 1
    custom             black-box vectorized rho plus a bounding box

The unit disc is ``ball`` with ``n = 1``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from reinhardt.errors import DimensionError, GeometryError

MultiIndex = tuple[int, ...]

FAMILIES = ("ball", "polydisc", "complex-ellipsoid", "custom")

CONVEXITY_TOL = 1e-12
GRID_RESOLUTION = 64
# cap on grid points in the deterministic scan; pairs grow as points**2
_GRID_POINT_CAP = 4096


def as_multi_index(values, n: Optional[int] = None) -> MultiIndex:
    """Validate and normalize a multi-index (ints accepted for n = 1)."""
    if isinstance(values, (int, np.integer)):
        values = (int(values),)
    idx = tuple(int(v) for v in values)
    if any(int(v) != v for v in values):
        raise DimensionError(f"multi-index entries must be integers: {values!r}")
    if any(v < 0 for v in idx):
        raise DimensionError(f"multi-index entries must be non-negative: {idx}")
    if n is not None and len(idx) != n:
        raise DimensionError(f"multi-index {idx} has length {len(idx)}, expected {n}")
    return idx


@dataclass(frozen=True)
class RadialDomain:
    name: str
    dimension: int
    family: str
    semi_axes: tuple[float, ...]
    exponents: tuple[float, ...] = ()
    radial_box: tuple[float, ...] = ()
    rho_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(
        default=None, compare=False, repr=False
    )

    def __post_init__(self):
        n = self.dimension
        if n < 1:
            raise GeometryError("dimension must be positive")
        if self.family not in FAMILIES:
            raise GeometryError(f"unknown domain family {self.family!r}")
        if len(self.semi_axes) != n:
            raise GeometryError(f"need {n} semi-axes, got {len(self.semi_axes)}")
        if not all(np.isfinite(a) and a > 0 for a in self.semi_axes):
            raise GeometryError("semi-axes must be finite and positive (bounded radial image)")
        if self.family == "complex-ellipsoid":
            if len(self.exponents) != n or any(p < 1 for p in self.exponents):
                raise GeometryError("complex-ellipsoid needs n exponents p_i >= 1")
        if self.family == "custom" and self.rho_fn is None:
            raise GeometryError("custom domain needs a rho evaluator")
        if not self.radial_box:
            object.__setattr__(self, "radial_box", tuple(float(a) for a in self.semi_axes))
        if self.rho(np.zeros(n)) >= 0:
            raise GeometryError("rho(0) must be negative (origin interior)")

    # -- evaluation -------------------------------------------------------

    def _check(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if r.ndim == 0 or r.shape[-1] != self.dimension:
            raise DimensionError(
                f"point of shape {r.shape} does not match dimension {self.dimension}"
            )
        return r

    def rho(self, r) -> np.ndarray:
        """Vectorized rho over the last axis of ``r``."""
        r = self._check(r)
        if self.family == "custom":
            return np.asarray(self.rho_fn(r), dtype=float)
        s = np.abs(r) / np.asarray(self.semi_axes)
        if self.family == "ball":
            return np.sum(s * s, axis=-1) - 1.0
        if self.family == "polydisc":
            return np.max(s * s, axis=-1) - 1.0
        return np.sum(s ** (2.0 * np.asarray(self.exponents)), axis=-1) - 1.0

    def depth(self) -> float:
        """max of -rho over the radial image.

        For the structured families this is -rho(0) = 1; custom domains use
        a grid scan of the bounding box.
        """
        if self.family != "custom":
            return 1.0
        pts = _box_grid(self.radial_box, 33)
        return float(max(-self.rho(np.zeros(self.dimension)), np.max(-self.rho(pts))))

    # -- nested quadrature support -----------------------------------------

    def breakpoints(self, outer: np.ndarray) -> np.ndarray:
        """Integration breakpoints for coordinate ``k = outer.shape[1]``.

        ``outer`` holds the already fixed coordinates r_0..r_{k-1}, one row per
        point.  Returns an (N, S+1) array; the slice of the radial image along
        coordinate k is [row[0], row[-1]] and the integrand is smooth between
        consecutive entries.
        """
        k = outer.shape[1]
        N = outer.shape[0]
        R = self.semi_axes[k]
        if self.family == "custom":
            raise GeometryError("custom domains have no structured limits")
        if self.family == "polydisc":
            if k == 0:
                m = np.zeros(N)
            else:
                m = np.max(outer / np.asarray(self.semi_axes[:k]), axis=1)
            kink = np.clip(m, 0.0, 1.0) * R
            return np.stack([np.zeros(N), kink, np.full(N, R)], axis=1)
        p = self.exponents if self.family == "complex-ellipsoid" else (1.0,) * self.dimension
        if k == 0:
            used = np.zeros(N)
        else:
            s = outer / np.asarray(self.semi_axes[:k])
            used = np.sum(s ** (2.0 * np.asarray(p[:k])), axis=1)
        rest = np.clip(1.0 - used, 0.0, None)
        return np.stack([np.zeros(N), R * rest ** (1.0 / (2.0 * p[k]))], axis=1)

    # -- descriptors -------------------------------------------------------

    def record(self) -> dict:
        """Tagged record used by config files and table headers."""
        if self.family == "custom":
            raise GeometryError("custom domains have no serializable record")
        rec = {"family": self.family, "dimension": self.dimension, "name": self.name}
        if self.family == "ball":
            rec["radius"] = self.semi_axes[0]
        elif self.family == "polydisc":
            rec["radii"] = list(self.semi_axes)
        else:
            rec["exponents"] = list(self.exponents)
            rec["semi_axes"] = list(self.semi_axes)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "RadialDomain":
        rec = dict(rec)
        family = rec.pop("family", None)
        n = rec.pop("dimension", None)
        name = rec.pop("name", None)
        try:
            if family in ("disc", "unit-disc"):
                dom = ball(1, rec.pop("radius", 1.0))
            elif family == "ball":
                dom = ball(int(n), float(rec.pop("radius", 1.0)))
            elif family == "polydisc":
                radii = rec.pop("radii", None)
                if radii is None:
                    radii = [1.0] * int(n)
                dom = polydisc(radii)
            elif family == "complex-ellipsoid":
                exps = rec.pop("exponents")
                axes = rec.pop("semi_axes", None) or [1.0] * len(exps)
                dom = complex_ellipsoid(exps, axes)
            else:
                raise GeometryError(f"unknown or non-serializable domain family {family!r}")
        except (KeyError, TypeError) as exc:
            raise GeometryError(f"malformed domain record: {exc}") from None
        if rec:
            raise GeometryError(f"unexpected domain fields: {sorted(rec)}")
        if n is not None and int(n) != dom.dimension:
            raise GeometryError(f"dimension {n} disagrees with parameters ({dom.dimension})")
        if name:
            dom = RadialDomain(name, dom.dimension, dom.family, dom.semi_axes,
                               dom.exponents, dom.radial_box)
        return dom

    @property
    def symmetric(self) -> bool:
        if self.family == "custom":
            return False
        axes_equal = len(set(self.semi_axes)) == 1
        if self.family == "complex-ellipsoid":
            return axes_equal and len(set(self.exponents)) == 1
        return axes_equal


def unit_disc() -> RadialDomain:
    return ball(1)


def ball(n: int, radius: float = 1.0) -> RadialDomain:
    name = "disc" if n == 1 else f"ball{n}"
    return RadialDomain(name, n, "ball", (float(radius),) * n)


def polydisc(radii: Sequence[float]) -> RadialDomain:
    radii = tuple(float(r) for r in radii)
    return RadialDomain(f"polydisc{len(radii)}", len(radii), "polydisc", radii)


def complex_ellipsoid(exponents: Sequence[float], semi_axes: Optional[Sequence[float]] = None
                      ) -> RadialDomain:
    exponents = tuple(float(p) for p in exponents)
    if semi_axes is None:
        semi_axes = (1.0,) * len(exponents)
    tag = "-".join(f"{p:g}" for p in exponents)
    return RadialDomain(f"ellipsoid[{tag}]", len(exponents), "complex-ellipsoid",
                        tuple(float(a) for a in semi_axes), exponents)


def custom_domain(name: str, rho: Callable[[np.ndarray], np.ndarray],
                  radial_box: Sequence[float]) -> RadialDomain:
    """Domain given by a vectorized ``rho`` on arrays of shape (..., n)."""
    box = tuple(float(b) for b in radial_box)
    return RadialDomain(name, len(box), "custom", box, (), box, rho)


def rho_eval(domain: RadialDomain, r) -> float:
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        r = r.reshape(1)
    if r.ndim != 1 or np.any(r < 0):
        raise DimensionError("expected a single point in the non-negative orthant")
    return float(domain.rho(r))


def contains(domain: RadialDomain, r) -> bool:
    return rho_eval(domain, r) < 0


@dataclass(frozen=True)
class ConvexityReport:
    max_excess: float
    witness: Optional[tuple[tuple[float, ...], tuple[float, ...]]]
    passed: bool
    samples: int


def _box_grid(box, resolution):
    axes = [np.linspace(0.0, b, resolution) for b in box]
    return np.array(list(itertools.product(*axes)))


def _midpoint_excess(domain, x, y):
    return domain.rho((x + y) / 2) - (domain.rho(x) + domain.rho(y)) / 2


def _report(domain, x, y, excess, tol, samples):
    i = int(np.argmax(excess))
    worst = float(excess[i])
    passed = worst <= tol
    witness = None if passed else (tuple(map(float, x[i])), tuple(map(float, y[i])))
    return ConvexityReport(worst, witness, passed, samples)


def check_midpoint_convexity(domain: RadialDomain, sample_count: int, seed: int,
                             tol: float = CONVEXITY_TOL) -> ConvexityReport:
    """Randomized midpoint-convexity check of rho over the radial box."""
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    rng = np.random.default_rng(seed)
    box = np.asarray(domain.radial_box)
    worst = None
    done = 0
    chunk = 200_000
    while done < sample_count:
        m = min(chunk, sample_count - done)
        x = rng.uniform(0.0, 1.0, (m, domain.dimension)) * box
        y = rng.uniform(0.0, 1.0, (m, domain.dimension)) * box
        rep = _report(domain, x, y, _midpoint_excess(domain, x, y), tol, m)
        if worst is None or rep.max_excess > worst.max_excess:
            worst = rep
        done += m
    return ConvexityReport(worst.max_excess, worst.witness, worst.passed, sample_count)


def grid_convexity_scan(domain: RadialDomain, resolution: int = GRID_RESOLUTION,
                        tol: float = CONVEXITY_TOL) -> ConvexityReport:
    """Deterministic midpoint check over all pairs of a regular grid on the box."""
    per_axis = resolution
    while per_axis ** domain.dimension > _GRID_POINT_CAP and per_axis > 2:
        per_axis -= 1
    pts = _box_grid(domain.radial_box, per_axis)
    rho_pts = domain.rho(pts)
    worst = None
    for start in range(0, len(pts), 256):
        x = pts[start:start + 256]
        xs = np.repeat(x, len(pts), axis=0)
        ys = np.tile(pts, (len(x), 1))
        excess = domain.rho((xs + ys) / 2) - (np.repeat(rho_pts[start:start + 256], len(pts))
                                              + np.tile(rho_pts, len(x))) / 2
        rep = _report(domain, xs, ys, excess, tol, len(xs))
        if worst is None or rep.max_excess > worst.max_excess:
            worst = rep
    return ConvexityReport(worst.max_excess, worst.witness, worst.passed, len(pts) ** 2)


def validate_domain(domain: RadialDomain, sample_count: int = 10_000, seed: int = 0
                    ) -> RadialDomain:
    """Raise GeometryError unless rho passes both convexity checks."""
    for rep in (check_midpoint_convexity(domain, sample_count, seed),
                grid_convexity_scan(domain)):
        if not rep.passed:
            raise GeometryError(
                f"rho of {domain.name!r} is not midpoint convex: excess {rep.max_excess:.3e} "
                f"at {rep.witness}"
            )
    return domain


def multi_indices(n: int, max_total: int):
    """All multi-indices of length n with |gamma| <= max_total, graded order."""
    for total in range(max_total + 1):
        for head in itertools.combinations(range(total + n - 1), n - 1):
            # stars and bars
            cuts = (-1,) + head + (total + n - 1,)
            yield tuple(cuts[i + 1] - cuts[i] - 1 for i in range(n))
