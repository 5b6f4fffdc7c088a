"""Radial weights lambda(z) = f(-rho(z)) with f(x) = x^a exp(-b / x^c).

Evaluation happens in the log domain; ``exp`` is only taken at the public
boundary (``f_eval``, ``weight_eval``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from reinhardt.errors import GeometryError, WeightError
from reinhardt.geometry import RadialDomain

FAMILIES = ("constant-one", "power", "exponential", "power-exponential")


@dataclass(frozen=True)
class WeightSpec:
    family: str = "constant-one"
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    delta_claimed: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise WeightError(f"unknown weight family {self.family!r}")
        for name in ("a", "b", "c"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise WeightError(f"weight parameter {name} must be finite and >= 0, got {v}")
        if self.family == "constant-one" and (self.a or self.b or self.c):
            raise WeightError("constant-one takes no parameters")
        if self.family == "power" and (self.b or self.c):
            raise WeightError("power weight takes only a")
        if self.family == "exponential" and self.a:
            raise WeightError("exponential weight takes only b and c")
        if self.delta_claimed is not None and not self.delta_claimed > 0:
            raise WeightError("delta_claimed must be positive")

    @classmethod
    def power(cls, a: float) -> "WeightSpec":
        return cls("power", a=float(a))

    @classmethod
    def exponential(cls, b: float = 1.0, c: float = 1.0) -> "WeightSpec":
        return cls("exponential", b=float(b), c=float(c))

    @classmethod
    def power_exponential(cls, a: float, b: float, c: float) -> "WeightSpec":
        return cls("power-exponential", a=float(a), b=float(b), c=float(c))

    @property
    def is_power(self) -> bool:
        """True when f(x) = x^a exactly (constant-one is a = 0)."""
        return self.b == 0

    @property
    def label(self) -> str:
        if self.family == "constant-one":
            return "one"
        if self.family == "power":
            return f"pow{self.a:g}"
        if self.family == "exponential":
            return f"exp{self.b:g}_{self.c:g}"
        return f"powexp{self.a:g}_{self.b:g}_{self.c:g}"

    def log_f(self, x) -> np.ndarray:
        """log f(x) for x >= 0; -inf where f vanishes (x = 0 with a > 0 or b, c > 0)."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.zeros_like(x)
            if self.a:
                out = out + self.a * np.log(x)
            if self.b:
                if self.c:
                    out = out - self.b * np.power(x, -self.c)
                else:
                    out = out - self.b
        return np.where(np.isnan(out), -np.inf, out)

    def record(self) -> dict:
        rec = {"family": self.family}
        if self.family in ("power", "power-exponential"):
            rec["a"] = self.a
        if self.family in ("exponential", "power-exponential"):
            rec["b"] = self.b
            rec["c"] = self.c
        if self.delta_claimed is not None:
            rec["delta_claimed"] = self.delta_claimed
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "WeightSpec":
        rec = dict(rec)
        family = rec.pop("family", "constant-one")
        kw = {k: float(rec.pop(k)) for k in ("a", "b", "c", "delta_claimed") if k in rec}
        if rec:
            raise WeightError(f"unexpected weight fields: {sorted(rec)}")
        if family == "exponential":
            kw.setdefault("b", 1.0)
            kw.setdefault("c", 1.0)
        return cls(family, **kw)


def f_eval(weight: WeightSpec, x: float) -> float:
    if x < 0:
        raise WeightError("f is defined on [0, inf)")
    return float(np.exp(weight.log_f(x)))


def log_weight(weight: WeightSpec, domain: RadialDomain, r) -> np.ndarray:
    """log lambda(r) = log f(-rho(r)), vectorized; points outside give -inf."""
    depth = -domain.rho(r)
    inside = depth > 0
    return np.where(inside, weight.log_f(np.where(inside, depth, 1.0)), -np.inf)


def weight_eval(weight: WeightSpec, domain: RadialDomain, r) -> float:
    r = np.asarray(r, dtype=float).reshape(-1)
    if not domain.rho(r) < 0:
        raise GeometryError(f"point {tuple(r)} lies outside {domain.name}")
    return float(np.exp(log_weight(weight, domain, r)))


def log_midpoint_ratio(weight: WeightSpec, x, y) -> np.ndarray:
    """log of f((x+y)/2)^2 / (f(x) f(y))."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 2.0 * weight.log_f((x + y) / 2) - weight.log_f(x) - weight.log_f(y)


def estimate_delta(weight: WeightSpec, x_max: float, grid: int) -> float:
    """Minimum of the convexity ratio over the lattice {x_max * i / grid}^2, i = 1..grid."""
    if grid < 2:
        raise ValueError("grid must be >= 2")
    pts = x_max * np.arange(1, grid + 1) / grid
    lf = weight.log_f(pts)
    worst = np.inf
    for start in range(0, grid, 1024):
        xs = pts[start:start + 1024, None]
        mid = weight.log_f((xs + pts[None, :]) / 2)
        logs = 2.0 * mid - lf[start:start + 1024, None] - lf[None, :]
        worst = min(worst, float(np.min(logs)))
    return math.exp(worst)


@dataclass(frozen=True)
class WeightMidpointReport:
    min_ratio: float
    witness: Optional[tuple]
    passed: bool
    samples: int
    delta: float


def _sample_inside(domain, count, rng):
    out = []
    box = np.asarray(domain.radial_box)
    have = 0
    while have < count:
        cand = rng.uniform(0.0, 1.0, (2 * (count - have) + 16, domain.dimension)) * box
        cand = cand[domain.rho(cand) < 0]
        out.append(cand)
        have += len(cand)
    return np.concatenate(out)[:count]


def check_weight_midpoint(weight: WeightSpec, domain: RadialDomain, sample_count: int,
                          seed: int, delta: Optional[float] = None, tol: float = 1e-12
                          ) -> WeightMidpointReport:
    """Sampled minimum of lambda((x+y)/2)^2 / (lambda(x) lambda(y)) over the radial image.

    ``delta`` defaults to ``delta_claimed`` or, failing that, the lattice
    estimate on (0, depth]^2.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if delta is None:
        delta = weight.delta_claimed or estimate_delta(weight, domain.depth(), 256)
    rng = np.random.default_rng(seed)
    x = _sample_inside(domain, sample_count, rng)
    y = _sample_inside(domain, sample_count, rng)
    mid = (x + y) / 2
    logs = (2.0 * log_weight(weight, domain, mid) - log_weight(weight, domain, x)
            - log_weight(weight, domain, y))
    i = int(np.argmin(logs))
    worst = math.exp(float(logs[i]))
    passed = worst >= delta - tol
    witness = None if passed else (tuple(x[i]), tuple(y[i]))
    return WeightMidpointReport(worst, witness, passed, sample_count, float(delta))


def is_nondecreasing(weight: WeightSpec, x_max: float = 1.0, grid: int = 1000) -> bool:
    """Advisory monotonicity probe of f on (0, x_max]."""
    lf = weight.log_f(x_max * np.arange(1, grid + 1) / grid)
    return bool(np.all(np.diff(lf) >= -1e-12))
