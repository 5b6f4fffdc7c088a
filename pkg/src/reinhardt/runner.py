"""Experiment configuration files and the batch runner.

Configuration grammar (YAML, ``version: 1``)::

    version: 1                      # required, must be 1
    domain:  {family: ball, dimension: 1}          # see RadialDomain.from_record
    weight:  {family: power, a: 2}                 # see WeightSpec.from_record
    max_degree: 60                  # table covers gamma_i <= max_degree
    tolerance: 1.0e-10              # relative quadrature tolerance
    table: quadrature               # or closed-form (power weights only)
    seed: 7                         # required by randomized experiments
    output: results/                # relative to the config file
    experiments:                    # run in order; each is a tagged record
      - {kind: moments}
      - {kind: verify-lemma, beta: [1], max_degree: 50}
      - {kind: verify-pl, triple: lemma-coeff, zeta: [1], eta: [2], grid: 2048, t: 0.5}
      - {kind: verify-pl, triple: gaussian, shift: 0.0}
      - {kind: verify-scalar, samples: 1000000}
      - {kind: mbeta-scan, beta: [1], alpha_max: 20}
      - {kind: project, input: [[[1], [1], 1.0, 0.0]]}
      - {kind: kernel-eval, j: 5, z: [[0.5, 0.0]], w: [[0.5, 0.0]]}
      - {kind: sobolev-bound, k: 1, beta: [1], max_degree: 20, family: pure-monomials}

Complex coordinates are ``[re, im]`` pairs or plain reals.  Polynomials are
lists of ``[p, q, re, im]`` records.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np
import scipy
import yaml

from reinhardt import __version__
from reinhardt.errors import (
    ConfigError,
    GeometryError,
    MomentRangeError,
    QuadratureError,
    ReinhardtError,
    TableFormatError,
    WeightError,
)
from reinhardt.geometry import RadialDomain, as_multi_index, validate_domain
from reinhardt.inequalities import (
    CSV_HEADER,
    lemma_coeff_bound,
    lemma_coeff_ratio,
    binomial_factor,
    run_pl_triple,
    scan_lemma_coeff,
    sweep_scalar_midpoint,
)
from reinhardt.moments import (
    DEFAULT_TOL,
    MomentTable,
    build_table,
    closed_form_table,
    load_table,
    save_table,
)
from reinhardt.operators import (
    MonomialPolynomial,
    TruncatedKernel,
    adjoint_identity_residual,
    kernel_eval,
    m_beta_norm_ratio,
    project,
)
from reinhardt.sobolev import boundedness_experiment
from reinhardt.weight import WeightSpec

CONFIG_VERSION = 1

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 1
EXIT_CONFIG = 2
EXIT_QUADRATURE = 3
EXIT_RANGE = 4
EXIT_TABLE_FILE = 5

KINDS = ("moments", "verify-pl", "verify-lemma", "verify-scalar", "mbeta-scan", "project",
         "kernel-eval", "sobolev-bound")


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, MomentRangeError):
        return EXIT_RANGE
    if isinstance(exc, QuadratureError):
        return EXIT_QUADRATURE
    if isinstance(exc, TableFormatError):
        return EXIT_TABLE_FILE
    return EXIT_CONFIG


# -- YAML with line numbers ------------------------------------------------------

class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    mapping = loader.construct_mapping(node, deep=True)
    mapping["__line__"] = node.start_mark.line + 1
    return mapping


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _strip(obj):
    if isinstance(obj, dict):
        return {k: _strip(v) for k, v in obj.items() if k != "__line__"}
    if isinstance(obj, list):
        return [_strip(v) for v in obj]
    return obj


@dataclass
class Experiment:
    kind: str
    params: dict
    line: int
    index: int

    @property
    def label(self) -> str:
        return f"experiment {self.index + 1} ({self.kind})"


@dataclass
class ExperimentConfig:
    domain: RadialDomain
    weight: WeightSpec
    max_degree: int
    tolerance: float
    experiments: list[Experiment]
    output: Path
    seed: int | None = None
    table_source: str = "quadrature"
    source: str = "<config>"
    raw: dict = field(default_factory=dict)

    def where(self, line) -> str:
        return f"{self.source}:{line}" if line else self.source


def _need(params, key, where, conv=None, default=...):
    if key not in params:
        if default is ...:
            raise ConfigError(f"{where}: missing field {key!r}")
        return default
    try:
        return conv(params[key]) if conv else params[key]
    except (TypeError, ValueError, ReinhardtError) as exc:
        raise ConfigError(f"{where}: bad value for {key!r}: {exc}") from None


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None
                 ) -> ExperimentConfig:
    try:
        data = yaml.load(text, Loader=_LineLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        pos = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        raise ConfigError(f"{pos}: {exc.problem}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: configuration must be a mapping")
    at = lambda node: f"{source}:{node.get('__line__', 1)}" if isinstance(node, dict) else source
    version = data.get("version")
    if version != CONFIG_VERSION:
        raise ConfigError(f"{at(data)}: unsupported config version {version!r} "
                          f"(expected {CONFIG_VERSION})")
    known = {"version", "domain", "weight", "max_degree", "tolerance", "experiments", "output",
             "seed", "table", "__line__"}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"{at(data)}: unknown top-level fields {extra}")
    dom_rec = data.get("domain")
    if not isinstance(dom_rec, dict):
        raise ConfigError(f"{at(data)}: 'domain' must be a mapping")
    try:
        domain = validate_domain(RadialDomain.from_record(_strip(dom_rec)))
    except (GeometryError, ValueError) as exc:
        raise ConfigError(f"{at(dom_rec)}: domain: {exc}") from None
    w_rec = data.get("weight", {"family": "constant-one"})
    if not isinstance(w_rec, dict):
        raise ConfigError(f"{at(data)}: 'weight' must be a mapping")
    try:
        weight = WeightSpec.from_record(_strip(w_rec))
    except (WeightError, ValueError, TypeError) as exc:
        raise ConfigError(f"{at(w_rec)}: weight: {exc}") from None
    where = at(data)
    max_degree = _need(data, "max_degree", where, int)
    if max_degree < 0:
        raise ConfigError(f"{where}: max_degree must be >= 0")
    tolerance = _need(data, "tolerance", where, float, DEFAULT_TOL)
    if not tolerance > 0:
        raise ConfigError(f"{where}: tolerance must be positive")
    seed = _need(data, "seed", where, int, None)
    table_source = _need(data, "table", where, str, "quadrature")
    if table_source not in ("quadrature", "closed-form"):
        raise ConfigError(f"{where}: table must be 'quadrature' or 'closed-form'")
    out = Path(_need(data, "output", where, str, "results"))
    if base_dir is not None and not out.is_absolute():
        out = base_dir / out
    exps_raw = data.get("experiments") or []
    if not isinstance(exps_raw, list):
        raise ConfigError(f"{where}: 'experiments' must be a list")
    experiments = []
    for i, rec in enumerate(exps_raw):
        if not isinstance(rec, dict) or "kind" not in rec:
            raise ConfigError(f"{at(rec) if isinstance(rec, dict) else where}: "
                              f"experiment {i + 1} needs a 'kind'")
        if rec["kind"] not in KINDS:
            raise ConfigError(f"{at(rec)}: unknown experiment kind {rec['kind']!r}")
        params = {k: v for k, v in _strip(rec).items() if k != "kind"}
        experiments.append(Experiment(rec["kind"], params, rec.get("__line__", 0), i))
    cfg = ExperimentConfig(domain, weight, max_degree, tolerance, experiments, out, seed,
                           table_source, source, _strip(data))
    for exp in experiments:
        _validate(cfg, exp)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(text, str(path), path.parent)


# -- validation of degree requirements --------------------------------------------

def _mi(n):
    return lambda v: as_multi_index(v, n)


def _complex_point(n):
    def conv(v):
        if not isinstance(v, list) or len(v) != n:
            raise ValueError(f"expected {n} coordinates")
        out = []
        for c in v:
            if isinstance(c, list):
                if len(c) != 2:
                    raise ValueError("complex coordinates are [re, im]")
                out.append(complex(float(c[0]), float(c[1])))
            else:
                out.append(complex(float(c)))
        return out
    return conv


def _validate(cfg: ExperimentConfig, exp: Experiment):
    """Type-check parameters and enforce degree requirements up front."""
    n = cfg.domain.dimension
    D = cfg.max_degree
    p = exp.params
    where = f"{cfg.where(exp.line)}: {exp.label}"

    def need_degree(d, what):
        if d > D:
            raise MomentRangeError(f"{where}: {what} needs degree {d} > max_degree {D}")

    def allowed(*keys):
        extra = sorted(set(p) - set(keys))
        if extra:
            raise ConfigError(f"{where}: unknown fields {extra}")

    k = exp.kind
    if k == "moments":
        allowed()
    elif k == "verify-lemma":
        allowed("beta", "max_degree")
        beta = _need(p, "beta", where, _mi(n))
        top = _need(p, "max_degree", where, int, D - 2 * max(beta))
        if top < 0:
            need_degree(2 * max(beta), "verify-lemma")
        need_degree(top + 2 * max(beta), "verify-lemma")
        p["beta"], p["max_degree"] = beta, top
    elif k == "mbeta-scan":
        allowed("beta", "alpha_max")
        beta = _need(p, "beta", where, _mi(n))
        top = _need(p, "alpha_max", where, int, D - 2 * max(beta))
        if top < 0:
            need_degree(2 * max(beta), "mbeta-scan")
        need_degree(top + 2 * max(beta), "mbeta-scan")
        p["beta"], p["alpha_max"] = beta, top
    elif k == "verify-pl":
        allowed("triple", "zeta", "eta", "grid", "t", "shift")
        triple = _need(p, "triple", where, str)
        if triple not in ("indicator", "gaussian", "lemma-coeff"):
            raise ConfigError(f"{where}: unknown triple {triple!r}")
        p["grid"] = _need(p, "grid", where, int, 2048)
        p["t"] = _need(p, "t", where, float, 0.5)
        p["shift"] = _need(p, "shift", where, float, 0.0)
        if triple == "lemma-coeff":
            p["zeta"] = _need(p, "zeta", where, _mi(n))
            p["eta"] = _need(p, "eta", where, _mi(n))
        if not 0 < p["t"] < 1 or p["grid"] < 2:
            raise ConfigError(f"{where}: need 0 < t < 1 and grid >= 2")
    elif k == "verify-scalar":
        allowed("samples", "u_max", "a_max", "b_max")
        p["samples"] = _need(p, "samples", where, int, 1_000_000)
        p["u_max"] = _need(p, "u_max", where, float, 10.0)
        p["a_max"] = _need(p, "a_max", where, int, 50)
        p["b_max"] = _need(p, "b_max", where, int, 5)
        if cfg.seed is None:
            raise ConfigError(f"{where}: randomized experiment requires a top-level seed")
    elif k == "project":
        allowed("input")
        poly = _need(p, "input", where, lambda v: MonomialPolynomial.from_records(v, n))
        need_degree(max((max(pp) for pp, _ in poly.terms), default=0), "project")
        p["input"] = poly
    elif k == "kernel-eval":
        allowed("j", "z", "w")
        j = _need(p, "j", where, int)
        need_degree(j, "kernel-eval")
        p["j"] = j
        p["z"] = _need(p, "z", where, _complex_point(n))
        p["w"] = _need(p, "w", where, _complex_point(n))
    elif k == "sobolev-bound":
        allowed("k", "beta", "max_degree", "family", "count")
        order = _need(p, "k", where, int)
        beta = _need(p, "beta", where, _mi(n))
        if sum(beta) > order:
            raise ConfigError(f"{where}: |beta| must not exceed k")
        family = _need(p, "family", where, str, "pure-monomials")
        if family not in ("pure-monomials", "random-mixed"):
            raise ConfigError(f"{where}: unknown input family {family!r}")
        if family == "random-mixed" and cfg.seed is None:
            raise ConfigError(f"{where}: randomized family requires a top-level seed")
        top = _need(p, "max_degree", where, int, D // 2)
        need_degree(2 * top, "sobolev-bound")
        p.update(k=order, beta=beta, family=family, max_degree=top,
                 count=_need(p, "count", where, int, 20))


# -- tables and caching -------------------------------------------------------------

def table_key(cfg: ExperimentConfig) -> dict:
    return {
        "domain": cfg.domain.record(),
        "weight": cfg.weight.record(),
        "max_degree": cfg.max_degree,
        "tolerance": cfg.tolerance,
        "source": cfg.table_source,
    }


def table_cache_path(cfg: ExperimentConfig) -> Path:
    digest = hashlib.sha256(json.dumps(table_key(cfg), sort_keys=True).encode()).hexdigest()
    return cfg.output / f"table-{digest[:16]}.txt"


def _make_table(cfg: ExperimentConfig) -> MomentTable:
    if cfg.table_source == "closed-form":
        try:
            return closed_form_table(cfg.domain, cfg.weight, cfg.max_degree)
        except ValueError as exc:
            raise ConfigError(f"{cfg.source}: {exc}") from None
    return build_table(cfg.domain, cfg.weight, cfg.max_degree, cfg.tolerance)


def obtain_table(cfg: ExperimentConfig, use_cache: bool = True) -> tuple[MomentTable, bool]:
    """Return (table, cache_hit); a fresh table is saved into the output directory."""
    path = table_cache_path(cfg)
    if use_cache and path.exists():
        table = load_table(path)
        if (table.domain.record() == cfg.domain.record() and table.weight == cfg.weight
                and table.max_degree == cfg.max_degree and table.tolerance == (
                    0.0 if cfg.table_source == "closed-form" else cfg.tolerance)):
            return table, True
    table = _make_table(cfg)
    if use_cache:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_table(table, path)
    return table, False


# -- experiments ----------------------------------------------------------------------

@dataclass
class Outcome:
    header: list
    rows: list
    passed: bool
    trailer: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        for line in self.trailer:
            buf.write(line + "\n")
        return buf.getvalue()


def _idx(m) -> str:
    return " ".join(map(str, m))


def _cplx(c: complex) -> str:
    return f"{c.real!r}{'+' if c.imag >= 0 else '-'}{abs(c.imag)!r}j"


def _run_moments(cfg, table, p):
    rows = [[_idx(g), repr(float(table.log_array[g])), repr(math.exp(table.log_array[g]))]
            for g in sorted(table.entries)]
    return Outcome(["gamma", "log_d2", "d2"], rows, True)


def _run_lemma(cfg, table, p):
    rep = scan_lemma_coeff(table, p["beta"], p["max_degree"])
    return Outcome(CSV_HEADER, [rep.csv_row()], rep.passed)


def _run_pl(cfg, table, p):
    rep = run_pl_triple(p["triple"], t=p["t"], grid=p["grid"], domain=cfg.domain,
                        weight=cfg.weight, zeta=p.get("zeta", 0), eta=p.get("eta", 0),
                        shift=p["shift"])
    return Outcome(CSV_HEADER, [rep.csv_row()], rep.passed, [f"# status={rep.status}"])


def _run_scalar(cfg, table, p):
    rep = sweep_scalar_midpoint(p["samples"], cfg.seed, p["u_max"], p["a_max"], p["b_max"])
    return Outcome(CSV_HEADER, [rep.csv_row()], rep.passed)


def _run_mbeta(cfg, table, p):
    import itertools

    beta = p["beta"]
    rows, ok = [], True
    for alpha in itertools.product(range(p["alpha_max"] + 1), repeat=table.dimension):
        bf = binomial_factor(alpha, beta)
        mr = lemma_coeff_ratio(table, alpha, beta)
        nr = m_beta_norm_ratio(table, alpha, beta)
        bound = bf * lemma_coeff_bound(beta)
        res = adjoint_identity_residual(table, alpha, beta)
        good = nr <= bound + 1e-6 and res <= 1e-12
        ok &= good
        rows.append([_idx(alpha), repr(bf), repr(mr), repr(nr), repr(bound), repr(res),
                     "pass" if good else "fail"])
    return Outcome(["alpha", "binomial_factor", "moment_ratio", "norm_ratio", "bound",
                    "adjoint_residual", "pass"], rows, ok)


def _run_project(cfg, table, p):
    out = project(table, p["input"])
    rows = [[_idx(pp), _idx(q), repr(c.real), repr(c.imag)]
            for (pp, q), c in sorted(out.terms.items())]
    return Outcome(["p", "q", "re", "im"], rows, True)


def _run_kernel(cfg, table, p):
    val = kernel_eval(TruncatedKernel(table, p["j"]), p["z"], p["w"])
    z = " ".join(_cplx(c) for c in p["z"])
    w = " ".join(_cplx(c) for c in p["w"])
    return Outcome(["j", "z", "w", "re", "im"], [[p["j"], z, w, repr(val.real), repr(val.imag)]],
                   True)


def _run_sobolev(cfg, table, p):
    rep = boundedness_experiment(table, p["k"], p["beta"], p["max_degree"], p["family"],
                                 cfg.seed, p["count"])
    return Outcome(["degree", "sup_ratio"], rep.csv_rows(), rep.passed, [rep.summary()])


_RUNNERS: dict[str, Callable] = {
    "moments": _run_moments,
    "verify-lemma": _run_lemma,
    "verify-pl": _run_pl,
    "verify-scalar": _run_scalar,
    "mbeta-scan": _run_mbeta,
    "project": _run_project,
    "kernel-eval": _run_kernel,
    "sobolev-bound": _run_sobolev,
}

NEEDS_TABLE = {"moments", "verify-lemma", "mbeta-scan", "project", "kernel-eval",
                "sobolev-bound"}


def execute(cfg: ExperimentConfig, table: MomentTable | None = None,
            use_cache: bool = True) -> tuple[list[tuple[Experiment, Outcome]], dict]:
    """Run every experiment in order; returns outcomes and table metadata."""
    info: dict[str, Any] = {"cache_hit": False, "table_file": None}
    if table is None and any(e.kind in NEEDS_TABLE for e in cfg.experiments):
        table, hit = obtain_table(cfg, use_cache)
        info.update(cache_hit=hit, table_file=str(table_cache_path(cfg)) if use_cache else None)
    if table is not None:
        info["provenance"] = table.provenance
    results = []
    for exp in cfg.experiments:
        results.append((exp, _RUNNERS[exp.kind](cfg, table, exp.params)))
    return results, info


def csv_name(exp: Experiment) -> str:
    return f"{exp.index + 1:02d}-{exp.kind}.csv"


def run(config_path, use_cache: bool = True) -> int:
    """Execute a config file; writes CSVs and manifest.json; returns the exit status."""
    start = time.time()
    cfg = load_config(config_path)
    return run_config(cfg, start=start, use_cache=use_cache)


def run_config(cfg: ExperimentConfig, table: MomentTable | None = None, start=None,
               use_cache: bool = True) -> int:
    start = start or time.time()
    cfg.output.mkdir(parents=True, exist_ok=True)
    results, info = execute(cfg, table, use_cache)
    files = []
    ok = True
    for exp, outcome in results:
        name = csv_name(exp)
        (cfg.output / name).write_text(outcome.to_csv(), encoding="utf-8")
        files.append({"experiment": exp.index + 1, "kind": exp.kind, "file": name,
                      "pass": outcome.passed})
        ok &= outcome.passed
    manifest = {
        "config": cfg.raw,
        "config_source": cfg.source,
        "versions": {"reinhardt": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "table": info,
        "outputs": files,
        "all_passed": ok,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(start)),
        "wall_time_s": time.time() - start,
    }
    (cfg.output / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n",
                                              encoding="utf-8")
    return EXIT_OK if ok else EXIT_VERIFICATION_FAILED
