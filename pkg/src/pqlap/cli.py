"""Command-line front end: ``pqlap <subcommand> [--config FILE] [--set key=value ...]``.

Every subcommand writes CSV (with a trailing ``# config_hash=...`` comment)
and/or JSON (sorted keys) into ``output_dir``. Exit codes: 0 success,
1 usage or configuration error, 2 solver non-convergence, 3 verification
failures present.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import re
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .curves import (
    CurvesContext,
    OptimBudget,
    beta_f_curve,
    beta_ps_bounds,
    beta_sup_f_curve,
    build_context,
    classify_region,
)
from .eigen import ConvergenceError, analytic_lambda_k, eigen_residual, first_eigenpair, pi_r
from .functionals import DomainError, Params
from .grid import Grid1D, GridFunction, SignClass
from .solve import (
    find_solutions,
    picone_classical_gap,
    picone_generalized_gap,
    tangency,
    tangency_residuals,
    verify_sign_theorems,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key or line."""


# --- configuration ---------------------------------------------------------------------

_DEFAULT_TOLERANCES = {"residual": 1e-9, "sigma": 1e-6, "picone": 1e-6, "tangency": 1e-9}


@dataclass(frozen=True)
class RunConfig:
    p: float
    q: float
    grid_n: int = 199
    f: str = "const:1"
    alpha_range: tuple = (0.0, 40.0, 20)
    beta_range: tuple = (0.0, 20.0, 20)
    alpha: float = 0.0
    beta: float = 0.0
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(_DEFAULT_TOLERANCES))
    output_dir: str = "out"
    starts: int = 16
    slope_range: tuple = (-60.0, 60.0)
    scan_count: int = 241
    delta: float = 0.5
    epsilon: float = 0.0
    solve: bool = True
    certificates: bool = False
    workers: int = 1
    H_range: tuple = (0.1, 10.0, 10)
    F_range: tuple = (0.1, 10.0, 10)
    pairs: int = 100

    def __post_init__(self):
        if not self.p > self.q > 1:
            raise ConfigError(f"p > q > 1 required (got p={self.p}, q={self.q})")
        if int(self.grid_n) != self.grid_n or self.grid_n < 3:
            raise ConfigError(f"grid_n >= 3 required (got {self.grid_n})")
        for name in ("alpha_range", "beta_range", "H_range", "F_range"):
            rng = getattr(self, name)
            if len(rng) != 3 or int(rng[2]) != rng[2] or rng[2] < 1:
                raise ConfigError(f"{name} must be [lo, hi, count] with count >= 1")
            if rng[0] > rng[1]:
                raise ConfigError(f"{name}: lo must not exceed hi")
        for name in ("H_range", "F_range"):
            if getattr(self, name)[0] <= 0:
                raise ConfigError(f"{name} must be positive")
        if len(self.slope_range) != 2 or not self.slope_range[0] < self.slope_range[1]:
            raise ConfigError("slope_range must be [lo, hi] with lo < hi")
        bad = [k for k, v in self.tolerances.items() if not v > 0]
        if bad:
            raise ConfigError(f"tolerances must be > 0: {', '.join(sorted(bad))}")
        unknown = set(self.tolerances) - set(_DEFAULT_TOLERANCES)
        if unknown:
            raise ConfigError(f"unknown tolerance key(s): {', '.join(sorted(unknown))}")
        for name in ("starts", "scan_count", "workers", "pairs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        parse_f_spec(self.f, Grid1D(int(self.grid_n)), check_only=True)

    @property
    def grid(self) -> Grid1D:
        return Grid1D(int(self.grid_n))

    def tol(self, name: str) -> float:
        return {**_DEFAULT_TOLERANCES, **self.tolerances}[name]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        d["tolerances"] = {**_DEFAULT_TOLERANCES, **self.tolerances}
        return d

    def config_hash(self) -> str:
        """Hash of everything that can change results (not where or how parallel)."""
        d = self.to_dict()
        del d["output_dir"], d["workers"]
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _line_of(text: str, key: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return None if m is None else text.count("\n", 0, m.start()) + 1


def _coerce(key: str, value):
    default = _FIELDS[key].default
    if key == "tolerances":
        if not isinstance(value, dict):
            raise ConfigError("tolerances must be an object")
        return {k: float(v) for k, v in value.items()}
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key} must be a list")
        return tuple(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key} must be true or false")
        return value
    if key in ("grid_n", "seed", "starts", "scan_count", "workers", "pairs"):
        if isinstance(value, bool) or int(value) != value:
            raise ConfigError(f"{key} must be an integer")
        return int(value)
    if key in ("f", "output_dir"):
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number")
    return float(value)


def config_from_dict(data: dict, text: str | None = None, source: str = "<config>") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    kwargs = {}
    for key, value in data.items():
        where = source
        if text is not None and (line := _line_of(text, key)) is not None:
            where = f"{source}:{line}"
        if key not in _FIELDS:
            raise ConfigError(f"{where}: unknown key '{key}'")
        try:
            kwargs[key] = _coerce(key, value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: key '{key}': {exc}") from None
    for key in ("p", "q"):
        if key not in kwargs:
            raise ConfigError(f"{source}: missing required key '{key}'")
    try:
        return RunConfig(**kwargs)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def read_config(path) -> tuple[dict, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def load_config(path) -> RunConfig:
    data, text = read_config(path)
    return config_from_dict(data, text, str(path))


def apply_overrides(data: dict, overrides) -> dict:
    """``key=value`` pairs; values are JSON when they parse, strings otherwise.

    ``tolerances.name=value`` sets a single tolerance.
    """
    data = json.loads(json.dumps(data))
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got '{item}'")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if key.startswith("tolerances."):
            data.setdefault("tolerances", {})[key.split(".", 1)[1]] = value
        else:
            data[key] = value
    return data


# --- source term -----------------------------------------------------------------------------

def parse_f_spec(spec: str, grid: Grid1D, check_only: bool = False) -> GridFunction | None:
    """``const:c`` | ``bump:center,width,height`` | ``file:path`` (JSON grid function or x,f CSV)."""
    kind, _, arg = spec.partition(":")
    try:
        if kind == "const":
            c = float(arg)
            return None if check_only else grid.constant(c)
        if kind == "bump":
            center, width, height = (float(t) for t in arg.split(","))
            if width <= 0:
                raise ConfigError("bump width must be positive")
            if check_only:
                return None
            r = (grid.x - center) / width
            inside = np.abs(r) < 1
            vals = np.zeros(grid.n)
            vals[inside] = height * np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
            return GridFunction(grid, vals)
        if kind == "file":
            if check_only:
                return None
            return _read_f_file(Path(arg), grid)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad f spec '{spec}': {exc}") from None
    raise ConfigError(f"bad f spec '{spec}': expected const:, bump: or file:")


def _read_f_file(path: Path, grid: Grid1D) -> GridFunction:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read source file ({exc.strerror})") from None
    if path.suffix == ".json":
        g = GridFunction.from_json(text)
        if g.grid != grid:
            raise ConfigError(f"{path}: source has n={g.grid.n}, config has grid_n={grid.n}")
        return g
    rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
    try:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    except ValueError:
        raise ConfigError(f"{path}: expected a header and two numeric columns x,f") from None
    return GridFunction(grid, np.interp(grid.x, data[:, 0], data[:, 1]))


# --- emission ------------------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path: Path, header, rows, config_hash: str) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    buf.write(f"# config_hash={config_hash}\r\n")
    return _write(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


def write_json(path: Path, payload) -> Path:
    return _write(path, json.dumps(_jsonable(payload), sort_keys=True, indent=2,
                                   ensure_ascii=False) + "\n")


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror}") from None
    return path


def _samples(rng) -> np.ndarray:
    lo, hi, count = rng
    return np.linspace(lo, hi, int(count)) if count > 1 else np.array([float(lo)])


def _budget(config: RunConfig) -> OptimBudget:
    return OptimBudget(starts=config.starts, seed=config.seed)


# --- subcommands -------------------------------------------------------------------------------------

def run_eigen(config: RunConfig) -> int:
    grid, out = config.grid, Path(config.output_dir)
    rows, pairs = [], {}
    for r in (config.p, config.q):
        pair = first_eigenpair(r, grid)
        exact = analytic_lambda_k(r, 1)
        pairs[r] = pair
        rows.append([r, 1, pair.lam, exact, abs(pair.lam - exact) / exact, pi_r(r),
                     pair.iterations, eigen_residual(pair)])
    h = config.config_hash()
    write_csv(out / "eigen.csv", ["r", "k", "lambda_discrete", "lambda_analytic", "rel_error",
                                  "pi_r", "iterations", "residual"], rows, h)
    php, phq = pairs[config.p].phi, pairs[config.q].phi
    write_csv(out / "eigenfunctions.csv", ["x", "phi_p", "phi_q"],
              zip(grid.x_full, php.full, phq.full), h)
    return EXIT_OK


def run_curves(config: RunConfig) -> int:
    grid, out = config.grid, Path(config.output_dir)
    f = parse_f_spec(config.f, grid)
    p, q = config.p, config.q
    alphas = [float(a) for a in _samples(config.alpha_range)]
    lam_p = first_eigenpair(p, grid).lam
    bf = beta_f_curve(alphas, p, q, f, grid, _budget(config))
    upper = [a for a in alphas if a >= lam_p]
    bsf = {pt.alpha: pt for pt in beta_sup_f_curve(upper, p, q, f, grid, _budget(config))}
    rows, certs = [], []
    for a, pt in zip(alphas, bf):
        sup_pt = bsf.get(a)
        lo_ps, hi_ps = beta_ps_bounds(a, p, q, grid) if a >= lam_p else (None, None)
        labels = ["beta_f:UpperBound"]
        if sup_pt is not None:
            labels += ["beta_supf:LowerBound", "beta_ps:LowerBound"]
        rows.append([a, pt.value, sup_pt.value if sup_pt else "", "" if lo_ps is None else lo_ps,
                     "" if hi_ps is None else hi_ps, ";".join(labels)])
        if config.certificates:
            certs.append({"alpha": a, "beta_f": {"value": pt.value, "u": pt.certificate.values.tolist()},
                          "beta_sup_f": None if sup_pt is None else
                          {"value": sup_pt.value, "u": sup_pt.certificate.values.tolist()}})
    h = config.config_hash()
    write_csv(out / "curves.csv", ["alpha", "beta_f_ub", "beta_supf_lb", "beta_ps_lb",
                                   "beta_ps_ub", "labels"], rows, h)
    if config.certificates:
        write_json(out / "certificates.json", {"config_hash": h, "grid_n": grid.n, "points": certs})
    return EXIT_OK


def run_solve(config: RunConfig) -> int:
    grid, out = config.grid, Path(config.output_dir)
    f = parse_f_spec(config.f, grid)
    params = Params(config.p, config.q, config.alpha, config.beta)
    sols = find_solutions(params, f, config.slope_range, config.scan_count, config.tol("residual"))
    h = config.config_hash()
    write_json(out / "solutions.json", {"config_hash": h, "count": len(sols),
                                        "solutions": [s.to_dict() for s in sols]})
    cols = [grid.x_full] + [s.u.full for s in sols]
    write_csv(out / "solutions.csv", ["x"] + [f"u{i}" for i in range(len(sols))], zip(*cols), h)
    return EXIT_OK


def _context(config: RunConfig, f: GridFunction) -> CurvesContext:
    return build_context(config.p, config.q, f, config.grid, _samples(config.alpha_range),
                         _budget(config), sigma_tol=config.tol("sigma"), epsilon=config.epsilon)


def run_verify(config: RunConfig) -> int:
    grid, out = config.grid, Path(config.output_dir)
    f = parse_f_spec(config.f, grid)
    ctx = _context(config, f)
    points = [(a, b) for a in _samples(config.alpha_range) for b in _samples(config.beta_range)]
    rows = verify_sign_theorems(points, f, ctx, delta=config.delta,
                                slope_range=config.slope_range, scan_count=config.scan_count)
    header = ["alpha", "beta", "theorem", "solutions", "checked", "violations", "passed"]
    write_csv(out / "verify.csv", header,
              ([r.alpha, r.beta, r.theorem, r.solutions, r.checked, r.violations, r.passed]
               for r in rows), config.config_hash())
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VERIFY


@dataclass(frozen=True)
class PhaseRow:
    alpha: float
    beta: float
    label: str
    solution_count: int
    sign_census: dict

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class PhaseDiagram:
    rows: tuple
    context: dict

    def to_dict(self) -> dict:
        return {"context": self.context, "rows": [r.to_dict() for r in self.rows]}


def _phase_point(args) -> PhaseRow:
    alpha, beta, ctx, f, config = args
    label = classify_region(alpha, beta, ctx).value
    census = {s.value: 0 for s in SignClass}
    count = 0
    if config.solve:
        sols = find_solutions(Params(config.p, config.q, alpha, beta), f, config.slope_range,
                              config.scan_count, config.tol("residual"))
        count = len(sols)
        for s, c in Counter(r.sign.value for r in sols).items():
            census[s] = c
    return PhaseRow(float(alpha), float(beta), label, count, census)


def run_phase(config: RunConfig) -> PhaseDiagram:
    """Label and (optionally) solve every (α, β) of the sweep grid; writes phase.csv/json."""
    grid, out = config.grid, Path(config.output_dir)
    f = parse_f_spec(config.f, grid)
    ctx = _context(config, f)
    tasks = [(float(a), float(b), ctx, f, config)
             for a in _samples(config.alpha_range) for b in _samples(config.beta_range)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_phase_point, tasks))
    else:
        rows = [_phase_point(t) for t in tasks]
    rows.sort(key=lambda r: (r.alpha, r.beta))
    diagram = PhaseDiagram(tuple(rows), ctx.to_dict())
    h = config.config_hash()
    signs = [s.value for s in SignClass]
    write_csv(out / "phase.csv", ["alpha", "beta", "label", "solution_count"] + signs,
              ([r.alpha, r.beta, r.label, r.solution_count] + [r.sign_census[s] for s in signs]
               for r in rows), h)
    write_json(out / "phase.json", {"config_hash": h, **diagram.to_dict()})
    return diagram


def run_picone(config: RunConfig) -> int:
    grid, out = config.grid, Path(config.output_dir)
    p, q = config.p, config.q
    rng = np.random.default_rng(config.seed)
    x = grid.x
    modes = np.sin(np.outer(np.arange(1, 6), np.pi * x))
    rows = []
    php, phq = first_eigenpair(p, grid).phi, first_eigenpair(q, grid).phi
    pairs = [("phi_p,phi_q", php, phq)]
    for i in range(config.pairs):
        u = GridFunction(grid, x * (1 - x) * np.exp(rng.normal(size=5) @ modes / 2))
        v = GridFunction(grid, x * (1 - x) * np.exp(rng.normal(size=5) @ modes / 2))
        pairs.append((f"random{i}", u, v))
    for name, u, v in pairs:
        rows.append([name, picone_classical_gap(u, v, p), picone_generalized_gap(u, v, p, q)])
    tol = config.tol("picone")
    write_csv(out / "picone.csv", ["pair", "classical_gap", "generalized_gap"], rows,
              config.config_hash())
    ok = all(r[1] >= -tol and r[2] >= -tol for r in rows)
    return EXIT_OK if ok else EXIT_VERIFY


def run_qscan(config: RunConfig) -> int:
    """Tangency closed forms and double-root residuals over the (H, F) grid."""
    out = Path(config.output_dir)
    p, q = config.p, config.q
    rows, worst = [], 0.0
    for H in _samples(config.H_range):
        for F in _samples(config.F_range):
            tp = tangency(H, F, p, q)
            rq, rqp = tangency_residuals(H, F, p, q)
            worst = max(worst, rq, rqp)
            rows.append([p, q, H, F, tp.t_star, tp.G_tilde, rq, rqp])
    write_csv(out / "qscan.csv", ["p", "q", "H", "F", "t_star", "G_tilde", "res_Q", "res_Qprime"],
              rows, config.config_hash())
    return EXIT_OK if worst <= config.tol("tangency") else EXIT_VERIFY


COMMANDS = {
    "eigen": run_eigen,
    "curves": run_curves,
    "solve": run_solve,
    "verify": run_verify,
    "phase": lambda c: (run_phase(c), EXIT_OK)[1],
    "picone": run_picone,
    "qscan": run_qscan,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pqlap", description="(p,q)-Laplacian numerical laboratory on (0, 1).")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key (repeatable; tolerances.NAME=VALUE for tolerances)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        data, text, source = {}, None, "<overrides>"
        if args.config:
            data, text = read_config(args.config)
            source = args.config
        config = config_from_dict(apply_overrides(data, args.set) if isinstance(data, dict) else data,
                                  text, source)
    except ConfigError as exc:
        print(f"pqlap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](config)
    except ConvergenceError as exc:
        print(f"pqlap: solver did not converge: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, DomainError) as exc:
        print(f"pqlap: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"pqlap: I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
