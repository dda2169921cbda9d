"""Command line entry point: ``bgforms compute | verify | curvature``.

Exit codes: 0 success, 1 configuration error, 2 numerical guard tripped,
3 verification identity failed.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import solver as _solver
from .curvature import TrigExpression, compute_curvature, conformal_metric, fd_ricci_check
from .exterior import Metric, exterior_derivative
from .fields import FormField, TorusGrid, multi_index_position, quadrature_inner, random_lowfreq_form, read_fbin, write_fbin
from .solver import Geometry, NumericalGuardError, extract_absolute, extract_relative, operator_Gk
from .verification import SUITES, run_suite, write_report

EXIT_OK, EXIT_CONFIG, EXIT_GUARD, EXIT_VERIFY = 0, 1, 2, 3

OPERATORS = ("L", "G", "Q", "B", "C", "D", "Bp", "Dp")


class ConfigError(ValueError):
    pass


@dataclass
class ScenarioConfig:
    """Parsed scenario.  See the README for the file layout."""

    n: int
    sizes: tuple
    k: int
    operator: str
    metric: str = "flat"
    phi: list = field(default_factory=list)
    ell: int | None = None
    input: dict = field(default_factory=lambda: {"type": "random", "seed": 0, "max_mode": 2})
    output: dict = field(default_factory=dict)
    tolerance: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a mapping")
        try:
            n = int(raw["n"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("missing or invalid 'n'") from None
        grid = raw.get("grid", {})
        sizes = grid.get("sizes") if isinstance(grid, dict) else grid
        if sizes is None:
            raise ConfigError("missing 'grid.sizes'")
        metric = raw.get("metric", {"type": "flat"})
        if isinstance(metric, str):
            metric = {"type": metric}
        cfg = cls(
            n=n,
            sizes=tuple(int(s) for s in sizes),
            k=int(raw.get("k", -1)),
            operator=str(raw.get("operator", "")),
            metric=str(metric.get("type", "flat")),
            phi=list(metric.get("phi", []) or []),
            ell=None if raw.get("ell") is None else int(raw["ell"]),
            input=dict(raw.get("input", {"type": "random", "seed": 0, "max_mode": 2})),
            output=dict(raw.get("output", {}) or {}),
            tolerance=dict(raw.get("tolerance", {}) or {}),
        )
        cfg.validate()
        return cfg

    def validate(self, need_operator: bool = True) -> None:
        n = self.n
        if n not in (4, 6):
            raise ConfigError(f"n must be 4 or 6, got {n}")
        if len(self.sizes) != n:
            raise ConfigError(f"grid.sizes must have {n} entries")
        for s in self.sizes:
            if s < 4 or s & (s - 1):
                raise ConfigError(f"grid sizes must be powers of two >= 4, got {s}")
        if self.metric not in ("flat", "conformal"):
            raise ConfigError(f"metric.type must be 'flat' or 'conformal', got {self.metric!r}")
        if self.metric == "conformal":
            try:
                phi = TrigExpression.from_list(self.phi)
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"invalid metric.phi: {exc}") from None
            if any(len(t.mode) != n for t in phi.terms):
                raise ConfigError("every phi mode vector needs n entries")
        if not need_operator:
            return
        if self.operator not in OPERATORS:
            raise ConfigError(f"operator must be one of {OPERATORS}, got {self.operator!r}")
        k, op = self.k, self.operator
        if not 0 <= k <= n:
            raise ConfigError(f"k must lie in [0, n], got {k}")
        if op in ("L", "B", "C", "D") and not k < n / 2:
            raise ConfigError(f"{op} requires k < n/2")
        if op in ("B", "C", "D") and k < 1:
            raise ConfigError(f"{op} requires k >= 1")
        if op == "G" and not 1 <= k <= n // 2:
            raise ConfigError("G requires 1 <= k <= n/2")
        if op in ("Q", "Bp", "Dp") and not k <= n // 2 - 1:
            raise ConfigError(f"{op} requires k <= n/2 - 1")
        if self.ell is not None:
            if op != "L":
                raise ConfigError("ell only applies to operator L")
            if not 1 <= self.ell <= n // 2 - k:
                raise ConfigError(f"ell must lie in [1, n/2 - k] = [1, {n // 2 - k}], got {self.ell}")
        itype = self.input.get("type", "random")
        if itype not in ("random", "file", "expression"):
            raise ConfigError(f"input.type must be random, file or expression, got {itype!r}")

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.n, self.sizes)

    def phi_expression(self) -> TrigExpression | None:
        return TrigExpression.from_list(self.phi) if self.metric == "conformal" else None


def load_config(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config: {exc}") from None
    if raw is None:
        raise ConfigError("empty configuration")
    return raw


def _geometry(cfg: ScenarioConfig) -> Geometry:
    phi = cfg.phi_expression()
    return Geometry.flat(cfg.grid) if phi is None else Geometry.conformal(cfg.grid, phi)


def expression_form(grid: TorusGrid, k: int, components: list) -> FormField:
    """Form from ``[{"index": [i1, ..., ik], "terms": [trig term, ...]}, ...]`` with axes numbered 1..n."""
    pos = multi_index_position(grid.n, k)
    out = np.zeros((grid.ncomp(k),) + grid.sizes)
    y = np.stack(np.broadcast_arrays(*grid.coordinates()), axis=-1)
    for comp in components:
        idx = tuple(int(i) - 1 for i in comp.get("index", []))
        if len(idx) != k or any(not 0 <= i < grid.n for i in idx):
            raise ConfigError(f"bad component index {comp.get('index')}")
        order = sorted(range(k), key=lambda a: idx[a])
        srt = tuple(idx[a] for a in order)
        if len(set(srt)) != k:
            raise ConfigError(f"repeated axis in component index {comp.get('index')}")
        # sign of the sorting permutation
        sign, perm = 1, list(order)
        for i in range(k):
            while perm[i] != i:
                j = perm[i]
                perm[i], perm[j] = perm[j], perm[i]
                sign = -sign
        try:
            expr = TrigExpression.from_list(comp.get("terms", []))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad expression terms: {exc}") from None
        out[pos[srt]] += sign * expr.evaluate_points(y)
    return FormField(grid, k, out)


def _input_form(cfg: ScenarioConfig, seed_override: int | None) -> FormField:
    spec, grid = cfg.input, cfg.grid
    itype = spec.get("type", "random")
    if itype == "random":
        seed = int(spec.get("seed", 0)) if seed_override is None else seed_override
        mm = int(spec.get("max_mode", 2))
        try:
            w = random_lowfreq_form(grid, cfg.k, mm, seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if spec.get("exact"):
            if cfg.k == 0:
                raise ConfigError("an exact 0-form does not exist; use a constant expression")
            w = exterior_derivative(random_lowfreq_form(grid, cfg.k - 1, mm, seed))
        return w
    if itype == "file":
        try:
            f = read_fbin(spec["path"])
        except (KeyError, OSError, ValueError) as exc:
            raise ConfigError(f"cannot read input form: {exc}") from None
        if not isinstance(f, FormField) or f.degree != cfg.k or f.grid != grid:
            raise ConfigError("input file does not hold a form of the configured degree and grid")
        return f
    return expression_form(grid, cfg.k, spec.get("components", []))


def _input_hash(w: FormField) -> str:
    buf = io.BytesIO()
    write_fbin(w, buf)
    return hashlib.sha256(buf.getvalue()).hexdigest()[:16]


def run_operator(cfg: ScenarioConfig, geom: Geometry, w: FormField) -> FormField:
    op, n, k = cfg.operator, cfg.n, cfg.k
    if op == "L":
        return extract_absolute(w, geom, cfg.ell)["Lk_ell"]
    if op == "G":
        return operator_Gk(w, geom)
    if op in ("B", "C", "D"):
        return extract_absolute(w, geom)[op + "k"]
    ext = extract_relative(w, geom)
    return ext[{"Q": "Qk", "Bp": "Bpk", "Dp": "Dpk"}[op]]


def _out_dir(args, cfg_out: dict | None = None) -> str:
    d = args.out or (cfg_out or {}).get("dir") or "."
    os.makedirs(d, exist_ok=True)
    return d


def cmd_compute(args) -> int:
    if not args.config:
        raise ConfigError("compute needs --config")
    cfg = ScenarioConfig.from_mapping(load_config(args.config))
    geom = _geometry(cfg)
    w = _input_form(cfg, args.seed)
    if cfg.operator in ("Q", "Bp", "Dp") and w.degree < cfg.n:
        dw = exterior_derivative(w)
        if dw.max_abs() > 1e-9 * max(1.0, w.max_abs()):
            print(f"guard: input form is not closed (|d w| = {dw.max_abs():.3e})", file=sys.stderr)
            return EXIT_GUARD
    old = _solver.SERIES_TOL
    if args.tolerance is not None:
        _solver.SERIES_TOL = args.tolerance
    try:
        out = run_operator(cfg, geom, w)
    finally:
        _solver.SERIES_TOL = old
    path = cfg.output.get("path")
    if args.out or not path:
        name = f"{cfg.operator}{'' if cfg.ell is None else cfg.ell}_n{cfg.n}_k{cfg.k}.fbin"
        path = os.path.join(_out_dir(args, cfg.output), os.path.basename(path) if path else name)
    else:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    write_fbin(out, path)
    norm = math.sqrt(max(quadrature_inner(out, out, geom.metric), 0.0))
    label = cfg.operator + ("" if cfg.ell is None else f"^{cfg.ell}")
    print(f"operator={label} n={cfg.n} k={cfg.k} input={_input_hash(w)} output_norm={norm:.12e} file={path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise ConfigError(f"unknown suite {args.suite!r}; expected one of {', '.join(SUITES)}")
    seed = 0 if args.seed is None else args.seed

    def progress(s):
        flag = "PASS" if s["passed"] else "FAIL"
        print(f"{flag} {s['scenario']} ({s['metadata'].get('seconds', 0):.1f}s)", flush=True)
        for i in s["identities"]:
            if not i["passed"]:
                print(f"    failed: {i['name']} residual={i['residual']} tol={i['tolerance']}", flush=True)

    report = run_suite(args.suite, seed=seed, tolerance=args.tolerance, workers=args.workers, progress=progress)
    path = os.path.join(_out_dir(args), f"verify_{args.suite}.json")
    write_report(report, path)
    s = report["summary"]
    print(f"suite={args.suite} passed={s['passed']} failed={s['failed']} report={path}")
    return EXIT_OK if s["failed"] == 0 else EXIT_VERIFY


def _curvature_config(args) -> ScenarioConfig:
    if not args.config:
        raise ConfigError("curvature needs --config")
    raw = load_config(args.config)
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    # only the grid and metric sections matter here
    return ScenarioConfig.from_mapping({**raw, "operator": "L", "k": 0, "ell": None})


def cmd_curvature(args) -> int:
    cfg = _curvature_config(args)
    grid = cfg.grid
    phi = cfg.phi_expression()
    metric = Metric.flat(grid) if phi is None else conformal_metric(phi.sample(grid))
    curv = compute_curvature(metric)
    d = _out_dir(args, cfg.output)
    if phi is not None:
        write_fbin(phi.sample(grid), os.path.join(d, "phi.fbin"))
    for name in ("ricci", "scal", "schouten", "cotton", "weyl", "bach", "riemann"):
        write_fbin(getattr(curv, name), os.path.join(d, f"{name}.fbin"))
    scal = curv.scal.values
    bach = float(np.max(np.abs(curv.bach.components)))
    print(f"scal_min={scal.min():.12e} scal_max={scal.max():.12e} bach_max={bach:.6e} dir={d}")
    if args.fd_check:
        tol = 1e-6 if args.tolerance is None else args.tolerance
        expr = phi if phi is not None else TrigExpression(())
        rng = np.random.default_rng(0 if args.seed is None else args.seed)
        idx = [tuple(int(rng.integers(s)) for s in grid.sizes) for _ in range(4)]
        pts = np.array([[grid.coordinate(a).ravel()[i[a]] for a in range(grid.n)] for i in idx])
        fd, _ = fd_ricci_check(expr, grid.n, pts)
        spec = np.stack([curv.ricci.full()[(slice(None), slice(None)) + i] for i in idx])
        err = float(np.max(np.abs(fd - spec))) / max(float(np.max(np.abs(spec))), 1.0)
        print(f"fd_check ricci_rel_err={err:.3e} tol={tol:.1e}")
        if err > tol:
            print("guard: finite-difference Ricci check failed", file=sys.stderr)
            return EXIT_GUARD
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bgforms", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--out", metavar="DIR")
        sp.add_argument("--tolerance", type=float, metavar="X")

    c = sub.add_parser("compute", help="apply one operator to one form")
    common(c)
    v = sub.add_parser("verify", help="run an identity suite")
    v.add_argument("suite")
    v.add_argument("--workers", type=int, default=None)
    common(v)
    cv = sub.add_parser("curvature", help="dump curvature tensors")
    common(cv)
    cv.add_argument("--fd-check", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    handlers = {"compute": cmd_compute, "verify": cmd_verify, "curvature": cmd_curvature}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalGuardError as exc:
        print(f"guard: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
