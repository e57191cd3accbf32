"""Config-driven experiment runner.

    flatcw run --config exp.json [--seed 7] [--threads 4] [--out results/]
    flatcw validate --config exp.json
    flatcw list-presets
    flatcw dump-form lambda.bin [--out lambda.csv]

Exit status: 0 when every requested check passes, 1 when one fails,
2 for configuration or input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import forms as _forms
from .connection import (Connection, GaugeField, cartan_flat, gauge_transform, pure_gauge, quaternion_gauge,
                         random_tangent, winding_gauge)
from .errors import ConfigError, FlatCWError
from .forms import TorusGrid, load_form, save_form, write_form_csv
from .invariants.core import (distance_to_integers, lambda_, lambda_k1_closed_form, lambda_k2_closed_form,
                              lambda_via_product, transgression)
from .invariants.families import (CartanLoop, Cone, ConstantLoop, GaugedLoop, StraightLine,
                                  bump_perturbation, cubic_reparametrization, winding_gauge_loop)
from .invariants.quadrature import MIN_GAUSS_ORDER, ParameterDomain
from .lie import ALGEBRAS, POLYNOMIAL_PRESETS, algebra_by_name, build_trace_polynomial, preset_polynomial

SCHEMA = "flatcw-experiment/1"

CHECKS = ("closure", "extension-independence", "gauge", "pointwise-gauge", "homotopy",
          "triple-route", "dolbeault")

DEFAULT_TOLERANCES = {
    "closure": 1e-7,
    "extension-independence": 1e-6,
    "gauge": 1e-8,
    "pointwise-gauge": 1e-6,
    "homotopy": 1e-6,
    "triple-route": 1e-7,
    "dolbeault": 1e-7,
    "flat": 1e-7,
}

CONNECTION_GENERATORS = ("cartan_flat", "quaternion_pure_gauge", "random_cartan", "winding_gauge", "zero")
LOOP_GENERATORS = ("cartan_loop", "constant", "gauged_loop")
FAMILY_KINDS = {"straight_line": 1, "cone": 2}

_TOP_KEYS = {"schema", "seed", "algebra", "polynomial", "torus", "family", "checks", "tolerances",
             "gauge", "output"}


# config ---------------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    raw: dict
    seed: int
    algebra: str
    polynomial: dict
    n: int
    N: int
    family: dict
    checks: list
    tolerances: dict
    gauge: dict
    output: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return FAMILY_KINDS[self.family["kind"]]


def _keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(where, "expected an object")
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{where}.{extra[0]}" if where else extra[0], "unknown key")


def _need(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing required key")
    return d[key]


def _check_connection_spec(spec, where):
    gen = _need(spec, "generator", where)
    allowed = {
        "zero": {"generator"},
        "cartan_flat": {"generator", "thetas"},
        "random_cartan": {"generator", "scale"},
        "winding_gauge": {"generator", "w", "direction", "of"},
        "quaternion_pure_gauge": {"generator", "mass", "axes"},
    }
    if gen not in allowed:
        raise ConfigError(f"{where}.generator", f"unknown connection generator {gen!r}; "
                                                f"known: {list(CONNECTION_GENERATORS)}")
    _keys(spec, allowed[gen], where)
    if gen == "cartan_flat":
        _need(spec, "thetas", where)
    if gen == "winding_gauge":
        _need(spec, "w", where)
        _need(spec, "direction", where)
        _check_connection_spec(spec.get("of", {"generator": "zero"}), f"{where}.of")


def _check_loop_spec(spec, where):
    gen = _need(spec, "generator", where)
    allowed = {
        "constant": {"generator", "of"},
        "cartan_loop": {"generator", "thetas", "Y", "central", "Z"},
        "gauged_loop": {"generator", "base", "w", "direction"},
    }
    if gen not in allowed:
        raise ConfigError(f"{where}.generator", f"unknown loop generator {gen!r}; known: {list(LOOP_GENERATORS)}")
    _keys(spec, allowed[gen], where)
    if gen == "constant":
        _check_connection_spec(_need(spec, "of", where), f"{where}.of")
    elif gen == "cartan_loop":
        for key in ("thetas", "Y"):
            _need(spec, key, where)
    else:
        _need(spec, "w", where)
        _need(spec, "direction", where)
        _check_loop_spec(_need(spec, "base", where), f"{where}.base")


def build_polynomial(desc: dict, algebra):
    _keys(desc, {"preset", "partition", "coefficients", "integral", "name"}, "polynomial")
    integral = bool(desc.get("integral", False))
    if "preset" in desc:
        if "partition" in desc or "coefficients" in desc:
            raise ConfigError("polynomial", "give either a preset or a partition, not both")
        if desc["preset"] not in POLYNOMIAL_PRESETS:
            raise ConfigError("polynomial.preset", f"unknown preset {desc['preset']!r}")
        return preset_polynomial(desc["preset"], algebra, integral=integral)
    part = _need(desc, "partition", "polynomial")
    p = build_trace_polynomial(algebra, part, desc.get("coefficients"), descriptor=desc.get("name", "custom"))
    if integral:
        p = p.integral()
    return p


def parse_config(raw: dict, seed_override: int | None = None) -> ExperimentConfig:
    """Validate a config dict; errors name the offending field."""
    _keys(raw, _TOP_KEYS, "")
    schema = _need(raw, "schema", "")
    if schema != SCHEMA:
        raise ConfigError("schema", f"expected {SCHEMA!r}, got {schema!r}")
    seed = raw.get("seed", 0) if seed_override is None else seed_override
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    alg = _need(raw, "algebra", "")
    if alg not in ALGEBRAS:
        raise ConfigError("algebra", f"unknown algebra {alg!r}; known: {sorted(ALGEBRAS)}")
    torus = _need(raw, "torus", "")
    _keys(torus, {"n", "N"}, "torus")
    n = _need(torus, "n", "torus")
    N = torus.get("N", 32)
    try:
        TorusGrid(n, N)
    except (ValueError, TypeError) as exc:
        raise ConfigError("torus", str(exc)) from None
    fam = _need(raw, "family", "")
    kind = _need(fam, "kind", "family")
    if kind not in FAMILY_KINDS:
        raise ConfigError("family.kind", f"unknown family kind {kind!r}; known: {sorted(FAMILY_KINDS)}")
    if kind == "straight_line":
        _keys(fam, {"kind", "from", "to", "quadrature"}, "family")
        _check_connection_spec(_need(fam, "from", "family"), "family.from")
        _check_connection_spec(_need(fam, "to", "family"), "family.to")
    else:
        _keys(fam, {"kind", "apex", "loop", "quadrature"}, "family")
        _check_connection_spec(_need(fam, "apex", "family"), "family.apex")
        _check_loop_spec(_need(fam, "loop", "family"), "family.loop")
    quad = fam.get("quadrature", {})
    _keys(quad, {"order", "loop_nodes"}, "family.quadrature")
    for key in ("order", "loop_nodes"):
        v = quad.get(key, MIN_GAUSS_ORDER)
        if not isinstance(v, int) or isinstance(v, bool) or v < MIN_GAUSS_ORDER:
            raise ConfigError(f"family.quadrature.{key}", f"must be an integer >= {MIN_GAUSS_ORDER}, got {v!r}")
    checks = raw.get("checks", ["closure"])
    if not isinstance(checks, list):
        raise ConfigError("checks", "expected a list")
    for i, c in enumerate(checks):
        if c not in CHECKS:
            raise ConfigError(f"checks[{i}]", f"unknown check {c!r}; known: {list(CHECKS)}")
    tols = dict(DEFAULT_TOLERANCES)
    user_tols = raw.get("tolerances", {})
    _keys(user_tols, set(DEFAULT_TOLERANCES), "tolerances")
    for key, v in user_tols.items():
        if not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"tolerances.{key}", "must be a positive number")
        tols[key] = float(v)
    gauge = raw.get("gauge", {})
    _keys(gauge, {"w", "direction"}, "gauge")
    if "pointwise-gauge" in checks and not {"w", "direction"} <= set(gauge):
        raise ConfigError("gauge", "pointwise-gauge needs gauge.w and gauge.direction")
    out = raw.get("output", {})
    _keys(out, {"report", "csv", "form_dump"}, "output")
    if "dolbeault" in checks and n % 2:
        raise ConfigError("checks", "the dolbeault check needs an even torus dimension")

    algebra = algebra_by_name(alg)
    p = build_polynomial(_need(raw, "polynomial", ""), algebra)
    r, k = p.degree, FAMILY_KINDS[kind]
    if 2 * r - k > n:
        raise ConfigError("polynomial", f"2r - k = {2 * r - k} exceeds the torus dimension n = {n} "
                                        "(constraint 2r - k <= n)")
    if 2 * r - k < 0:
        raise ConfigError("polynomial", f"2r - k = {2 * r - k} is negative")
    return ExperimentConfig(raw, seed, alg, raw["polynomial"], n, N, fam, list(checks), tols, gauge, out)


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"not valid JSON: {exc}") from None
    return parse_config(raw, seed_override)


# builders ---------------------------------------------------------------------------------

class _Builder:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.algebra = algebra_by_name(cfg.algebra)
        self.grid = TorusGrid(cfg.n, cfg.N)
        self.p = build_polynomial(cfg.polynomial, self.algebra)
        self._draws = 0

    def rng(self) -> np.random.Generator:
        # one independent stream per draw, in build order
        self._draws += 1
        return np.random.default_rng([self.cfg.seed, self._draws])

    def _vec(self, v):
        return np.asarray(v, dtype=complex if np.iscomplexobj(np.asarray(v)) else float)

    def connection(self, spec) -> Connection:
        g, a = self.grid, self.algebra
        gen = spec["generator"]
        if gen == "zero":
            return Connection.zero(g, a)
        if gen == "cartan_flat":
            return cartan_flat(g, a, [self._vec(t) for t in spec["thetas"]])
        if gen == "random_cartan":
            rng = self.rng()
            scale = float(spec.get("scale", 0.5))
            if a.kind == "su2":
                axis = rng.standard_normal(a.dim)
                axis /= np.linalg.norm(axis)
                thetas = [scale * rng.uniform(-1, 1) * axis for _ in range(g.n)]
            else:
                m = a.matrix_size
                thetas = [a.from_matrix(np.diag(1j * scale * rng.uniform(-1, 1, m))) for _ in range(g.n)]
            return cartan_flat(g, a, thetas)
        if gen == "winding_gauge":
            phi = winding_gauge(g, a, spec["w"], self._vec(spec["direction"]))
            return gauge_transform(phi, self.connection(spec.get("of", {"generator": "zero"})))
        if gen == "quaternion_pure_gauge":
            phi = quaternion_gauge(g, a, axes=tuple(spec.get("axes", (0, 1, 2))), mass=float(spec.get("mass", 2.0)))
            return pure_gauge(phi)
        raise ConfigError("generator", f"unknown generator {gen!r}")

    def loop(self, spec):
        g, a = self.grid, self.algebra
        gen = spec["generator"]
        if gen == "constant":
            return ConstantLoop(self.connection(spec["of"]))
        if gen == "cartan_loop":
            return CartanLoop(g, a, [self._vec(t) for t in spec["thetas"]], self._vec(spec["Y"]),
                              central=spec.get("central"), Z=None if "Z" not in spec else self._vec(spec["Z"]))
        return GaugedLoop(self.loop(spec["base"]), winding_gauge_loop(g, a, spec["w"], self._vec(spec["direction"])))

    def family(self):
        fam = self.cfg.family
        quad = fam.get("quadrature", {})
        order = quad.get("order", 8)
        if fam["kind"] == "straight_line":
            f = StraightLine(self.connection(fam["from"]), self.connection(fam["to"]))
            return f, ParameterDomain.interval(order)
        f = Cone(self.connection(fam["apex"]), self.loop(fam["loop"]))
        return f, ParameterDomain.cylinder(order, quad.get("loop_nodes", 32))


# checks ----------------------------------------------------------------------------------

def _periods(p, k, family, domain, flat_tol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = lambda_(p, k, family, domain, flat_tol=flat_tol)
    if rep.periods is None:
        raise FlatCWError("Lambda is not closed; periods unavailable")
    return np.asarray(rep.periods.values)


def _run_check(name, b: _Builder, family, domain, rep, tols):
    p, k, flat_tol = b.p, b.cfg.k, tols["flat"]
    base = None if rep.periods is None else np.asarray(rep.periods.values)
    if name == "closure":
        return rep.closure_residual, tols["closure"]
    if name == "triple-route":
        L = rep.lambda_form
        A_ref = family.A0
        routes = [L, lambda_via_product(p, k, family, domain),
                  transgression(p, family, A_ref).boundary_integral(domain)]
        if k == 1:
            routes.append(lambda_k1_closed_form(p, family.A0, family.A1, check_flat=False))
        else:
            routes.append(lambda_k2_closed_form(p, family.A0, family.loop, domain, check_flat=False))
        diff = max((x - y).max_norm() for i, x in enumerate(routes) for y in routes[i + 1:])
        return diff, tols["triple-route"]
    if name == "extension-independence":
        other = _periods(p, k, cubic_reparametrization(family), domain, flat_tol)
        return float(np.abs(other - base).max(initial=0.0)), tols[name]
    if name == "homotopy":
        eta = random_tangent(b.grid, b.algebra, b.rng(), max_mode=1, amplitude=0.2)
        other = _periods(p, k, bump_perturbation(family, eta), domain, flat_tol)
        return float(np.abs(other - base).max(initial=0.0)), tols[name]
    if name == "gauge":
        g = b.algebra.random_group_element(b.rng())
        phi = GaugeField.constant(b.grid, b.algebra, g)
        other = _periods(p, k, family.gauge(phi), domain, flat_tol)
        return float(np.abs(other - base).max(initial=0.0)), tols[name]
    if name == "pointwise-gauge":
        w, H = b.cfg.gauge["w"], b._vec(b.cfg.gauge["direction"])
        if k == 1:
            phi = winding_gauge(b.grid, b.algebra, w, H)
            other_family = StraightLine(family.A0, gauge_transform(phi, family.A1))
        else:
            other_family = Cone(family.A0, GaugedLoop(family.loop, winding_gauge_loop(b.grid, b.algebra, w, H)))
        other = _periods(p, k, other_family, domain, flat_tol)
        return distance_to_integers(other - base), tols[name]
    if name == "dolbeault":
        from .dolbeault import lambda_tilde
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            drep = lambda_tilde(p, k, family, domain)
        return drep.closure_residual, tols[name]
    raise ConfigError("checks", f"unknown check {name!r}")


def run_experiment(cfg: ExperimentConfig) -> tuple[dict, object]:
    """Compute the report dict (and the Lambda form) for a validated config."""
    b = _Builder(cfg)
    family, domain = b.family()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = lambda_(b.p, cfg.k, family, domain, flat_tol=cfg.tolerances["flat"])
    results = []
    for name in cfg.checks:
        try:
            measured, allowed = _run_check(name, b, family, domain, rep, cfg.tolerances)
            results.append({"check": name, "measured": float(measured), "allowed": float(allowed),
                            "passed": bool(measured <= allowed)})
        except FlatCWError as exc:
            results.append({"check": name, "measured": None, "allowed": cfg.tolerances.get(name),
                            "passed": False, "error": str(exc)})
    report = {
        "schema": SCHEMA,
        "seed": cfg.seed,
        "config": cfg.raw,
        "tolerances": cfg.tolerances,
        "invariant": rep.to_dict(),
        "checks": results,
        "passed": all(r["passed"] for r in results),
    }
    return report, rep


def _atomic_write(path, data: bytes) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".flatcw-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def report_bytes(report: dict) -> bytes:
    return (json.dumps(report, indent=2, sort_keys=True) + "\n").encode()


def write_outputs(cfg: ExperimentConfig, report: dict, rep, out_dir: str) -> list:
    """Write report, optional CSV and binary dump once all computation is done."""
    written = []
    name = cfg.output.get("report", "report.json")
    path = os.path.join(out_dir, name)
    _atomic_write(path, report_bytes(report))
    written.append(path)
    if cfg.output.get("csv"):
        import io
        buf = io.StringIO()
        rep.write_csv(buf)
        path = os.path.join(out_dir, cfg.output["csv"])
        _atomic_write(path, buf.getvalue().encode())
        written.append(path)
    if cfg.output.get("form_dump"):
        path = os.path.join(out_dir, cfg.output["form_dump"])
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".", prefix=".flatcw-")
        os.close(fd)
        save_form(tmp, rep.lambda_form)
        os.replace(tmp, path)
        written.append(path)
    return written


def exit_status(report: dict) -> int:
    return 0 if all(r["passed"] for r in report["checks"]) else 1


# presets ------------------------------------------------------------------------------------

def list_presets() -> dict:
    polys = {}
    for name in sorted(POLYNOMIAL_PRESETS):
        required, builder = POLYNOMIAL_PRESETS[name]
        alg = algebra_by_name(required or "u2")
        polys[name] = {"algebra": required or "any", "r": builder(alg).degree}
    return {
        "algebras": sorted(ALGEBRAS),
        "polynomials": polys,
        "connection_generators": sorted(CONNECTION_GENERATORS),
        "loop_generators": sorted(LOOP_GENERATORS),
        "family_kinds": sorted(FAMILY_KINDS),
        "checks": list(CHECKS),
    }


# entry point -------------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flatcw", description="Invariants of families of flat connections on tori")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int)
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--out", default=".")
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    val.add_argument("--seed", type=int)
    sub.add_parser("list-presets", help="print algebras, polynomials and generators")
    dump = sub.add_parser("dump-form", help="convert a binary form dump to CSV")
    dump.add_argument("path")
    dump.add_argument("--out", help="CSV path (stdout if omitted)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-presets":
            print(json.dumps(list_presets(), indent=2, sort_keys=True))
            return 0
        if args.command == "dump-form":
            omega = load_form(args.path)
            if args.out:
                import io
                buf = io.StringIO()
                write_form_csv(omega, buf)
                _atomic_write(args.out, buf.getvalue().encode())
            else:
                write_form_csv(omega, sys.stdout)
            return 0
        cfg = load_config(args.config, args.seed)
        if args.command == "validate":
            print(f"ok: r = {build_polynomial(cfg.polynomial, algebra_by_name(cfg.algebra)).degree}, "
                  f"k = {cfg.k}, n = {cfg.n}")
            return 0
        _forms.set_threads(args.threads)
        report, rep = run_experiment(cfg)
        paths = write_outputs(cfg, report, rep, args.out)
        for r in report["checks"]:
            status = "PASS" if r["passed"] else "FAIL"
            detail = r.get("error") or f"measured {r['measured']:.3e} allowed {r['allowed']:.1e}"
            print(f"{status} {r['check']}: {detail}")
        for pth in paths:
            print(f"wrote {pth}")
        return exit_status(report)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
