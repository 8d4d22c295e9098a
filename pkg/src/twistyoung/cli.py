"""Command-line front end.

Configuration files are flat ``key = value`` text; ``#`` starts a comment.
Unknown keys are rejected.  ``--seed`` and ``--points`` override the file.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .balancing import BalanceError, balance
from .core import (
    ExponentTriple,
    GaussianTriple,
    InadmissibleExponents,
    eval_form_gaussian,
    sharp_constant,
)
from .experiments import (
    SamplerConfig,
    check_onesigma,
    check_twosigma,
    fit_kappa,
    pure_twist_path,
    random_direction,
    scan_sample,
    summarize,
    third_order_scan,
    twist_prediction,
)
from .quadrature import GridFunction, build_rule, eval_form_numeric
from .symmetry import DistanceConfig, OrbitPoint, SymmetryElement, apply_symmetry, orbit_distance, phi

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VERIFY = 3
EXIT_SOLVER = 4
EXIT_IO = 5

CSV_COLUMNS = ("seed", "epsilon", "eta", "max_norm", "atja_norm", "dist_sq", "deficit", "ratio", "wall_ms")


class ConfigError(ValueError):
    pass


class VerificationFailure(RuntimeError):
    pass


def fmt(x) -> str:
    """17 significant digits for floats; other values verbatim."""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, complex):
        return f"{fmt(x.real)}{'+' if x.imag >= 0 or np.isnan(x.imag) else '-'}{fmt(abs(x.imag))}j"
    return str(x)


def _floats(text: str) -> list[float]:
    return [float(Fraction(t.strip())) for t in text.split(",") if t.strip()]


@dataclass
class RunConfig:
    command: str = ""
    p: tuple = (4 / 3, 4 / 3, 2.0)
    n: int = 2
    d: int = 1
    points: Optional[int] = None
    scale: float = 0.5
    eta: float = 0.1
    delta0: float = 0.1
    seed: int = 0
    seeds: int = 50
    eps_min: float = 1e-3
    eps_max: float = 1e-1
    t_min: float = 1e-4
    t_max: float = 1e-2
    twist_ts: tuple = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
    scales: tuple = (4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4)
    mode: str = "mixed"
    draws: int = 100
    starts: int = 2
    maxfev: int = 1000
    timing: bool = True
    audit: bool = True
    input: str = "g"
    shift: tuple = (0.05, 0.0)
    xi: tuple = (0.0, 0.0)
    epsilon: float = 0.01
    twist: float = 0.0
    format: str = "csv"
    out: str = "-"

    _unhashed = ("format", "out")

    @property
    def exponents(self) -> ExponentTriple:
        return ExponentTriple.of(self.p)

    def points_or(self, default: int) -> int:
        return self.points if self.points is not None else default

    def digest(self) -> str:
        data = {k: v for k, v in asdict(self).items() if k not in self._unhashed}
        blob = json.dumps(data, sort_keys=True, default=fmt, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


_PARSERS = {
    "p": lambda s: tuple(_floats(s)),
    "twist_ts": lambda s: tuple(_floats(s)),
    "scales": lambda s: tuple(_floats(s)),
    "shift": lambda s: tuple(_floats(s)),
    "xi": lambda s: tuple(_floats(s)),
    "timing": lambda s: _bool(s),
    "audit": lambda s: _bool(s),
}


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def parse_config_text(text: str, cfg: Optional[RunConfig] = None) -> RunConfig:
    cfg = cfg or RunConfig()
    known = {f.name: f for f in fields(RunConfig) if f.name != "command"}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _PARSERS:
                parsed = _PARSERS[key](value)
            elif key == "points":
                parsed = int(value)
            else:
                parsed = type(getattr(RunConfig, key))(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        setattr(cfg, key, parsed)
    return cfg


def validate(cfg: RunConfig) -> RunConfig:
    try:
        cfg.exponents
    except InadmissibleExponents as exc:
        raise ConfigError(str(exc)) from None
    if len(cfg.p) != 3:
        raise ConfigError("p needs three exponents")
    if cfg.d < 1 or cfg.n < 1:
        raise ConfigError("dimensions must be positive")
    if cfg.points is not None and not 1 <= cfg.points <= 200:
        raise ConfigError("points must lie in 1..200")
    if cfg.eta <= 0 or cfg.delta0 <= 0 or cfg.scale <= 0:
        raise ConfigError("eta, delta0 and scale must be positive")
    if not 0 < cfg.eps_min <= cfg.eps_max or not 0 < cfg.t_min <= cfg.t_max:
        raise ConfigError("scale ranges must be positive and ordered")
    if cfg.seeds < 1 or cfg.draws < 1 or cfg.starts < 1:
        raise ConfigError("counts must be positive")
    if cfg.mode not in ("mixed", "twist"):
        raise ConfigError("mode must be mixed or twist")
    if cfg.input not in ("g", "translate", "modulate", "perturb"):
        raise ConfigError("input must be g, translate, modulate or perturb")
    if cfg.format not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if cfg.twist < 0:
        raise ConfigError("twist must be nonnegative")
    for name in ("shift", "xi"):
        if len(getattr(cfg, name)) != 2 * cfg.d:
            raise ConfigError(f"{name} needs {2 * cfg.d} entries")
    return cfg


# ---------------------------------------------------------------------- output


class Report:
    """Key/value rows plus optional CSV records, rendered once at the end."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.digest = cfg.digest()
        self.items: list[tuple[str, object]] = []
        self.records: list[dict] = []

    def add(self, key: str, value):
        self.items.append((key, value))

    def render(self) -> str:
        if self.cfg.format == "json":
            doc = {
                "command": self.cfg.command,
                "config_hash": self.digest,
                "summary": {k: _jsonable(v) for k, v in self.items},
            }
            if self.records:
                doc["records"] = [
                    {"config_hash": self.digest, **{k: _jsonable(v) for k, v in r.items()}}
                    for r in self.records
                ]
            return json.dumps(doc, indent=1) + "\n"
        buf = io.StringIO()
        buf.write(f"# command: {self.cfg.command}\n# config_hash: {self.digest}\n")
        if self.records:
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.records:
                w.writerow([fmt(r[c]) for c in CSV_COLUMNS])
            for k, v in self.items:
                buf.write(f"# {k}: {fmt(v)}\n")
        else:
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(("key", "value"))
            for k, v in self.items:
                w.writerow((k, fmt(v)))
        return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return fmt(v) if not np.isfinite(v) else float(fmt(v))
    if isinstance(v, complex):
        return [float(fmt(v.real)), float(fmt(v.imag))]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


# -------------------------------------------------------------------- commands


def cmd_constants(cfg: RunConfig, rep: Report):
    p = cfg.exponents
    if cfg.n % 2:
        raise ConfigError("the Gaussian quotient needs an even dimension n = 2d")
    d = cfg.n // 2
    formula = sharp_constant(p, cfg.n)
    quotient = abs(phi(OrbitPoint(GaussianTriple.standard(p, d), None), p))
    diff = abs(formula - quotient)
    rep.add("p", ",".join(fmt(x) for x in p.ps))
    rep.add("n", cfg.n)
    rep.add("formula", formula)
    rep.add("gaussian_quotient", quotient)
    rep.add("difference", diff)
    rep.add("formula_n1_squared", sharp_constant(p, 1) ** 2)
    if diff > 1e-10:
        raise VerificationFailure("formula and Gaussian quotient disagree")


def _random_twist_matrix(rng, d):
    return rng.standard_normal((2 * d, 2 * d))


def cmd_lemma_check(cfg: RunConfig, rep: Report):
    p = cfg.exponents
    d = cfg.d
    rule = build_rule(cfg.points_or(40), 4 * d, cfg.scale)
    rng = np.random.default_rng(cfg.seed)
    worst1 = 0.0
    for _ in range(cfg.draws):
        slot = int(rng.integers(1, 4))
        h = random_direction(rng, p, d, 3, True)[slot - 1]
        A = _random_twist_matrix(rng, d)
        worst1 = max(worst1, check_onesigma(h, slot, A, rule, p))
    As = [_random_twist_matrix(rng, d) for _ in range(20)]
    fit = fit_kappa(As, p, rule)
    r1 = check_twosigma(As[0], p, d, rule)
    r2 = check_twosigma(2.0 * np.asarray(As[0]), p, d, rule)
    homog = abs(r2.value / r1.value - 16.0) / 16.0
    dirs = random_direction(rng, p, d, 3, True)
    rows = third_order_scan(dirs, cfg.eta, list(cfg.scales), rule=rule, p=p)
    ratios = [r.ratio for r in rows]
    decreasing = all(b < a for a, b in zip(ratios, ratios[1:]))
    checks = {
        "onesigma_max_residual": (worst1, worst1 <= 1e-8),
        "twosigma_fit_residual": (fit.rel_residual, fit.rel_residual <= 1e-6),
        "twosigma_homogeneity": (homog, homog <= 1e-6),
        "third_order_final_ratio": (ratios[-1], decreasing),
    }
    rep.add("kappa", fit.kappa)
    for r in rows:
        rep.add(f"third_order_ratio[eps={fmt(r.epsilon)}]", r.ratio)
    ok = True
    for k, (v, passed) in checks.items():
        rep.add(k, v)
        rep.add(k + "_pass", "PASS" if passed else "FAIL")
        ok &= passed
    if not ok:
        raise VerificationFailure("a lemma check failed")


def _described_point(cfg: RunConfig):
    """Input triple described by ``input``, ``shift``, ``xi``, ``epsilon`` and ``twist``."""
    p = cfg.exponents
    d = cfg.d
    G = GaussianTriple.standard(p, d)
    A = np.sqrt(cfg.twist) * np.eye(2 * d) if cfg.twist > 0 else None
    base = OrbitPoint(G, A)
    if cfg.input == "g":
        return base
    if cfg.input == "translate":
        v = np.asarray(cfg.shift)
        return apply_symmetry(SymmetryElement.translation(v, np.zeros_like(v)), base)
    if cfg.input == "modulate":
        return apply_symmetry(SymmetryElement.modulation(np.asarray(cfg.xi)), base)
    rng = np.random.default_rng(cfg.seed)
    dirs = random_direction(rng, p, d, 3, True)
    fs = tuple(GridFunction.from_gaussian(g) + cfg.epsilon * h for g, h in zip(G, dirs))
    return OrbitPoint(fs, A)


def cmd_balance(cfg: RunConfig, rep: Report):
    p = cfg.exponents
    pt = _described_point(cfg)
    rule = build_rule(cfg.points_or(40), 2 * cfg.d, cfg.scale)
    try:
        res = balance(pt.functions, pt.A, p, rule, delta0=cfg.delta0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    prm = res.params
    for j, b in enumerate(prm.b, 1):
        rep.add(f"b{j}", complex(b))
    for name in ("v1", "v2", "xi"):
        for k, x in enumerate(getattr(prm, name)):
            rep.add(f"{name}[{k}]", float(x))
    for (k, l) in zip(*np.triu_indices(2 * cfg.d)):
        rep.add(f"phi[{k},{l}]", float(prm.phi[k, l]))
    rep.add("magnitude", prm.magnitude())
    for i, r in enumerate(res.residual_history):
        rep.add(f"residual[{i}]", r)
    rep.add("iterations", res.iterations)
    rep.add("final_residual", res.residual)


def cmd_orbit_dist(cfg: RunConfig, rep: Report):
    p = cfg.exponents
    pt = _described_point(cfg)
    dcfg = DistanceConfig(starts=cfg.starts, seed=cfg.seed, maxfev=cfg.maxfev,
                          points=cfg.points_or(24), scale=cfg.scale)
    od = orbit_distance(pt, p, dcfg)
    rep.add("dist_sq", od.dist_sq)
    rep.add("dist", od.dist)
    rep.add("identity_value", od.identity_value)
    rep.add("converged", od.converged)
    rep.add("nfev", od.nfev)
    for k, v in enumerate(od.start_values):
        rep.add(f"start[{k}]", v)


def cmd_eval(cfg: RunConfig, rep: Report):
    p = cfg.exponents
    d = cfg.d
    G = GaussianTriple.standard(p, d)
    A = np.sqrt(cfg.twist) * np.eye(2 * d)
    rule = build_rule(cfg.points_or(40), 4 * d, cfg.scale)
    exact = eval_form_gaussian(G, A)
    num = eval_form_numeric(*G, A, rule, return_bound=True)
    rep.add("closed_form", complex(exact))
    rep.add("quadrature", complex(num.value))
    rep.add("difference", abs(exact - num.value))
    rep.add("truncation_bound", num.truncation_bound)
    rep.add("phi_abs", abs(phi(OrbitPoint(G, A), p)))
    rep.add("deficit", sharp_constant(p, 2 * d) - abs(phi(OrbitPoint(G, A), p)))


def cmd_scan(cfg: RunConfig, rep: Report):
    p = cfg.exponents
    d = cfg.d
    seeds = range(cfg.seed, cfg.seed + cfg.seeds)
    if cfg.mode == "twist":
        path = pure_twist_path(cfg.twist_ts, p, d)
        for i, r in enumerate(path):
            rep.records.append(dict(
                seed=cfg.seed + i, epsilon=0.0, eta=cfg.eta, max_norm=0.0,
                atja_norm=float(np.sqrt(r.atja_sq)), dist_sq=r.atja_sq, deficit=r.deficit,
                ratio=r.deficit / r.atja_sq, wall_ms=0.0,
            ))
        rep.add("prediction", twist_prediction(p, d))
        worst = max(abs(r.atja_sq - r.t**2) for r in path)
        rep.add("max_abs_atja_sq_minus_t_sq", worst)
        if worst > 1e-10:
            raise VerificationFailure("twist norm identity violated")
        return
    sampler = SamplerConfig(d=d, eps_range=(cfg.eps_min, cfg.eps_max), t_range=(cfg.t_min, cfg.t_max))
    rule = build_rule(cfg.points_or(32), 4 * d, cfg.scale)
    records = []
    for s in seeds:
        dcfg = DistanceConfig(starts=cfg.starts, maxfev=cfg.maxfev, seed=s, points=24, scale=cfg.scale)
        r = scan_sample(s, p, cfg.eta, sampler, rule, dcfg, cfg.audit, cfg.timing)
        records.append(r)
        rep.records.append({c: getattr(r, c) for c in CSV_COLUMNS})
    c, med, failures, degenerate = summarize(records)
    rep.add("c_fit", c)
    rep.add("min_ratio", c)
    rep.add("median_ratio", med)
    rep.add("failures", failures)
    rep.add("degenerate", degenerate)
    ok = [r for r in records if not r.failure]
    if ok:
        rep.add("min_deficit", min(r.deficit for r in ok))
        if cfg.audit:
            rep.add("max_audit_error", max(r.audit_error for r in ok))
    if failures:
        raise BalanceError(f"{failures} samples failed to balance")


COMMANDS = {
    "constants": cmd_constants,
    "lemma-check": cmd_lemma_check,
    "scan": cmd_scan,
    "balance": cmd_balance,
    "orbit-dist": cmd_orbit_dist,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twistyoung", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--seed", type=int, metavar="N")
        sp.add_argument("--points", type=int, metavar="N")
        sp.add_argument("--format", choices=("csv", "json"))
        sp.add_argument("--out", metavar="PATH")
    return ap


def load_config(args) -> RunConfig:
    cfg = RunConfig(command=args.command)
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        parse_config_text(text, cfg)
    for key in ("seed", "points", "format", "out"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    return validate(cfg)


def _write(text: str, path: str):
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    code = EXIT_OK
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep = Report(cfg)
    try:
        COMMANDS[cfg.command](cfg, rep)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        code = EXIT_VERIFY
    except BalanceError as exc:
        print(f"solver failed: {exc}", file=sys.stderr)
        if exc.history:
            print("residual history: " + " ".join(fmt(h) for h in exc.history), file=sys.stderr)
        code = EXIT_SOLVER
    try:
        _write(rep.render(), cfg.out)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
