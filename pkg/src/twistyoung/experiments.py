"""Lemma verifiers, the sixteen-term expansion and deficit/distance scans."""
from __future__ import annotations

import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .balancing import DEFAULT_ETA, BalanceError, balance, sharp_flat_split
from .core import (
    DEFAULT_EXPONENTS,
    ExponentTriple,
    GaussianFactor,
    GaussianTriple,
    eval_form_gaussian,
    lp_norm_gaussian,
    sharp_constant,
)
from .hermite import basis, eval_expansion, multi_indices, tau
from .quadrature import (
    FormEvaluator,
    GridFunction,
    QuadratureRule,
    as_grid_function,
    build_rule,
    default_rule,
    lp_norm_numeric,
)
from .symmetry import DistanceConfig, OrbitPoint, orbit_distance, phi
from .symplectic import as_twist, canonical_form, twist_form

log = logging.getLogger(__name__)

SLOT_NAMES = ("g", "f")
DEGENERATE_DIST_SQ = 1e-12
SCAN_POINTS = 32
DISTANCE_POINTS = 24
DIRECTION_POINTS = 64


def _standard(p: ExponentTriple, d: int) -> tuple[GridFunction, ...]:
    return tuple(GridFunction.from_gaussian(GaussianFactor.standard(pj, d)) for pj in p.ps)


def _form_rule(rule: Optional[QuadratureRule], d: int) -> QuadratureRule:
    if rule is None:
        return default_rule(4 * d)
    return rule if rule.axes == 4 * d else rule.with_axes(4 * d)


# --------------------------------------------------------------------- expansion


def expansion_terms(f_triple, A, p: ExponentTriple = DEFAULT_EXPONENTS,
                    rule: Optional[QuadratureRule] = None, evaluator: Optional[FormEvaluator] = None):
    """The sixteen slot-wise terms of ``T_0(g+f) + (T_A - T_0)(g+f)``.

    Keys are ``(kind, word)`` with ``kind`` in ``{"T0", "TA-T0"}`` and
    ``word`` a string over ``{"g", "f"}`` naming the content of each slot.
    """
    fs = tuple(as_grid_function(f) for f in f_triple)
    d = fs[0].dim // 2
    ev = evaluator or FormEvaluator(_form_rule(rule, d), A, d)
    gs = _standard(p, d)
    out = {}
    for kind, mode in (("T0", "untwisted"), ("TA-T0", "difference")):
        for word in itertools.product(SLOT_NAMES, repeat=3):
            slots = [gs[j] if w == "g" else fs[j] for j, w in enumerate(word)]
            out[(kind, "".join(word))] = ev.value(*slots, mode=mode)
    return out


@dataclass
class ExpansionAudit:
    terms: dict
    direct: complex
    total: complex

    @property
    def error(self) -> float:
        return abs(self.total - self.direct) / max(abs(self.direct), 1e-300)


def expansion_audit(f_triple, A, p: ExponentTriple = DEFAULT_EXPONENTS,
                    rule: Optional[QuadratureRule] = None) -> ExpansionAudit:
    """Compare the summed expansion with ``T_A(g + f)`` evaluated directly on the same rule."""
    fs = tuple(as_grid_function(f) for f in f_triple)
    d = fs[0].dim // 2
    ev = FormEvaluator(_form_rule(rule, d), A, d)
    terms = expansion_terms(fs, A, p, evaluator=ev)
    full = [g + f for g, f in zip(_standard(p, d), fs)]
    direct = ev.value(*full, mode="twisted")
    return ExpansionAudit(terms, direct, sum(terms.values()))


# ------------------------------------------------------------------ lemma checks


def _slot_triple(h: GridFunction, slot: int, p: ExponentTriple, d: int):
    if slot not in (1, 2, 3):
        raise ValueError("slot must be 1, 2 or 3")
    fs = list(_standard(p, d))
    fs[slot - 1] = h
    return fs


def onesigma_value(h, slot: int, A, p: ExponentTriple = DEFAULT_EXPONENTS,
                   rule: Optional[QuadratureRule] = None) -> complex:
    """``iint F1(x) F2(y) F3(x+y) sigma(Ax, Ay)`` with ``h`` in ``slot`` and ``g`` elsewhere."""
    h = as_grid_function(h)
    d = h.dim // 2
    ev = FormEvaluator(_form_rule(rule, d), A, d)
    return ev.value(*_slot_triple(h, slot, p, d), mode="sigma")


def check_onesigma(h, slot: int, A, rule: Optional[QuadratureRule] = None,
                   p: ExponentTriple = DEFAULT_EXPONENTS) -> float:
    """Residual ``|value| / (||h||_{p_slot} ||A^T J A||)``; exactly 0 when the twist vanishes."""
    h = as_grid_function(h)
    d = h.dim // 2
    Bn = twist_form(as_twist(A if A is not None else np.zeros((2 * d, 2 * d)))).norm
    if Bn == 0:
        return 0.0
    value = onesigma_value(h, slot, A, p, rule)
    hn = lp_norm_numeric(h, p[slot - 1], _form_rule(rule, d).with_axes(2 * d))
    return abs(value) / (hn * Bn)


@dataclass
class TwoSigma:
    value: float
    kappa: float
    invariants: np.ndarray
    factorized: float

    def __iter__(self):
        return iter((self.value, self.kappa))


def _pair_moments(p: ExponentTriple, points: int = 60):
    """1D integrals ``iint g1 g2 g3(x+y) m(x, y)`` for ``m`` in ``1, x^2, y^2, xy``."""
    r = build_rule(points, 2, 0.5)
    P, W = r.grid()
    x, y = P[:, 0], P[:, 1]
    q1, q2, q3 = p.conjugates
    base = W * np.exp(-np.pi * (q1 * x**2 + q2 * y**2 + q3 * (x + y) ** 2))
    return tuple(float(np.sum(base * m)) for m in (1.0, x * x, y * y, x * y))


def twosigma_factorized(A, p: ExponentTriple = DEFAULT_EXPONENTS) -> float:
    """``iint g1 g2 g3 sigma(Ax, Ay)^2`` from the canonical form and 1D integrals.

    Rotating ``B`` to its canonical pairs leaves the isotropic Gaussians
    unchanged; the cross terms between different pairs integrate to zero,
    and each pair reduces to products of one-dimensional moments.
    """
    A = as_twist(A)
    _, a = canonical_form(twist_form(A).entries)
    I0, Ixx, Iyy, Ixy = _pair_moments(p)
    n = 2 * A.d
    rest = I0 ** (n - 2)
    per_pair = 2.0 * (Ixx * Iyy - Ixy**2) * rest
    return float(per_pair * np.sum(np.asarray(a) ** 2))


def twosigma_kappa(p: ExponentTriple, d: int) -> float:
    """Closed-form coefficient of ``sum a_k^2`` in the two-sigma integral."""
    q1, q2, q3 = p.conjugates
    M2 = np.array([[q1 + q3, q3], [q3, q2 + q3]])
    C2 = np.linalg.inv(M2) / (2 * np.pi)
    T0 = eval_form_gaussian(GaussianTriple.standard(p, d)).real
    return float(T0 * 2.0 * np.linalg.det(C2))


def check_twosigma(A, p: ExponentTriple = DEFAULT_EXPONENTS, d: Optional[int] = None,
                   rule: Optional[QuadratureRule] = None) -> TwoSigma:
    """Quadrature value of ``iint g1 g2 g3 sigma(Ax, Ay)^2`` and ``kappa = value / sum a_k^2``."""
    A = as_twist(A)
    d = A.d if d is None else d
    inv = twist_form(A).a
    ev = FormEvaluator(_form_rule(rule, d), A, d)
    value = ev.value(*_standard(p, d), mode="sigma2").real
    s = float(np.sum(np.asarray(inv) ** 2))
    kappa = value / s if s > 0 else 0.0
    return TwoSigma(float(value), float(kappa), np.asarray(inv), twosigma_factorized(A, p))


@dataclass
class KappaFit:
    kappa: float
    rel_residual: float
    values: np.ndarray
    sums: np.ndarray


def fit_kappa(As: Sequence, p: ExponentTriple = DEFAULT_EXPONENTS,
              rule: Optional[QuadratureRule] = None) -> KappaFit:
    """Least-squares ``value = kappa sum a_k^2`` through the origin over a batch of twists."""
    vals, sums = [], []
    for A in As:
        r = check_twosigma(A, p, rule=rule)
        vals.append(r.value)
        sums.append(float(np.sum(r.invariants**2)))
    vals, sums = np.array(vals), np.array(sums)
    kappa = float(vals @ sums / (sums @ sums))
    resid = float(np.max(np.abs(vals - kappa * sums) / np.abs(vals)))
    return KappaFit(kappa, resid, vals, sums)


# ------------------------------------------------------------------ third order


@dataclass
class ThirdOrderRow:
    epsilon: float
    atja_norm: float
    sharp_norms: tuple
    term: complex
    ratio: float
    trivial_bound: float
    branch: str


def third_order_scan(direction, eta: float, scales: Sequence[float], a_scales=None,
                     rule: Optional[QuadratureRule] = None, p: ExponentTriple = DEFAULT_EXPONENTS,
                     A0=None) -> list[ThirdOrderRow]:
    """``(T_A - T_0)(f1#, f2#, g3) / (||f||^2 + ||A^T J A||^2)`` along ``f = eps * direction``.

    ``a_scales`` gives the twist amplitude ``s`` for each ``eps`` (the twist
    is ``s * A0``); by default ``s = eps ** 0.5`` so that ``||A^T J A||``
    shrinks like ``eps``.  ``trivial_bound`` is ``2 A_p ||f1#|| ||f2#|| ||g3||``,
    valid for both forms by the untwisted sharp inequality.
    """
    dirs = tuple(as_grid_function(f) for f in direction)
    d = dirs[0].dim // 2
    n = 2 * d
    frule = _form_rule(rule, d)
    nrule = frule.with_axes(n)
    A0 = np.eye(n) if A0 is None else np.asarray(A0, dtype=float)
    if a_scales is None:
        a_scales = [np.sqrt(e) for e in scales]
    gs = _standard(p, d)
    g3n = lp_norm_gaussian(GaussianFactor.standard(p[2], d), p[2])
    Ap = sharp_constant(p, n)
    rows = []
    for eps, s in zip(scales, a_scales):
        A = s * A0
        Bn = twist_form(as_twist(A)).norm
        if eps == 0:
            rows.append(ThirdOrderRow(0.0, Bn, (0.0, 0.0), 0j, 0.0, 0.0, "zero"))
            continue
        fs = [eps * f for f in dirs]
        sharp = [sharp_flat_split(fs[j], gs[j], eta).sharp for j in range(2)]
        sn = tuple(lp_norm_numeric(h, pj, nrule) for h, pj in zip(sharp, p.ps[:2]))
        fn = max(lp_norm_numeric(f, pj, nrule) for f, pj in zip(fs, p.ps))
        term = FormEvaluator(frule, A, d).value(sharp[0], sharp[1], gs[2], mode="difference")
        branch = "trivial" if Bn**3 >= sn[0] * sn[1] else "localized"
        rows.append(ThirdOrderRow(float(eps), Bn, sn, term, abs(term) / (fn**2 + Bn**2),
                                  2 * Ap * sn[0] * sn[1] * g3n, branch))
    return rows


# ---------------------------------------------------------------------- deficit


def deficit(pt: OrbitPoint, p: ExponentTriple = DEFAULT_EXPONENTS,
            rule: Optional[QuadratureRule] = None) -> float:
    """``A_p^{2d} - |Phi(f, A)|``; closed form for Gaussian points unless ``rule`` is given."""
    return float(sharp_constant(p, 2 * pt.d) - abs(phi(pt, p, rule)))


# -------------------------------------------------------------------------- scan


@dataclass
class SamplerConfig:
    """Random perturbations ``eps g_j sum_alpha c_alpha P_alpha`` and twists of norm ``t``."""

    d: int = 1
    degree: int = 3
    eps_range: tuple = (1e-3, 1e-1)
    t_range: tuple = (1e-4, 1e-2)
    complex_coeffs: bool = True


@dataclass
class ScanRecord:
    seed: int
    epsilon: float
    eta: float
    max_norm: float
    atja_norm: float
    dist_sq: float
    deficit: float
    ratio: float
    wall_ms: float
    audit_error: float = float("nan")
    flat_norm: float = float("nan")
    failure: str = ""

    @property
    def degenerate(self) -> bool:
        return not self.dist_sq > DEGENERATE_DIST_SQ


@dataclass
class TwistPathRecord:
    t: float
    atja_sq: float
    phi_abs: float
    deficit: float

    @property
    def ratio(self) -> float:
        return self.deficit / self.t**2


@dataclass
class ScanResult:
    records: list
    c_fit: float
    median_ratio: float
    failures: int
    degenerate: int
    twist_path: list = field(default_factory=list)
    twist_prediction: float = float("nan")

    @property
    def min_deficit(self) -> float:
        vals = [r.deficit for r in self.records if not r.failure]
        return min(vals) if vals else float("nan")

    @property
    def max_audit_error(self) -> float:
        vals = [r.audit_error for r in self.records if not r.failure]
        return max(vals) if vals else float("nan")


def random_direction(rng: np.random.Generator, p: ExponentTriple, d: int = 1, degree: int = 3,
                     complex_coeffs: bool = True, rule: Optional[QuadratureRule] = None):
    """Triple ``g_j sum c_alpha P_alpha`` with ``1 <= |alpha| <= degree``, unit ``L^{p_j}`` norms."""
    n = 2 * d
    # |poly|^p has kinks at sign changes, so normalise on a fine fixed rule
    nrule = (rule or build_rule(DIRECTION_POINTS, n, 0.5)).with_axes(n)
    alphas = [a for k in range(1, degree + 1) for a in multi_indices(n, k)]
    out = []
    for pj in p.ps:
        b = basis(tau(pj), degree)
        c = rng.standard_normal(len(alphas))
        if complex_coeffs:
            c = c + 1j * rng.standard_normal(len(alphas))
        gj = GaussianFactor.standard(pj, d)

        def f(x, b=b, c=c, gj=gj):
            return gj(x) * eval_expansion(b, alphas, c, x)

        h = GridFunction(f, n, None, "direction")
        out.append((1.0 / lp_norm_numeric(h, pj, nrule)) * h)
    return tuple(out)


def random_twist(rng: np.random.Generator, d: int, t: float) -> np.ndarray:
    """Random ``2d x 2d`` matrix rescaled so that ``||A^T J A|| = t``."""
    A = rng.standard_normal((2 * d, 2 * d))
    return A * np.sqrt(t / twist_form(as_twist(A)).norm)


def log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def scan_sample(seed: int, p: ExponentTriple = DEFAULT_EXPONENTS, eta: float = DEFAULT_ETA,
                sampler: Optional[SamplerConfig] = None, rule: Optional[QuadratureRule] = None,
                distance: Optional[DistanceConfig] = None, audit: bool = True,
                timing: bool = True) -> ScanRecord:
    """One scan record: perturb, balance, then measure deficit and orbit distance."""
    t0 = time.perf_counter()
    sc = sampler or SamplerConfig()
    d, n = sc.d, 2 * sc.d
    frule = _form_rule(rule or build_rule(SCAN_POINTS, 4 * d, 0.5), d)
    nrule = frule.with_axes(n)
    rng = np.random.default_rng(seed)
    eps = log_uniform(rng, *sc.eps_range)
    t = log_uniform(rng, *sc.t_range)
    dirs = random_direction(rng, p, d, sc.degree, sc.complex_coeffs)
    A = random_twist(rng, d, t)
    gs = _standard(p, d)
    F = tuple(g + eps * h for g, h in zip(gs, dirs))
    rec = dict(seed=seed, epsilon=eps, eta=eta)
    try:
        bal = balance(F, A, p, nrule, check_regime=False)
    except BalanceError as exc:
        log.warning("seed %d: balancing failed (%s)", seed, exc)
        return ScanRecord(**rec, max_norm=float("nan"), atja_norm=t, dist_sq=float("nan"),
                          deficit=float("nan"), ratio=float("nan"), wall_ms=0.0,
                          failure=f"balance: {exc}")
    pt = bal.point
    fs = tuple(h - g for h, g in zip(pt.grid_functions(), gs))
    max_norm = max(lp_norm_numeric(f, pj, nrule) for f, pj in zip(fs, p.ps))
    flat = sum(lp_norm_numeric(sharp_flat_split(f, g, eta).flat, pj, nrule) ** pj
               for f, g, pj in zip(fs, gs, p.ps))
    atja = twist_form(pt.A).norm
    dfc = deficit(pt, p, frule)
    audit_err = expansion_audit(fs, pt.A, p, frule).error if audit else float("nan")
    dcfg = distance or DistanceConfig(starts=2, maxfev=1000, seed=seed,
                                      points=DISTANCE_POINTS, scale=frule.scale)
    od = orbit_distance(pt, p, dcfg)
    ratio = dfc / od.dist_sq if od.dist_sq > DEGENERATE_DIST_SQ else float("nan")
    wall = (time.perf_counter() - t0) * 1e3 if timing else 0.0
    return ScanRecord(**rec, max_norm=max_norm, atja_norm=atja, dist_sq=od.dist_sq, deficit=dfc,
                      ratio=ratio, wall_ms=wall, audit_error=audit_err, flat_norm=flat)


def twist_prediction(p: ExponentTriple = DEFAULT_EXPONENTS, d: int = 1) -> float:
    """Leading coefficient of ``deficit / t^2`` for ``(g, t^{1/2} I)``.

    ``T_A(g) = T_0(g) - kappa t^2 / 2 + O(t^4)`` since the one-sigma term
    vanishes; dividing by the norms of ``g`` gives the deficit.
    """
    norms = np.prod([lp_norm_gaussian(GaussianFactor.standard(pj, d), pj) for pj in p.ps])
    return 0.5 * twosigma_kappa(p, d) * d / norms


def pure_twist_path(ts: Sequence[float], p: ExponentTriple = DEFAULT_EXPONENTS, d: int = 1,
                    rule: Optional[QuadratureRule] = None) -> list[TwistPathRecord]:
    """Deficit along ``(g, t^{1/2} I)``; closed form unless ``rule`` is given."""
    G = GaussianTriple.standard(p, d)
    out = []
    for t in ts:
        A = np.sqrt(t) * np.eye(2 * d)
        pt = OrbitPoint(G, A)
        ph = abs(phi(pt, p, rule))
        out.append(TwistPathRecord(float(t), twist_form(as_twist(A)).norm ** 2, ph,
                                   float(sharp_constant(p, 2 * d) - ph)))
    return out


def summarize(records: Sequence[ScanRecord]):
    """``(c_fit, median ratio, failures, degenerate)`` over finished records."""
    ok = [r for r in records if not r.failure]
    ratios = np.array([r.ratio for r in ok if not r.degenerate])
    failures = len(records) - len(ok)
    degenerate = len(ok) - ratios.size
    if ratios.size == 0:
        return float("nan"), float("nan"), failures, degenerate
    return float(ratios.min()), float(np.median(ratios)), failures, degenerate


def stability_scan(seeds: Sequence[int] = range(50), p: ExponentTriple = DEFAULT_EXPONENTS,
                   eta: float = DEFAULT_ETA, sampler: Optional[SamplerConfig] = None,
                   rule: Optional[QuadratureRule] = None, distance: Optional[DistanceConfig] = None,
                   twist_ts: Sequence[float] = (1e-2, 3e-3, 1e-3, 3e-4, 1e-4),
                   audit: bool = True, timing: bool = True) -> ScanResult:
    """Deficit against squared orbit distance over seeded samples, plus the pure-twist path.

    The fitted constant is the minimum ratio over non-degenerate records;
    since distances are upper bounds this is a lower estimate.
    """
    sc = sampler or SamplerConfig()
    records = [scan_sample(s, p, eta, sc, rule, distance, audit, timing) for s in seeds]
    c, med, failures, degenerate = summarize(records)
    path = pure_twist_path(twist_ts, p, sc.d)
    return ScanResult(records, c, med, failures, degenerate, path, twist_prediction(p, sc.d))
