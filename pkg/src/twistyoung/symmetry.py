"""Symmetries of the twisted form ``T_A``: action, composition, ``Phi`` and orbit distance.

An element ``s = (a, xi, v1, v2, psi)`` acts on ``(f, A)`` by first composing
with ``psi`` (``A -> A psi``), then the translation/modulation mix with the
new form ``B' = psi^T A^T J A psi``, then modulation and scaling::

    h1(x) = a1 exp(i xi.x) exp(i x.B' v2)  f1(psi(x + v1))
    h2(x) = a2 exp(i xi.x) exp(-i x.B' v1) f2(psi(x + v2))
    h3(x) = a3 exp(-i xi.x)                f3(psi(x + v1 + v2))
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import minimize

from .core import (
    ExponentTriple,
    GaussianFactor,
    GaussianTriple,
    eval_form_gaussian,
    lp_norm_gaussian,
)
from .quadrature import (
    DEFAULT_POINTS,
    DEFAULT_SCALE,
    GridFunction,
    QuadratureRule,
    as_grid_function,
    build_rule,
    eval_form_numeric,
    lp_norm_numeric,
)
from .symplectic import TwistMatrix, as_twist, twist_form

DET_GUARD = 1e-12


@dataclass(frozen=True, eq=False)
class SymmetryElement:
    scalars: tuple[complex, complex, complex]
    xi: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        sc = tuple(complex(c) for c in self.scalars)
        if len(sc) != 3 or min(abs(c) for c in sc) <= 0:
            raise ValueError("scalars must be three nonzero complex numbers")
        psi = np.array(self.psi, dtype=float)
        n = psi.shape[0]
        if psi.shape != (n, n) or n % 2:
            raise ValueError("psi must be an even square matrix")
        if abs(np.linalg.det(psi)) < DET_GUARD:
            raise ValueError("psi is singular")
        object.__setattr__(self, "scalars", sc)
        object.__setattr__(self, "psi", psi)
        for name in ("xi", "v1", "v2"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float).reshape(n))

    @property
    def dim(self) -> int:
        return self.psi.shape[0]

    @classmethod
    def identity(cls, d: int) -> "SymmetryElement":
        n = 2 * d
        z = np.zeros(n)
        return cls((1, 1, 1), z, z, z, np.eye(n))

    @classmethod
    def scaling(cls, a, b, c, d: int) -> "SymmetryElement":
        e = cls.identity(d)
        return cls((a, b, c), e.xi, e.v1, e.v2, e.psi)

    @classmethod
    def modulation(cls, xi) -> "SymmetryElement":
        xi = np.asarray(xi, dtype=float)
        z = np.zeros_like(xi)
        return cls((1, 1, 1), xi, z, z, np.eye(len(xi)))

    @classmethod
    def translation(cls, v1, v2) -> "SymmetryElement":
        v1 = np.asarray(v1, dtype=float)
        z = np.zeros_like(v1)
        return cls((1, 1, 1), z, v1, v2, np.eye(len(v1)))

    @classmethod
    def linear(cls, psi) -> "SymmetryElement":
        psi = np.asarray(psi, dtype=float)
        z = np.zeros(psi.shape[0])
        return cls((1, 1, 1), z, z, z, psi)

    def replace(self, **kw) -> "SymmetryElement":
        vals = dict(scalars=self.scalars, xi=self.xi, v1=self.v1, v2=self.v2, psi=self.psi)
        vals.update(kw)
        return SymmetryElement(**vals)


Functions = Union[GaussianTriple, tuple]


@dataclass(frozen=True, eq=False)
class OrbitPoint:
    functions: Functions
    A: TwistMatrix = field(default=None)

    def __post_init__(self):
        fs = self.functions
        if not isinstance(fs, GaussianTriple):
            fs = tuple(as_grid_function(f) for f in fs)
            if len(fs) != 3:
                raise ValueError("an orbit point carries three functions")
        n = fs[0].dim
        if any(f.dim != n for f in fs):
            raise ValueError("functions of an orbit point share one space")
        A = np.zeros((n, n)) if self.A is None else self.A
        A = as_twist(A)
        if 2 * A.d != n:
            raise ValueError("twist matrix does not match the function dimension")
        object.__setattr__(self, "functions", fs)
        object.__setattr__(self, "A", A)

    @property
    def d(self) -> int:
        return self.A.d

    @property
    def is_gaussian(self) -> bool:
        return isinstance(self.functions, GaussianTriple)

    def grid_functions(self) -> tuple[GridFunction, GridFunction, GridFunction]:
        return tuple(as_grid_function(f) for f in self.functions)


def _gaussian_image(F: GaussianFactor, amp, mod, psi, v) -> GaussianFactor:
    """``amp * exp(i mod.x) * F(psi(x + v))`` as a Gaussian."""
    psinv = np.linalg.inv(psi)
    quad = psi.T @ F.quad @ psi
    center = psinv @ F.center - v
    phase = psi.T @ F.phase
    factor = np.exp(1j * (phase @ v))
    return GaussianFactor(F.amplitude * amp * factor, quad, center, phase + mod)


def _grid_image(f: GridFunction, amp, mod, psi, v) -> GridFunction:
    amp = complex(amp)
    mod = np.array(mod, dtype=float)
    psiT = np.array(psi.T)
    v = np.array(v, dtype=float)

    def h(x):
        return amp * np.exp(1j * (x @ mod)) * f.func((x + v) @ psiT)

    return GridFunction(h, f.dim, None, "image")


def _action_data(s: SymmetryElement, A: TwistMatrix):
    Anew = TwistMatrix(A.entries @ s.psi)
    Bn = twist_form(Anew).entries
    a1, a2, a3 = s.scalars
    return Anew, [
        (a1, s.xi + Bn @ s.v2, s.v1),
        (a2, s.xi - Bn @ s.v1, s.v2),
        (a3, -s.xi, s.v1 + s.v2),
    ]


def apply_symmetry(s: SymmetryElement, pt: OrbitPoint) -> OrbitPoint:
    if s.dim != 2 * pt.d:
        raise ValueError("symmetry element and point have different dimensions")
    Anew, data = _action_data(s, pt.A)
    if pt.is_gaussian:
        fs = GaussianTriple(
            tuple(_gaussian_image(F, a, m, s.psi, v) for F, (a, m, v) in zip(pt.functions, data))
        )
    else:
        fs = tuple(_grid_image(f, a, m, s.psi, v) for f, (a, m, v) in zip(pt.functions, data))
    return OrbitPoint(fs, Anew)


def compose(s1: SymmetryElement, s2: SymmetryElement, A=None) -> SymmetryElement:
    """Element acting as ``s2`` followed by ``s1`` on points with twist ``A``.

    Moving a translation past the mix modulation leaves a constant phase that
    depends on the final form ``B = psi^T A^T J A psi``; it is absorbed into
    the scalars, which is why ``A`` is needed (``None`` means untwisted).
    """
    n = s1.dim
    A = np.zeros((n, n)) if A is None else as_twist(A).entries
    chi = s1.psi
    chinv = np.linalg.inv(chi)
    psi = s2.psi @ chi
    J = twist_form(TwistMatrix(A @ psi)).entries
    xi, v1, v2 = s2.xi, s2.v1, s2.v2
    w1, w2 = s1.v1, s1.v2
    u1, u2 = chinv @ v1, chinv @ v2
    a1, a2, a3 = s2.scalars
    b1, b2, b3 = s1.scalars
    c1 = b1 * a1 * np.exp(1j * (xi @ (chi @ w1) + w1 @ (J @ u2)))
    c2 = b2 * a2 * np.exp(1j * (xi @ (chi @ w2) - w2 @ (J @ u1)))
    c3 = b3 * a3 * np.exp(-1j * (xi @ (chi @ (w1 + w2))))
    return SymmetryElement((c1, c2, c3), s1.xi + chi.T @ xi, w1 + u1, w2 + u2, psi)


def inverse(s: SymmetryElement, A=None) -> SymmetryElement:
    """Element undoing ``s`` on points with twist ``A``."""
    psinv = np.linalg.inv(s.psi)
    t = SymmetryElement((1, 1, 1), -psinv.T @ s.xi, -s.psi @ s.v1, -s.psi @ s.v2, psinv)
    c = compose(t, s, A).scalars
    return t.replace(scalars=tuple(1.0 / cj for cj in c))


def norm_rule(rule: QuadratureRule, d: int) -> QuadratureRule:
    return rule.with_axes(2 * d)


def form_rule(rule: QuadratureRule, d: int) -> QuadratureRule:
    return rule.with_axes(4 * d)


def phi(pt: OrbitPoint, p: ExponentTriple, rule: Optional[QuadratureRule] = None) -> complex:
    """``T_A(f) / prod_j ||f_j||_{p_j}``; closed form for Gaussians unless ``rule`` is given."""
    if pt.is_gaussian and rule is None:
        norms = [lp_norm_gaussian(F, pj) for F, pj in zip(pt.functions, p.ps)]
        if min(norms) == 0:
            raise ValueError("Phi is undefined for a zero function")
        return eval_form_gaussian(pt.functions, pt.A) / np.prod(norms)
    if rule is None:
        rule = build_rule(DEFAULT_POINTS, 4 * pt.d, DEFAULT_SCALE)
    fs = pt.grid_functions()
    nrule = norm_rule(rule, pt.d)
    norms = [lp_norm_numeric(f, pj, nrule) for f, pj in zip(fs, p.ps)]
    if min(norms) == 0:
        raise ValueError("Phi is undefined for a zero function")
    return eval_form_numeric(*fs, pt.A, form_rule(rule, pt.d)) / np.prod(norms)


# ---------------------------------------------------------------- orbit distance


@dataclass
class DistanceConfig:
    starts: int = 8
    seed: int = 0
    maxfev: int = 3000
    spread: float = 0.05
    psi_radius: float = 0.5
    points: int = DEFAULT_POINTS
    scale: float = DEFAULT_SCALE


@dataclass
class OrbitDistance:
    dist_sq: float
    element: SymmetryElement
    identity_value: float
    converged: bool
    nfev: int
    start_values: list

    @property
    def dist(self) -> float:
        return float(np.sqrt(max(self.dist_sq, 0.0)))

    def __iter__(self):
        return iter((self.dist, self.element))


def _clip_psi(Phi: np.ndarray, radius: float) -> np.ndarray:
    nrm = np.linalg.norm(Phi, 2)
    if nrm > radius:
        Phi = Phi * (radius / nrm)
    return np.eye(Phi.shape[0]) + Phi


class _Chart:
    """Flat coordinates ``(log|a|, arg a, xi, v1, v2, psi - I)`` around an element."""

    def __init__(self, n: int, radius: float):
        self.n = n
        self.radius = radius
        self.size = 6 + 3 * n + n * n

    def element(self, theta) -> SymmetryElement:
        n = self.n
        la, ph = theta[:3], theta[3:6]
        sc = tuple(np.exp(la + 1j * ph))
        xi = theta[6 : 6 + n]
        v1 = theta[6 + n : 6 + 2 * n]
        v2 = theta[6 + 2 * n : 6 + 3 * n]
        Phi = theta[6 + 3 * n :].reshape(n, n)
        return SymmetryElement(sc, xi, v1, v2, _clip_psi(Phi, self.radius))

    def coords(self, s: SymmetryElement) -> np.ndarray:
        sc = np.array(s.scalars)
        return np.concatenate(
            [np.log(np.abs(sc)), np.angle(sc), s.xi, s.v1, s.v2, (s.psi - np.eye(self.n)).ravel()]
        )


def distance_objective(pt: OrbitPoint, p: ExponentTriple, rule: QuadratureRule, profile: bool = False):
    """Callable for ``max_j ||h_j - g_j||_{p_j}^2 + ||B'||^2`` with ``(h, A') = s(pt)``.

    With ``profile`` the callable returns ``(value, element)`` where the
    scalars of ``s`` are multiplied by ``<g_j, g_j^{p_j-1}> / <h_j, g_j^{p_j-1}>``
    computed with unit scalars; any scalar choice gives a valid orbit point,
    and this one removes most of the amplitude search.
    """
    d = pt.d
    nrule = norm_rule(rule, d)
    P, W = nrule.grid()
    gvals = [GaussianFactor.standard(pj, d)(P) for pj in p.ps]
    duals = [W * np.exp(-np.pi * pj * np.sum(P**2, axis=-1)) for pj in p.ps]
    targets = [np.sum(dw * gv) for dw, gv in zip(duals, gvals)]

    def evaluate(s: SymmetryElement):
        if profile:
            unit = s.replace(scalars=(1, 1, 1))
            img = apply_symmetry(unit, pt)
            vals = [f(P) for f in img.functions]
            prof = []
            for dw, t, v in zip(duals, targets, vals):
                m = np.sum(dw * v)
                prof.append(t / m if abs(m) > 1e-300 else 1.0)
            sc = tuple(c * q for c, q in zip(s.scalars, prof))
            vals = [c * v for c, v in zip(sc, vals)]
            s = s.replace(scalars=sc)
        else:
            img = apply_symmetry(s, pt)
            vals = [f(P) for f in img.functions]
        worst = 0.0
        for v, gv, pj in zip(vals, gvals, p.ps):
            diff = np.abs(v - gv)
            worst = max(worst, float(np.sum(W * diff**pj) ** (2.0 / pj)))
        value = worst + twist_form(img.A).norm ** 2
        return (value, s) if profile else value

    return evaluate


def orbit_distance(
    pt: OrbitPoint,
    p: ExponentTriple,
    config: Optional[DistanceConfig] = None,
    seed_element: Optional[SymmetryElement] = None,
) -> OrbitDistance:
    """Upper bound for the squared orbit distance to ``(g, 0)``.

    Multistart Nelder-Mead over the chart of :class:`_Chart`, with scalars
    profiled as in :func:`distance_objective`.  Start 0 sits at
    ``seed_element`` (identity by default); later starts perturb it with
    standard deviation ``config.spread``.  The result never exceeds the
    objective at the identity.
    """
    cfg = config or DistanceConfig()
    d = pt.d
    n = 2 * d
    rule = build_rule(cfg.points, 2 * d, cfg.scale)
    plain = distance_objective(pt, p, rule)
    profiled = distance_objective(pt, p, rule, profile=True)
    chart = _Chart(n, cfg.psi_radius)
    ident = SymmetryElement.identity(d)
    ident_val = plain(ident)
    best_val, best_el = ident_val, ident
    if seed_element is not None:
        seed_val = plain(seed_element)
        if seed_val < best_val:
            best_val, best_el = seed_val, seed_element
    base = chart.coords(seed_element if seed_element is not None else ident)
    base[:6] = 0.0

    def f(theta):
        try:
            return profiled(chart.element(theta))[0]
        except ValueError:
            return np.inf

    rng = np.random.default_rng(cfg.seed)
    step = max(cfg.spread, 1e-3)
    converged = True
    nfev = 0
    start_values = []
    for k in range(cfg.starts):
        x0 = base if k == 0 else base + cfg.spread * rng.standard_normal(chart.size)
        simplex = np.vstack([x0, x0 + step * np.eye(chart.size)])
        res = minimize(
            f,
            x0,
            method="Nelder-Mead",
            options={
                "maxfev": cfg.maxfev,
                "xatol": 1e-10,
                "fatol": 1e-18,
                "adaptive": True,
                "initial_simplex": simplex,
            },
        )
        nfev += int(res.nfev)
        converged &= bool(res.success)
        val, el = profiled(chart.element(res.x))
        start_values.append(float(val))
        if val < best_val:
            best_val, best_el = float(val), el
    return OrbitDistance(best_val, best_el, ident_val, converged, nfev, start_values)
