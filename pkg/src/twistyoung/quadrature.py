"""Tensor Gauss-Hermite quadrature on R^n and R^n x R^n.

A rule of scale ``s`` integrates against ``exp(-pi |x|^2 / s^2)``.  Plain
integrals use the compensated weights ``w_i exp(pi |x_i|^2 / s^2)``, folded
in once when the rule is built.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.special import erfc

from . import kernels
from .core import GaussianFactor
from .symplectic import as_twist, twist_form

MAX_POINTS = 200
DEFAULT_POINTS = 40
DEFAULT_SCALE = 0.5


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    axes: int
    scale: float = 1.0
    compensated: np.ndarray = field(repr=False, default=None)

    @property
    def points_per_axis(self) -> int:
        return len(self.nodes)

    def with_axes(self, axes: int) -> "QuadratureRule":
        return QuadratureRule(self.nodes, self.weights, axes, self.scale, self.compensated)

    def grid(self, k: Optional[int] = None):
        """Tensor grid on ``k`` axes (default: all) as ``(points, weights)``."""
        k = self.axes if k is None else k
        return _tensor_grid(self, k)


_GRID_CACHE: dict = {}


def _tensor_grid(rule: QuadratureRule, k: int):
    key = (id(rule.nodes), rule.nodes.size, k)
    hit = _GRID_CACHE.get(key)
    if hit is not None and hit[0] is rule.nodes:
        return hit[1], hit[2]
    mesh = np.meshgrid(*([rule.nodes] * k), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    wmesh = np.meshgrid(*([rule.compensated] * k), indexing="ij")
    w = np.prod(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    if len(_GRID_CACHE) > 32:
        _GRID_CACHE.clear()
    _GRID_CACHE[key] = (rule.nodes, pts, w)
    return pts, w


def build_rule(points_per_axis: int, axes: int, scale: float = 1.0) -> QuadratureRule:
    """Gauss-Hermite rule for the weight ``exp(-pi x^2 / scale^2)`` on each axis."""
    if points_per_axis < 2:
        raise ValueError("need at least two points per axis")
    if points_per_axis > MAX_POINTS:
        raise OverflowError(f"more than {MAX_POINTS} points per axis overflows the weights")
    if axes < 1 or scale <= 0:
        raise ValueError("axes and scale must be positive")
    u, w = np.polynomial.hermite.hermgauss(points_per_axis)
    # symmetrise away the last-bit asymmetry of the eigen-solver
    u = 0.5 * (u - u[::-1])
    w = 0.5 * (w + w[::-1])
    c = scale / np.sqrt(np.pi)
    nodes = c * u
    weights = c * w
    return QuadratureRule(nodes, weights, axes, float(scale), weights * np.exp(u * u))


def default_rule(axes: int, points: int = DEFAULT_POINTS, scale: float = DEFAULT_SCALE):
    return build_rule(points, axes, scale)


class GridFunction:
    """A function on ``R^dim`` given by a vectorised callback.

    ``decay = (C, lam)`` records ``|f(x)| <= C exp(-pi lam |x|^2)``.
    """

    def __init__(self, func: Callable, dim: int, decay=None, label: str = ""):
        self.func = func
        self.dim = int(dim)
        self.decay = decay
        self.label = label

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"expected points in R^{self.dim}, got {x.shape}")
        return np.asarray(self.func(x), dtype=complex) * np.ones(x.shape[:-1])

    def __repr__(self):
        return f"GridFunction({self.label or self.func!r}, dim={self.dim})"

    @classmethod
    def from_gaussian(cls, F: GaussianFactor) -> "GridFunction":
        lam = float(np.min(np.linalg.eigvalsh(F.quad.real)))
        # completing the square bounds the shifted Gaussian by a centred one
        C = abs(F.amplitude) * np.exp(np.pi * lam * (F.center @ F.center))
        return cls(F, F.dim, decay=(C * 2.0 ** (F.dim), lam / 2.0), label="gaussian")

    @classmethod
    def zero(cls, dim: int) -> "GridFunction":
        return cls(lambda x: np.zeros(x.shape[:-1], dtype=complex), dim, (0.0, 1.0), "0")

    def _check(self, other):
        if other.dim != self.dim:
            raise DimensionMismatch("functions live on different spaces")

    def __add__(self, other):
        if not isinstance(other, GridFunction):
            return NotImplemented
        self._check(other)
        decay = None
        if self.decay and other.decay:
            decay = (self.decay[0] + other.decay[0], min(self.decay[1], other.decay[1]))
        return GridFunction(lambda x: self.func(x) + other.func(x), self.dim, decay, "sum")

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        if isinstance(c, GridFunction):
            self._check(c)
            return GridFunction(lambda x: self.func(x) * c.func(x), self.dim, None, "product")
        c = complex(c)
        decay = (abs(c) * self.decay[0], self.decay[1]) if self.decay else None
        return GridFunction(lambda x: c * self.func(x), self.dim, decay, self.label)

    __rmul__ = __mul__

    def __neg__(self):
        return (-1.0) * self

    def real(self) -> "GridFunction":
        return GridFunction(lambda x: np.real(self.func(x)), self.dim, self.decay, "re")

    def imag(self) -> "GridFunction":
        return GridFunction(lambda x: np.imag(self.func(x)), self.dim, self.decay, "im")

    def abs(self) -> "GridFunction":
        return GridFunction(lambda x: np.abs(self.func(x)), self.dim, self.decay, "abs")


def as_grid_function(f) -> GridFunction:
    if isinstance(f, GridFunction):
        return f
    if isinstance(f, GaussianFactor):
        return GridFunction.from_gaussian(f)
    raise TypeError(f"cannot treat {type(f).__name__} as a grid function")


def _require_axes(rule: QuadratureRule, axes: int):
    if rule.axes != axes:
        raise DimensionMismatch(f"rule covers {rule.axes} axes, {axes} required")


@dataclass
class FormValue:
    value: complex
    truncation_bound: Optional[float]

    def __complex__(self):
        return self.value


class FormEvaluator:
    """Evaluates the trilinear form for many slot fillings on one rule and twist.

    Sampled values are cached per function object, so expansions that reuse
    slots only evaluate each function once.
    """

    def __init__(self, rule: QuadratureRule, A=None, d: Optional[int] = None):
        if A is None:
            if d is None:
                if rule.axes % 4:
                    raise DimensionMismatch("rule must cover 4d axes")
                d = rule.axes // 4
            A = np.zeros((2 * d, 2 * d))
        A = as_twist(A)
        _require_axes(rule, 4 * A.d)
        self.rule = rule
        self.d = A.d
        self.n = 2 * A.d
        self.B = twist_form(A).entries
        self.points, self.weights = rule.grid(self.n)
        self.Z = np.ascontiguousarray(self.points @ self.B.T)
        self._sums = None
        self._cache1: dict = {}
        self._cache3: dict = {}

    def _pair_points(self):
        if self._sums is None:
            P = self.points
            self._sums = (P[:, None, :] + P[None, :, :]).reshape(-1, self.n)
        return self._sums

    def _samples(self, f):
        f = as_grid_function(f)
        if f.dim != self.n:
            raise DimensionMismatch(f"function on R^{f.dim}, form needs R^{self.n}")
        key = id(f)
        hit = self._cache1.get(key)
        if hit is None:
            hit = (f, np.ascontiguousarray(self.weights * f(self.points)))
            self._cache1[key] = hit
        return hit[1]

    def _pair_samples(self, f):
        f = as_grid_function(f)
        if f.dim != self.n:
            raise DimensionMismatch(f"function on R^{f.dim}, form needs R^{self.n}")
        key = id(f)
        hit = self._cache3.get(key)
        if hit is None:
            N = self.points.shape[0]
            vals = f(self._pair_points()).reshape(N, N)
            hit = (f, np.ascontiguousarray(vals, dtype=complex))
            self._cache3[key] = hit
        return hit[1]

    def value(self, f1, f2, f3, mode: str = "twisted") -> complex:
        code = kernels.MODES[mode]
        if code != 0 and not np.any(self.B):
            if code in (2, 3, 4):
                return 0j
            code = 0
        u = self._samples(f1)
        v = self._samples(f2)
        F3 = self._pair_samples(f3)
        return kernels.twisted_sum(u, v, F3, self.points, self.Z, code)


def _truncation_bound(fs, rule, n):
    decays = [f.decay for f in fs]
    if any(dc is None for dc in decays):
        return None
    R = float(np.max(np.abs(rule.nodes)))
    (C1, l1), (C2, l2), (C3, _) = decays
    inside = 1.0
    mass = 1.0
    for lam in (l1, l2):
        inside *= (1.0 - erfc(np.sqrt(np.pi * lam) * R)) ** n
        mass *= lam ** (-n / 2.0)
    return float(C1 * C2 * C3 * mass * (1.0 - inside))


def eval_form_numeric(f1, f2, f3, A, rule: QuadratureRule, return_bound: bool = False):
    """Quadrature value of ``iint f1(x) f2(y) f3(x+y) exp(i sigma(Ax, Ay)) dx dy``.

    With ``return_bound`` a :class:`FormValue` is returned whose
    ``truncation_bound`` estimates the mass outside the node box from the
    decay metadata (``None`` when some input carries none).
    """
    fs = [as_grid_function(f) for f in (f1, f2, f3)]
    n = fs[0].dim
    if any(f.dim != n for f in fs):
        raise DimensionMismatch("slot functions live on different spaces")
    if A is None:
        A = np.zeros((n, n))
    A = as_twist(A)
    if 2 * A.d != n:
        raise DimensionMismatch("twist matrix does not match the function dimension")
    val = FormEvaluator(rule, A).value(*fs)
    if return_bound:
        return FormValue(val, _truncation_bound(fs, rule, n))
    return val


def lp_norm_numeric(f, p: float, rule: QuadratureRule) -> float:
    if p < 1:
        raise ValueError("p must be at least 1")
    f = as_grid_function(f)
    _require_axes(rule, f.dim)
    P, W = rule.grid()
    vals = np.abs(f(P))
    return float(np.sum(W * vals**p) ** (1.0 / p))


def weighted_inner_product(f, w, rule: QuadratureRule) -> complex:
    """``sum_i W_i f(x_i) w(x_i)``; no conjugation."""
    f = as_grid_function(f)
    w = as_grid_function(w)
    if f.dim != w.dim:
        raise DimensionMismatch("functions live on different spaces")
    _require_axes(rule, f.dim)
    P, W = rule.grid()
    return complex(np.sum(W * f(P) * w(P)))
