"""Orthonormal polynomials for the weight ``exp(-2 pi t x^2)`` and the
orthogonality conditions that fix the balanced representative of an orbit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import gamma

import numpy as np

from .core import ExponentTriple, conjugate_exponent
from .quadrature import DimensionMismatch, QuadratureRule, as_grid_function

MAX_DEGREE = 12


def tau(pj: float) -> float:
    """Weight parameter ``p p' / 2`` attached to exponent ``p``."""
    return 0.5 * pj * conjugate_exponent(pj)


@dataclass(frozen=True, eq=False)
class WeightedBasis:
    """``P_0 .. P_N`` with ``P_n e^{-t pi x^2}`` orthonormal in ``L^2(R)``.

    ``coeffs[n]`` holds the ascending monomial coefficients of ``P_n``.
    """

    t: float
    coeffs: np.ndarray

    @property
    def N(self) -> int:
        return self.coeffs.shape[0] - 1

    def values(self, x) -> np.ndarray:
        """All ``P_n(x)``, stacked on a new last axis, by the three-term recurrence."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (self.N + 1,))
        c = np.sqrt(2 * np.pi * self.t)
        out[..., 0] = (2 * self.t) ** 0.25
        if self.N >= 1:
            out[..., 1] = np.sqrt(2.0) * c * x * out[..., 0]
        for n in range(1, self.N):
            out[..., n + 1] = (
                np.sqrt(2.0 / (n + 1)) * c * x * out[..., n]
                - np.sqrt(n / (n + 1)) * out[..., n - 1]
            )
        return out

    def __call__(self, n: int, x) -> np.ndarray:
        if not 0 <= n <= self.N:
            raise IndexError(f"degree {n} outside 0..{self.N}")
        return self.values(x)[..., n]


def basis(t: float, N: int) -> WeightedBasis:
    """Build ``P_0^{(t)} .. P_N^{(t)}`` from the three-term recurrence.

    In the variable ``u = sqrt(2 pi t) x`` these are rescaled orthonormal
    Hermite polynomials, so the recurrence is exact and well conditioned.
    """
    if t <= 0:
        raise ValueError("weight parameter must be positive")
    if not 0 <= N <= MAX_DEGREE:
        raise ValueError(f"degree must lie in 0..{MAX_DEGREE}")
    c = np.sqrt(2 * np.pi * t)
    C = np.zeros((N + 1, N + 1))
    C[0, 0] = (2 * t) ** 0.25
    if N >= 1:
        C[1, 1] = np.sqrt(2.0) * c * C[0, 0]
    for n in range(1, N):
        C[n + 1, 1:] += np.sqrt(2.0 / (n + 1)) * c * C[n, :-1]
        C[n + 1] -= np.sqrt(n / (n + 1)) * C[n - 1]
    return WeightedBasis(float(t), C)


def gaussian_moment(k: int, t: float) -> float:
    """``int x^k exp(-2 pi t x^2) dx``."""
    if k % 2:
        return 0.0
    m = k // 2
    return gamma(m + 0.5) / (2 * np.pi * t) ** (m + 0.5)


def basis_from_moments(t: float, N: int) -> WeightedBasis:
    """Gram-Schmidt on monomials with exact Gaussian moments (diagnostic twin of :func:`basis`)."""
    H = np.array([[gaussian_moment(i + j, t) for j in range(N + 1)] for i in range(N + 1)])
    L = np.linalg.cholesky(H)
    # rows of inv(L) are the orthonormal polynomials; diag(L) > 0 fixes the sign
    return WeightedBasis(float(t), np.linalg.inv(L))


def eval_tensor(b: WeightedBasis, alpha, x) -> np.ndarray:
    """``prod_k P_{alpha_k}(x_k)`` along the last axis of ``x``."""
    alpha = tuple(int(a) for a in alpha)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != len(alpha):
        raise DimensionMismatch("multi-index length differs from the point dimension")
    if max(alpha, default=0) > b.N:
        raise IndexError(f"multi-index {alpha} exceeds basis degree {b.N}")
    vals = b.values(x)
    out = np.ones(x.shape[:-1])
    for k, a in enumerate(alpha):
        out = out * vals[..., k, a]
    return out


def eval_expansion(b: WeightedBasis, alphas, coeffs, x) -> np.ndarray:
    """``sum_k coeffs[k] prod_i P_{alphas[k]_i}(x_i)`` with one recurrence pass."""
    x = np.asarray(x, dtype=float)
    vals = b.values(x)
    alphas = np.asarray(alphas, dtype=int).reshape(len(coeffs), x.shape[-1])
    out = np.zeros(x.shape[:-1], dtype=np.result_type(np.asarray(coeffs), float))
    for c, a in zip(coeffs, alphas):
        term = vals[..., 0, a[0]]
        for k in range(1, len(a)):
            term = term * vals[..., k, a[k]]
        out += c * term
    return out


def multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    """All ``alpha`` of length ``n`` with ``|alpha| = order``, ascending lexicographic."""
    return sorted(a for a in itertools.product(range(order + 1), repeat=n) if sum(a) == order)


def condition_labels(d: int) -> list[tuple[int, tuple[int, ...], str]]:
    """Index set of the orthogonality conditions as ``(j, alpha, part)``.

    Ordered by slot ``j``, then ``|alpha|``, then ``alpha`` lexicographically,
    with the real part before the imaginary part.  Slots are 0-based.
    """
    n = 2 * d
    zero = (0,) * n
    labels = []
    for j in range(3):
        labels.append((j, zero, "re"))
        labels.append((j, zero, "im"))
        if j < 2:
            labels.extend((j, a, "re") for a in multi_indices(n, 1))
        else:
            labels.extend((j, a, "im") for a in multi_indices(n, 1))
            labels.extend((j, a, "re") for a in multi_indices(n, 2))
    return labels


def condition_count(d: int) -> int:
    return 6 + 4 * d + 2 * d + d * (2 * d + 1)


class ConditionProjector:
    """Pairs perturbations with ``P_alpha^{(tau_j)} g_j^{p_j - 1}`` on a fixed rule."""

    def __init__(self, p: ExponentTriple, d: int, rule: QuadratureRule):
        n = 2 * d
        if rule.axes != n:
            raise DimensionMismatch(f"rule covers {rule.axes} axes, {n} required")
        self.p = p
        self.d = d
        self.rule = rule
        self.labels = condition_labels(d)
        self.points, self.weights = rule.grid()
        r2 = np.sum(self.points**2, axis=-1)
        self.tests = []
        for j, pj in enumerate(p.ps):
            bj = basis(tau(pj), 2)
            rows = [lab for lab in self.labels if lab[0] == j]
            # g_j^{p_j - 1} = exp(-pi p_j |x|^2) since p_j'(p_j - 1) = p_j
            gw = self.weights * np.exp(-np.pi * pj * r2)
            T = np.array([eval_tensor(bj, a, self.points) * gw for _, a, _ in rows])
            self.tests.append((rows, T))

    def __call__(self, f_triple) -> np.ndarray:
        fs = [as_grid_function(f) for f in f_triple]
        if len(fs) != 3 or any(f.dim != 2 * self.d for f in fs):
            raise DimensionMismatch("expected three perturbations on R^{2d}")
        return self.project_values([f(self.points) for f in fs])

    def project_values(self, values) -> np.ndarray:
        """Same as calling, with the perturbations already sampled on the grid."""
        out = []
        for vals, (rows, T) in zip(values, self.tests):
            pairing = T @ vals
            out.extend(pairing[i].real if part == "re" else pairing[i].imag
                       for i, (_, _, part) in enumerate(rows))
        return np.array(out)


def orthogonality_vector(F, p: ExponentTriple, rule: QuadratureRule) -> np.ndarray:
    """Stacked pairings of the perturbation triple ``F`` in :func:`condition_labels` order."""
    fs = [as_grid_function(f) for f in F]
    d = fs[0].dim // 2
    return ConditionProjector(p, d, rule)(fs)
