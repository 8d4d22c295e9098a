"""Exponent bookkeeping, the sharp constant and closed-form Gaussian evaluation.

All Gaussians use pi-normalised exponents::

    f(x) = amplitude * exp(-pi (x - center)^T quad (x - center)) * exp(i phase . x)

so that the standard maximiser for exponent ``p`` is ``exp(-pi p' |x|^2)`` with
``quad = p' I``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
ADMISSIBILITY_TOL = 1e-12


class InadmissibleExponents(ValueError):
    """Raised for exponent triples outside (1, 2]^3 or off the Young line."""


class NotSymmetricError(ValueError):
    pass


class NotPositiveDefiniteError(ValueError):
    pass


def conjugate_exponent(p: float) -> float:
    """Return ``p / (p - 1)``; the Hoelder conjugate of ``p > 1``."""
    p = float(p)
    if not p > 1.0:
        raise ValueError(f"conjugate exponent needs p > 1, got {p!r}")
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class ExponentTriple:
    """Young exponents with ``1/p1 + 1/p2 + 1/p3 = 2``.

    ``p_j = 2`` is accepted; :attr:`boundary` reports it, since the stability
    estimate is stated on compact subsets of the open cube ``(1, 2)^3``.
    """

    p1: float
    p2: float
    p3: float
    tol: float = field(default=ADMISSIBILITY_TOL, compare=False, repr=False)

    def __post_init__(self):
        for p in self.ps:
            if not (1.0 < p <= 2.0):
                raise InadmissibleExponents(f"exponent {p!r} outside (1, 2]")
        excess = sum(1.0 / p for p in self.ps) - 2.0
        if abs(excess) > self.tol:
            raise InadmissibleExponents(
                f"sum of reciprocals differs from 2 by {excess:.3e}"
            )

    @classmethod
    def of(cls, ps: Iterable[float]) -> "ExponentTriple":
        vals = [float(p) for p in ps]
        if len(vals) != 3:
            raise InadmissibleExponents(f"need three exponents, got {len(vals)}")
        return cls(*vals)

    @classmethod
    def from_pair(cls, p1: float, p2: float) -> "ExponentTriple":
        """Complete ``(p1, p2)`` to an admissible triple."""
        r3 = 2.0 - 1.0 / p1 - 1.0 / p2
        if r3 <= 0:
            raise InadmissibleExponents("no admissible third exponent")
        return cls(p1, p2, 1.0 / r3)

    @property
    def ps(self) -> tuple[float, float, float]:
        return (self.p1, self.p2, self.p3)

    @property
    def conjugates(self) -> tuple[float, float, float]:
        return tuple(conjugate_exponent(p) for p in self.ps)

    @property
    def boundary(self) -> bool:
        return any(p == 2.0 for p in self.ps)

    @property
    def interior(self) -> bool:
        return not self.boundary

    def __iter__(self):
        return iter(self.ps)

    def __getitem__(self, j: int) -> float:
        return self.ps[j]


DEFAULT_EXPONENTS = ExponentTriple(4 / 3, 4 / 3, 2.0)
INTERIOR_EXPONENTS = ExponentTriple(8 / 5, 8 / 5, 4 / 3)


def sharp_constant(p: ExponentTriple, n: int) -> float:
    """Optimal constant of the trilinear Young form on ``R^n``.

    This is the Gaussian quotient ``T(g) / prod ||g_j||_{p_j}``, which equals
    ``prod_j (p_j^{1/p_j} / p_j'^{1/p_j'})^{n/2}``.
    """
    if n < 1:
        raise ValueError("ambient dimension must be positive")
    logc = 0.0
    for pj in p.ps:
        q = conjugate_exponent(pj)
        logc += np.log(pj) / pj - np.log(q) / q
    return float(np.exp(0.5 * n * logc))


def _check_symmetric(M: np.ndarray, tol: float = SYMMETRY_TOL) -> None:
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {M.shape}")
    scale = 1.0 + np.max(np.abs(M), initial=0.0)
    if np.max(np.abs(M - M.T), initial=0.0) > tol * scale:
        raise NotSymmetricError("matrix is not symmetric")


def gaussian_integral(M, b=None) -> complex:
    """Integral of ``exp(-pi z^T M z + 2 pi b . z)`` over ``R^k``.

    ``M`` is complex symmetric with positive definite real part.  The value is
    ``det(M)^{-1/2} exp(pi b^T M^{-1} b)`` with the square-root branch obtained
    by continuing from ``Re(M)`` along ``Re(M) + s i Im(M)``, ``s in [0, 1]``.
    Writing ``Re(M) = L L^T`` the eigenvalues of ``M`` relative to ``Re(M)``
    are ``1 + i mu_k`` with real ``mu_k``; none of them crosses the negative
    axis along the path, so the principal root of each factor is the
    continued one.
    """
    M = np.asarray(M, dtype=complex)
    if M.ndim == 0:
        M = M.reshape(1, 1)
    _check_symmetric(M)
    k = M.shape[0]
    b = np.zeros(k, dtype=complex) if b is None else np.asarray(b, dtype=complex)
    if b.shape != (k,):
        raise ValueError(f"linear term has shape {b.shape}, expected ({k},)")
    R = 0.5 * (M.real + M.real.T)
    S = 0.5 * (M.imag + M.imag.T)
    try:
        L = np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError("real part is not positive definite") from None
    Linv = np.linalg.inv(L)
    K = Linv @ S @ Linv.T
    mu = np.linalg.eigvalsh(0.5 * (K + K.T))
    log_det_half = np.sum(np.log(np.diag(L))) + 0.5 * np.sum(np.log(1.0 + 1j * mu))
    quad = b @ np.linalg.solve(M, b) if np.any(b) else 0.0
    return complex(np.exp(-log_det_half + np.pi * quad))


@dataclass(frozen=True, eq=False)
class GaussianFactor:
    amplitude: complex
    quad: np.ndarray
    center: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        quad = np.array(self.quad, dtype=complex)
        n = quad.shape[0]
        center = np.array(self.center, dtype=float).reshape(n)
        phase = np.array(self.phase, dtype=float).reshape(n)
        _check_symmetric(quad)
        quad = 0.5 * (quad + quad.T)
        if np.min(np.linalg.eigvalsh(quad.real)) <= 0:
            raise NotPositiveDefiniteError("Gaussian quad has non-PD real part")
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        object.__setattr__(self, "quad", quad)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "phase", phase)

    @classmethod
    def standard(cls, pj: float, d: int) -> "GaussianFactor":
        n = 2 * d
        return cls(1.0, conjugate_exponent(pj) * np.eye(n), np.zeros(n), np.zeros(n))

    @property
    def dim(self) -> int:
        return self.quad.shape[0]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = x - self.center if np.any(self.center) else x
        Qr = self.quad.real
        expo = np.einsum("...i,...i->...", y @ Qr, y)
        expo *= -np.pi
        if np.any(self.quad.imag) or np.any(self.phase):
            arg = x @ self.phase
            if np.any(self.quad.imag):
                arg -= np.pi * np.einsum("...i,...i->...", y @ self.quad.imag, y)
            return self.amplitude * np.exp(expo + 1j * arg)
        return self.amplitude * np.exp(expo)

    def scaled(self, c: complex) -> "GaussianFactor":
        return GaussianFactor(self.amplitude * c, self.quad, self.center, self.phase)

    def linear_coefficients(self):
        """Return ``(Q, beta, const)`` with ``f = exp(-pi x^T Q x + 2 pi beta.x + const)``."""
        Q = self.quad
        beta = Q @ self.center + 1j * self.phase / (2 * np.pi)
        const = np.log(self.amplitude + 0j) - np.pi * (self.center @ Q @ self.center)
        return Q, beta, const


@dataclass(frozen=True, eq=False)
class GaussianTriple:
    factors: tuple[GaussianFactor, GaussianFactor, GaussianFactor]

    def __post_init__(self):
        fs = tuple(self.factors)
        if len(fs) != 3:
            raise ValueError("a triple needs three factors")
        n = fs[0].dim
        if n % 2 or any(f.dim != n for f in fs):
            raise ValueError("factors must share an even ambient dimension")
        object.__setattr__(self, "factors", fs)

    @classmethod
    def standard(cls, p: ExponentTriple, d: int) -> "GaussianTriple":
        return cls(tuple(GaussianFactor.standard(pj, d) for pj in p.ps))

    @property
    def d(self) -> int:
        return self.factors[0].dim // 2

    def __getitem__(self, j: int) -> GaussianFactor:
        return self.factors[j]

    def __iter__(self):
        return iter(self.factors)


def form_quadratic_data(G: GaussianTriple, A=None):
    """Assemble the joint exponent of ``G1(x) G2(y) G3(x+y) e^{i x^T B y}``.

    Returns ``(M, beta, const)`` on ``z = (x, y)`` with ``B = A^T J A``.
    """
    n = G.d * 2
    (Q1, b1, c1), (Q2, b2, c2), (Q3, b3, c3) = (f.linear_coefficients() for f in G)
    M = np.zeros((2 * n, 2 * n), dtype=complex)
    M[:n, :n] = Q1 + Q3
    M[n:, n:] = Q2 + Q3
    M[:n, n:] = Q3
    M[n:, :n] = Q3
    if A is not None:
        from .symplectic import twist_form

        B = twist_form(A).entries
        # i x^T B y = -pi z^T M_tw z with symmetric M_tw
        M[:n, n:] += -1j * B / (2 * np.pi)
        M[n:, :n] += -1j * B.T / (2 * np.pi)
    beta = np.concatenate([b1 + b3, b2 + b3])
    return M, beta, c1 + c2 + c3


def eval_form_gaussian(G: GaussianTriple, A=None) -> complex:
    """Exact ``T_A(G) = iint G1(x) G2(y) G3(x+y) exp(i sigma(Ax, Ay)) dx dy``."""
    M, beta, const = form_quadratic_data(G, A)
    return complex(np.exp(const) * gaussian_integral(M, beta))


def lp_norm_gaussian(F: GaussianFactor, p: float) -> float:
    if p < 1:
        raise ValueError("p must be at least 1")
    sign, logdet = np.linalg.slogdet(p * F.quad.real)
    return float(abs(F.amplitude) * np.exp(-logdet / (2 * p)))


def phi_gaussian(G: GaussianTriple, A, p: ExponentTriple) -> complex:
    norms = np.prod([lp_norm_gaussian(f, pj) for f, pj in zip(G, p.ps)])
    return eval_form_gaussian(G, A) / norms
