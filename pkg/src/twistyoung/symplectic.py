"""Symplectic form, canonical decomposition of ``A^T J A`` and Sp(2d) helpers."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, schur
from scipy.optimize import minimize

SYMPLECTIC_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TwistMatrix:
    entries: np.ndarray
    d: int = field(init=False)

    def __post_init__(self):
        A = np.array(self.entries, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
            raise ValueError(f"twist matrix must be square of even side, got {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("twist matrix has non-finite entries")
        object.__setattr__(self, "entries", A)
        object.__setattr__(self, "d", A.shape[0] // 2)

    @classmethod
    def zero(cls, d: int) -> "TwistMatrix":
        return cls(np.zeros((2 * d, 2 * d)))

    @classmethod
    def scalar(cls, s: float, d: int) -> "TwistMatrix":
        return cls(s * np.eye(2 * d))

    def __matmul__(self, other):
        other = other.entries if isinstance(other, TwistMatrix) else np.asarray(other)
        return TwistMatrix(self.entries @ other)


def as_twist(A) -> TwistMatrix:
    return A if isinstance(A, TwistMatrix) else TwistMatrix(A)


@dataclass(frozen=True, eq=False)
class AntisymmetricForm:
    """``B = A^T J A`` together with its canonical invariants ``a_1 >= ... >= a_d >= 0``."""

    entries: np.ndarray
    a: np.ndarray

    @property
    def norm(self) -> float:
        return float(self.a[0]) if len(self.a) else 0.0


def standard_J(d: int) -> np.ndarray:
    if d < 1:
        raise ValueError("d must be positive")
    I = np.eye(d)
    Z = np.zeros((d, d))
    return np.block([[Z, I], [-I, Z]])


def sigma(x, y) -> np.ndarray:
    """Symplectic form ``x' . y'' - x'' . y'`` along the last axis."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x.shape[-1] // 2
    return np.sum(x[..., :d] * y[..., d:] - x[..., d:] * y[..., :d], axis=-1)


def _canonical_invariants(B: np.ndarray) -> np.ndarray:
    # eigenvalues of the Hermitian matrix iB are +-a_k
    ev = np.linalg.eigvalsh(1j * B)
    d = B.shape[0] // 2
    return np.sort(np.abs(ev))[::-1][::2][:d].copy()


def twist_form(A) -> AntisymmetricForm:
    """Return ``A^T J A`` with its canonical invariants."""
    A = as_twist(A)
    J = standard_J(A.d)
    B = A.entries.T @ J @ A.entries
    B = 0.5 * (B - B.T)
    return AntisymmetricForm(B, _canonical_invariants(B))


def canonical_form(B, tol: float = 1e-12):
    """Orthogonal ``Q`` and ``a`` with ``B = Q^T Sigma Q``.

    ``Sigma`` is block diagonal with blocks ``[[0, a_k], [-a_k, 0]]`` and
    ``a`` is sorted in descending order.  Pairs come from the real Schur form,
    which for a normal matrix is block diagonal.
    """
    if isinstance(B, AntisymmetricForm):
        B = B.entries
    B = np.asarray(B, dtype=float)
    n = B.shape[0]
    if B.ndim != 2 or n != B.shape[1] or n % 2:
        raise ValueError("canonical_form expects an even square matrix")
    scale = 1.0 + np.max(np.abs(B), initial=0.0)
    if np.max(np.abs(B + B.T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not antisymmetric")
    d = n // 2
    if not np.any(B):
        return np.eye(n), np.zeros(d)
    T, Z = schur(B, output="real")
    pairs, singles = [], []
    i = 0
    while i < n:
        if i + 1 < n and abs(T[i + 1, i]) > 1e-14 * scale:
            a = 0.5 * (T[i, i + 1] - T[i + 1, i])
            u, v = Z[:, i], Z[:, i + 1]
            if a < 0:
                u, v, a = v, u, -a
            pairs.append((a, u, v))
            i += 2
        else:
            singles.append(Z[:, i])
            i += 1
    for k in range(0, len(singles), 2):
        pairs.append((0.0, singles[k], singles[k + 1]))
    # stable sort keeps Schur order for ties
    pairs.sort(key=lambda item: -item[0])
    rows = []
    for _, u, v in pairs:
        rows.extend([u, v])
    Q = np.array(rows)
    Sigma = Q @ B @ Q.T
    a = np.array([Sigma[2 * k, 2 * k + 1] for k in range(d)])
    return Q, a


def canonical_sigma(a) -> np.ndarray:
    d = len(a)
    S = np.zeros((2 * d, 2 * d))
    for k, ak in enumerate(a):
        S[2 * k, 2 * k + 1] = ak
        S[2 * k + 1, 2 * k] = -ak
    return S


def spectral_norm_atja(A) -> float:
    return twist_form(A).norm


def is_symplectic(S, tol: float = SYMPLECTIC_TOL) -> bool:
    S = np.asarray(S.entries if isinstance(S, TwistMatrix) else S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
        return False
    J = standard_J(S.shape[0] // 2)
    return bool(np.linalg.norm(S.T @ J @ S - J, 2) <= tol)


def _sym_from_vec(h: np.ndarray, n: int) -> np.ndarray:
    H = np.zeros((n, n))
    H[np.triu_indices(n)] = h
    return H + np.triu(H, 1).T


def symplectic_exp(H) -> np.ndarray:
    """``exp(J H)`` for symmetric ``H``; always in the identity component of Sp(2d)."""
    H = np.asarray(H, dtype=float)
    return expm(standard_J(H.shape[0] // 2) @ H)


@dataclass
class CompressionResult:
    lower: float
    achieved: float
    S: np.ndarray
    converged: bool
    nfev: int

    def __iter__(self):
        return iter((self.lower, self.achieved, self.S))


def min_symplectic_compression(
    A, *, starts: int = 6, seed: int = 0, spread: float = 0.5, maxiter: int = 4000
) -> CompressionResult:
    """Minimise ``||S A||^2`` over ``S = exp(J H)`` by multistart Nelder-Mead.

    ``lower`` is ``||A^T J A||``, a lower bound for every symplectic ``S``.
    Start 0 is the identity; the others are drawn from ``seed``.
    """
    A = as_twist(A)
    n = 2 * A.d
    lower = spectral_norm_atja(A)
    M = A.entries
    base = float(np.linalg.norm(M, 2) ** 2)
    if base == 0.0:
        return CompressionResult(0.0, 0.0, np.eye(n), True, 0)
    m = n * (n + 1) // 2

    def objective(h):
        S = symplectic_exp(_sym_from_vec(h, n))
        return float(np.linalg.norm(S @ M, 2) ** 2)

    rng = np.random.default_rng(seed)
    best = (base, 0, np.zeros(m))
    converged = True
    nfev = 0
    for k in range(starts):
        h0 = np.zeros(m) if k == 0 else spread * rng.standard_normal(m)
        res = minimize(
            objective,
            h0,
            method="Nelder-Mead",
            options={"maxiter": maxiter, "xatol": 1e-10, "fatol": 1e-14 * base},
        )
        nfev += res.nfev
        if res.fun < best[0]:
            best = (float(res.fun), k, res.x)
        converged &= bool(res.success)
    S = symplectic_exp(_sym_from_vec(best[2], n))
    return CompressionResult(lower, float(np.linalg.norm(S @ M, 2) ** 2), S, converged, nfev)
