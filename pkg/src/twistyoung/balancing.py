"""Sharp/flat splitting, truncation radii and the balancing Newton solve."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ExponentTriple, GaussianFactor, GaussianTriple
from .hermite import ConditionProjector, condition_count, condition_labels, tau
from .quadrature import (
    GridFunction,
    QuadratureRule,
    as_grid_function,
    default_rule,
    lp_norm_numeric,
)
from .symmetry import OrbitPoint, SymmetryElement, apply_symmetry
from .symplectic import as_twist, twist_form

DEFAULT_ETA = 0.1
DEFAULT_DELTA0 = 0.1
NEWTON_TOL = 1e-8
NEWTON_MAXITER = 25


class BalanceError(RuntimeError):
    """Newton failure; ``history`` holds the residual norms seen so far."""

    def __init__(self, message, history=(), kind="divergence"):
        super().__init__(message)
        self.history = list(history)
        self.kind = kind


# ------------------------------------------------------------------ sharp / flat


@dataclass
class SharpFlatSplit:
    sharp: GridFunction
    flat: GridFunction
    eta: float


def sharp_flat_split(f, g, eta: float = DEFAULT_ETA) -> SharpFlatSplit:
    """``sharp = f`` where ``|f| <= eta g`` and 0 elsewhere; ``flat = f - sharp``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    f = as_grid_function(f)
    g = as_grid_function(g)

    def mask(x):
        return np.abs(f(x)) <= eta * np.abs(g(x))

    def sharp(x):
        return np.where(mask(x), f(x), 0.0)

    def flat(x):
        return np.where(mask(x), 0.0, f(x))

    return SharpFlatSplit(
        GridFunction(sharp, f.dim, None, "sharp"), GridFunction(flat, f.dim, None, "flat"), eta
    )


# ------------------------------------------------------------- truncation radius


class SphereRule:
    """Product rule on ``S^{n-1}`` in hyperspherical angles (Gauss-Legendre, trapezoid)."""

    def __init__(self, n: int, polar: int = 24, azimuth: int = 64):
        if n < 1:
            raise ValueError("dimension must be positive")
        self.n = n
        if n == 1:
            self.dirs = np.array([[1.0], [-1.0]])
            self.weights = np.ones(2)
            return
        phi = 2 * np.pi * np.arange(azimuth) / azimuth
        dirs = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        w = np.full(azimuth, 2 * np.pi / azimuth)
        u, wl = np.polynomial.legendre.leggauss(polar)
        theta = 0.5 * np.pi * (u + 1)
        wt = 0.5 * np.pi * wl
        for m in range(3, n + 1):
            # x = (cos t, sin t * y) with y on S^{m-2}; measure sin^{m-2} t dt
            c, s = np.cos(theta), np.sin(theta)
            dirs = np.concatenate(
                [c[:, None, None].repeat(len(dirs), 1), s[:, None, None] * dirs[None]], axis=-1
            ).reshape(-1, m)
            w = ((wt * s ** (m - 2))[:, None] * w[None]).ravel()
        self.dirs = dirs
        self.weights = w


class RadialProfile:
    """Composite Gauss-Legendre radial rule for ``int_{|x|>M} |f|^p``.

    Sharp parts jump where the mask flips, so moving quadrature nodes with
    ``M`` would make the tail discontinuous in ``M``.  Instead the radial
    density is sampled once at fixed nodes on ``[0, radius]`` and, on the
    panel containing ``M``, its Legendre interpolant is integrated exactly.
    The tail is then continuous in ``M`` and equals the plain composite rule
    at panel edges.  Mass beyond ``radius`` is neglected.
    """

    def __init__(self, f, p: float, sphere: Optional[SphereRule] = None,
                 radius: float = 8.0, panels: int = 64, order: int = 12):
        f = as_grid_function(f)
        self.p = float(p)
        self.n = f.dim
        self.sphere = sphere or SphereRule(self.n)
        self.radius = float(radius)
        self.edges = np.linspace(0.0, self.radius, panels + 1)
        u, w = np.polynomial.legendre.leggauss(order)
        half = 0.5 * np.diff(self.edges)
        dens = np.empty((panels, order))
        for k in range(panels):
            r = half[k] * (u + 1) + self.edges[k]
            pts = (r[:, None, None] * self.sphere.dirs[None]).reshape(-1, self.n)
            vals = np.abs(f(pts)).reshape(order, -1) ** self.p
            dens[k] = r ** (self.n - 1) * (vals @ self.sphere.weights)
        # Legendre coefficients of each panel's interpolant, then antiderivatives
        coef = np.linalg.solve(np.polynomial.legendre.legvander(u, order - 1), dens.T).T
        self._anti = np.array([np.polynomial.legendre.legint(c, lbnd=-1) for c in coef])
        self._half = half
        sums = half * (dens @ w)
        # suffix[k] = mass of panels k, k+1, ...
        self._suffix = np.concatenate([np.cumsum(sums[::-1])[::-1], [0.0]])

    def mass(self, M: float) -> float:
        """``int_{|x|>M} |f|^p``."""
        M = max(float(M), 0.0)
        if M >= self.radius:
            return 0.0
        k = min(int(np.searchsorted(self.edges, M, side="right")) - 1, len(self._half) - 1)
        t = (M - self.edges[k]) / self._half[k] - 1.0
        anti = self._anti[k]
        part = self._half[k] * (np.polynomial.legendre.legval(1.0, anti) - np.polynomial.legendre.legval(t, anti))
        return max(float(part) + self._suffix[k + 1], 0.0)

    def norm(self, M: float = 0.0) -> float:
        return self.mass(M) ** (1.0 / self.p)


def tail_norm(f, p: float, M: float, sphere: Optional[SphereRule] = None) -> float:
    """``||f 1_{|x| > M}||_p`` on a spherical rule times a composite radial rule."""
    return RadialProfile(f, p, sphere).norm(M)


def truncation_radius(f_sharp, p: float, rule=None, *, tol: float = 1e-8,
                      sphere: Optional[SphereRule] = None) -> float:
    """Radius ``M`` with ``||f 1_{|x|>M}||_p = ||f||_p^2``, by bisection.

    ``rule`` may be a :class:`SphereRule` or a prepared :class:`RadialProfile`.
    The zero function returns 0.
    """
    if isinstance(rule, RadialProfile):
        prof = rule
    else:
        sphere = rule if isinstance(rule, SphereRule) else sphere
        prof = RadialProfile(f_sharp, p, sphere)
    total = prof.norm(0.0)
    if total == 0.0:
        return 0.0
    if total >= 1.0:
        raise ValueError("truncation radius needs ||f||_p < 1")
    target = total**2

    def h(M):
        return prof.norm(M) - target

    lo, hi = 0.0, 1.0
    while h(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > prof.radius:
            raise ValueError("tail does not decay inside the radial rule")
    # the target can be far below tol, so bisect to full width rather than residual
    while hi - lo > 1e-13 * (1.0 + hi):
        mid = 0.5 * (lo + hi)
        hm = h(mid)
        if hm == 0:
            return mid
        if hm > 0:
            lo = mid
        else:
            hi = mid
    M = 0.5 * (lo + hi)
    if abs(h(M)) > tol:
        raise ValueError("bisection did not reach the residual tolerance")
    return M


# ---------------------------------------------------------------------- balancing


@dataclass
class BalanceParams:
    """Balancing unknowns; the orbit element has scalars ``(1 + b_j) |det psi|^{1/p_j}``."""

    b: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    xi: np.ndarray
    phi: np.ndarray

    @property
    def v3(self) -> np.ndarray:
        return -self.v1 - self.v2

    def magnitude(self) -> float:
        return float(
            np.sum(np.abs(self.b))
            + np.linalg.norm(self.v1)
            + np.linalg.norm(self.v2)
            + np.linalg.norm(self.v3)
            + np.linalg.norm(self.xi)
            + np.linalg.norm(self.phi, 2)
        )


class BalanceChart:
    """Real coordinates of :class:`BalanceParams`, ordered to match the conditions.

    Layout: ``Re b1, Im b1, v1, Re b2, Im b2, v2, Re b3, Im b3, xi, phi``
    (upper triangle of the symmetric ``phi``, row major).
    """

    def __init__(self, p: ExponentTriple, d: int):
        self.p = p
        self.d = d
        self.n = n = 2 * d
        self.size = condition_count(d)
        self.triu = np.triu_indices(n)

    def params(self, theta) -> BalanceParams:
        n = self.n
        t = np.asarray(theta, dtype=float)
        b1 = t[0] + 1j * t[1]
        v1 = t[2 : 2 + n]
        o = 2 + n
        b2 = t[o] + 1j * t[o + 1]
        v2 = t[o + 2 : o + 2 + n]
        o += 2 + n
        b3 = t[o] + 1j * t[o + 1]
        xi = t[o + 2 : o + 2 + n]
        o += 2 + n
        phi = np.zeros((n, n))
        phi[self.triu] = t[o:]
        phi = phi + np.triu(phi, 1).T
        return BalanceParams(np.array([b1, b2, b3]), v1, v2, xi, phi)

    def coords(self, prm: BalanceParams) -> np.ndarray:
        b = prm.b
        return np.concatenate(
            [
                [b[0].real, b[0].imag], prm.v1,
                [b[1].real, b[1].imag], prm.v2,
                [b[2].real, b[2].imag], prm.xi,
                prm.phi[self.triu],
            ]
        )

    def block_slices(self) -> dict:
        """Parameter index groups, also valid as condition index groups."""
        n = self.n
        out = {}
        o = 0
        for j in range(3):
            out[f"b{j + 1}"] = list(range(o, o + 2))
            out["v1" if j == 0 else "v2" if j == 1 else "xi"] = list(range(o + 2, o + 2 + n))
            o += 2 + n
        out["phi"] = list(range(o, self.size))
        return out

    def element(self, theta, pre_scalars=(1, 1, 1)) -> SymmetryElement:
        prm = self.params(theta)
        psi = np.eye(self.n) + prm.phi
        det = abs(np.linalg.det(psi))
        sc = tuple(
            c * (1 + bj) * det ** (1.0 / pj) for c, bj, pj in zip(pre_scalars, prm.b, self.p.ps)
        )
        return SymmetryElement(sc, prm.xi, prm.v1, prm.v2, psi)


@dataclass
class BalanceResult:
    params: BalanceParams
    element: SymmetryElement
    point: OrbitPoint
    residual_history: list
    converged: bool
    pre_scalars: tuple = field(default=(1, 1, 1))

    @property
    def residual(self) -> float:
        return self.residual_history[-1]

    @property
    def iterations(self) -> int:
        return len(self.residual_history) - 1

    @property
    def transformed(self):
        return self.point.functions


class Balancer:
    """Orthogonality residual of ``s(theta)(F, A) - g`` and its Jacobians."""

    def __init__(self, F, A, p: ExponentTriple, rule: Optional[QuadratureRule] = None):
        self.point = F if isinstance(F, OrbitPoint) else OrbitPoint(F, A)
        self.p = p
        self.d = d = self.point.d
        self.rule = rule if rule is not None else default_rule(2 * d)
        self.projector = ConditionProjector(p, d, self.rule)
        self.chart = BalanceChart(p, d)
        P = self.projector.points
        self.gvals = [GaussianFactor.standard(pj, d)(P) for pj in p.ps]
        self.pre_scalars = (1, 1, 1)

    def values(self, theta):
        s = self.chart.element(theta, self.pre_scalars)
        img = apply_symmetry(s, self.point)
        P = self.projector.points
        return [f(P) - gv for f, gv in zip(img.functions, self.gvals)]

    def residual(self, theta) -> np.ndarray:
        return self.projector.project_values(self.values(theta))

    def fd_jacobian(self, theta, h: float = 1e-6) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        cols = []
        for k in range(theta.size):
            e = np.zeros_like(theta)
            e[k] = h
            cols.append((self.residual(theta + e) - self.residual(theta - e)) / (2 * h))
        return np.array(cols).T

    def normalise_scalars(self):
        """Rescale so that ``<F_j - g_j, g_j^{p_j-1}> = 0`` before Newton starts."""
        P, W = self.projector.points, self.projector.weights
        r2 = np.sum(P**2, axis=-1)
        fs = self.point.grid_functions()
        sc = []
        for f, gv, pj in zip(fs, self.gvals, self.p.ps):
            dual = W * np.exp(-np.pi * pj * r2)
            m = np.sum(dual * f(P))
            sc.append(np.sum(dual * gv) / m if abs(m) > 0 else 1.0)
        self.pre_scalars = tuple(sc)
        return self.pre_scalars


def analytic_jacobian(p: ExponentTriple, d: int, rule: Optional[QuadratureRule] = None) -> np.ndarray:
    """Jacobian of the condition vector in :class:`BalanceChart` coordinates at ``(g, 0)``.

    Built from the closed-form first variations of ``g_j`` under each
    parameter, paired with the test functions on ``rule``.
    """
    n = 2 * d
    rule = rule if rule is not None else default_rule(n)
    proj = ConditionProjector(p, d, rule)
    P = proj.points
    chart = BalanceChart(p, d)
    g = [GaussianFactor.standard(pj, d)(P).real for pj in p.ps]
    q = [GaussianFactor.standard(pj, d).quad[0, 0].real for pj in p.ps]
    zero = np.zeros(P.shape[0])
    cols = []

    def push(dh):
        cols.append(proj.project_values(dh))

    for j in range(3):
        for unit in (1.0, 1j):
            dh = [zero, zero, zero]
            dh[j] = unit * g[j]
            push(dh)
        for k in range(n):
            dh = [zero, zero, zero]
            if j < 2:
                # d/dv_j of g_j(x + v_j) and of g_3(x + v_1 + v_2)
                dh[j] = -2 * np.pi * q[j] * P[:, k] * g[j]
                dh[2] = -2 * np.pi * q[2] * P[:, k] * g[2]
            else:
                dh = [1j * P[:, k] * g[0], 1j * P[:, k] * g[1], -1j * P[:, k] * g[2]]
            push(dh)
    for k, l in zip(*chart.triu):
        quadform = 2 * P[:, k] * P[:, l] if k != l else P[:, k] ** 2
        trace = 1.0 if k == l else 0.0
        dh = [(trace / pj - 2 * np.pi * qj * quadform) * gj for gj, qj, pj in zip(g, q, p.ps)]
        push(dh)
    return np.array(cols).T


def balance(
    F,
    A,
    p: ExponentTriple,
    rule: Optional[QuadratureRule] = None,
    *,
    delta0: float = DEFAULT_DELTA0,
    tol: float = NEWTON_TOL,
    maxiter: int = NEWTON_MAXITER,
    check_regime: bool = True,
    jacobian: str = "fd",
) -> BalanceResult:
    """Find an orbit element of ``(F, A)`` meeting every orthogonality condition.

    Damped Newton on :class:`BalanceChart` coordinates after the scalar
    normalisation; ``jacobian`` is ``"fd"`` (central differences at each
    iterate) or ``"analytic"`` (frozen Jacobian at ``(g, 0)``).
    """
    bal = Balancer(F, A, p, rule)
    d = bal.d
    if check_regime:
        B = twist_form(bal.point.A).norm
        if B > delta0:
            raise ValueError(f"||A^T J A|| = {B:.3g} exceeds delta0 = {delta0}")
        fs = bal.point.grid_functions()
        for f, pj in zip(fs, p.ps):
            g = GridFunction.from_gaussian(GaussianFactor.standard(pj, d))
            dist = lp_norm_numeric(f - g, pj, bal.rule)
            if dist > delta0:
                raise ValueError(f"perturbation of size {dist:.3g} exceeds delta0 = {delta0}")
    bal.normalise_scalars()
    theta = np.zeros(bal.chart.size)
    r = bal.residual(theta)
    history = [float(np.linalg.norm(r))]
    J0 = analytic_jacobian(p, d, bal.rule) if jacobian == "analytic" else None
    while history[-1] > tol and len(history) <= maxiter:
        Jm = J0 if J0 is not None else bal.fd_jacobian(theta)
        try:
            step = np.linalg.solve(Jm, -r)
        except np.linalg.LinAlgError:
            raise BalanceError("singular balancing Jacobian", history, "singular") from None
        lam = 1.0
        for _ in range(12):
            trial = theta + lam * step
            try:
                r_new = bal.residual(trial)
            except ValueError:
                r_new = None
            if r_new is not None and np.linalg.norm(r_new) < history[-1]:
                break
            lam *= 0.5
        else:
            raise BalanceError("Newton step failed to reduce the residual", history)
        theta, r = trial, r_new
        history.append(float(np.linalg.norm(r)))
    converged = history[-1] <= tol
    if not converged:
        raise BalanceError(f"no convergence in {maxiter} Newton steps", history)
    s = bal.chart.element(theta, bal.pre_scalars)
    return BalanceResult(
        bal.chart.params(theta), s, apply_symmetry(s, bal.point), history, converged, bal.pre_scalars
    )


def parameter_scaling(direction, p: ExponentTriple, eps_list, d: int = 1, A=None,
                      rule: Optional[QuadratureRule] = None):
    """Solved parameter magnitude against perturbation size; returns ``(mags, slope)``."""
    gs = GaussianTriple.standard(p, d)
    mags = []
    for eps in eps_list:
        F = tuple(GridFunction.from_gaussian(gj) + eps * as_grid_function(fj)
                  for gj, fj in zip(gs, direction))
        res = balance(F, A, p, rule, check_regime=False)
        mags.append(res.params.magnitude())
    mags = np.array(mags)
    slope = float(np.polyfit(np.log(eps_list), np.log(mags), 1)[0])
    return mags, slope
