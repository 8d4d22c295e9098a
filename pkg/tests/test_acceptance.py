"""Acceptance criteria at desk scale ``d = 1``; each test records one PASS/FAIL line."""

import time

import numpy as np
import pytest

from twistyoung.balancing import (
    BalanceChart,
    Balancer,
    analytic_jacobian,
    balance,
    sharp_flat_split,
    tail_norm,
    truncation_radius,
)
from twistyoung.core import (
    DEFAULT_EXPONENTS,
    ExponentTriple,
    GaussianFactor,
    GaussianTriple,
    InadmissibleExponents,
    conjugate_exponent,
    eval_form_gaussian,
    gaussian_integral,
    lp_norm_gaussian,
    phi_gaussian,
    sharp_constant,
)
from twistyoung.experiments import (
    check_onesigma,
    check_twosigma,
    fit_kappa,
    random_direction,
    random_twist,
    stability_scan,
)
from twistyoung.quadrature import GridFunction, build_rule, eval_form_numeric
from twistyoung.symmetry import OrbitPoint, SymmetryElement, apply_symmetry, phi
from twistyoung.symplectic import twist_form

P = DEFAULT_EXPONENTS
RESULTS = []


def record(number, name, passed, detail):
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {name}: {detail}"
    RESULTS.append(line)
    print(line)
    assert passed, line


@pytest.fixture(scope="module")
def rule4():
    return build_rule(40, 4, 0.5)


@pytest.fixture(scope="module")
def kappa_fit(rule4):
    rng = np.random.default_rng(404)
    return fit_kappa([rng.standard_normal((2, 2)) for _ in range(20)], P, rule4)


@pytest.fixture(scope="module")
def scan():
    t0 = time.perf_counter()
    res = stability_scan(range(50), timing=False)
    return res, time.perf_counter() - t0


def admissible_triples(rng, count):
    out = []
    while len(out) < count:
        p1, p2 = rng.uniform(1.05, 2.0, 2)
        s = 2.0 - 1 / p1 - 1 / p2
        if s <= 0:
            continue
        try:
            out.append(ExponentTriple(p1, p2, 1 / s))
        except InadmissibleExponents:
            continue
    return out


def quotient_1d(p):
    q1, q2, q3 = p.conjugates
    M = np.array([[q1 + q3, q3], [q3, q2 + q3]])
    T = gaussian_integral(M).real
    norms = np.prod([(pj * qj) ** (-0.5 / pj) for pj, qj in zip(p.ps, p.conjugates)])
    return T / norms


def test_criterion_1_sharp_constant():
    t0 = time.perf_counter()
    triples = [P] + admissible_triples(np.random.default_rng(1), 9)
    worst = 0.0
    for p in triples:
        worst = max(worst, abs(sharp_constant(p, 1) - quotient_1d(p)))
        G = GaussianTriple.standard(p, 1)
        worst = max(worst, abs(sharp_constant(p, 2) - abs(phi_gaussian(G, None, p))))
    ref = sharp_constant(P, 2)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and abs(ref - 0.769801) <= 1e-6 and elapsed < 1.0
    record(1, "sharp constant vs Gaussian quotient", ok,
           f"max diff {worst:.2e} over {len(triples)} triples, n in (1, 2); A_p(n=2) = {ref:.8f}; {elapsed:.2f} s")


def random_gaussian(rng, n=2):
    M = rng.standard_normal((n, n))
    Q = M @ M.T * 0.5 + (1.5 + rng.uniform()) * np.eye(n)
    S = rng.standard_normal((n, n)) * 0.3
    return GaussianFactor(rng.uniform(0.5, 1.5) * np.exp(1j * rng.uniform(0, 6)),
                          Q + 1j * (S + S.T) * 0.5, 0.2 * rng.standard_normal(n), rng.standard_normal(n))


def test_criterion_2_closed_form_vs_quadrature(rule4):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(50):
        G = GaussianTriple(tuple(random_gaussian(rng) for _ in range(3)))
        A = random_twist(rng, 1, rng.uniform(0.0, 1.0))
        assert twist_form(A).norm <= 1.0 + 1e-12
        worst = max(worst, abs(eval_form_numeric(*G, A, rule4) - eval_form_gaussian(G, A)))
    elapsed = time.perf_counter() - t0
    record(2, "closed form vs quadrature", worst <= 1e-6 and elapsed < 120,
           f"max abs diff {worst:.2e} over 50 triples at 40 points/axis; {elapsed:.1f} s")


def test_criterion_3_onesigma(rule4):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        slot = int(rng.integers(1, 4))
        h = random_direction(rng, P, 1)[slot - 1]
        worst = max(worst, check_onesigma(h, slot, rng.standard_normal((2, 2)), rule4, P))
    elapsed = time.perf_counter() - t0
    record(3, "one-sigma integral vanishes", worst <= 1e-8 and elapsed < 120,
           f"max relative residual {worst:.2e} over 100 draws; {elapsed:.1f} s")


def test_criterion_4_twosigma(rule4, kappa_fit):
    t0 = time.perf_counter()
    A = np.random.default_rng(44).standard_normal((2, 2))
    v1 = check_twosigma(A, P, 1, rule4).value
    v2 = check_twosigma(3 * A, P, 1, rule4).value
    homog = abs(v2 / v1 - 81) / 81
    elapsed = time.perf_counter() - t0
    ok = kappa_fit.rel_residual <= 1e-6 and homog <= 1e-6
    record(4, "two-sigma integral is kappa sum a_k^2", ok,
           f"kappa {kappa_fit.kappa:.10e}, fit residual {kappa_fit.rel_residual:.2e} over 20 A, "
           f"homogeneity error {homog:.2e}; {elapsed:.1f} s plus fit")


def random_element(rng, size):
    sc = tuple(np.exp(size * rng.standard_normal(3) + 1j * rng.uniform(0, 6, 3)))
    return SymmetryElement(sc, size * rng.standard_normal(2), size * rng.standard_normal(2),
                           size * rng.standard_normal(2), np.eye(2) + size * rng.standard_normal((2, 2)))


def generator(name, s):
    return {
        "scaling": lambda: SymmetryElement.scaling(*s.scalars, 1),
        "modulation": lambda: SymmetryElement.modulation(s.xi),
        "mix": lambda: SymmetryElement.translation(s.v1, s.v2),
        "linear": lambda: SymmetryElement.linear(s.psi),
    }[name]()


def test_criterion_5_symmetry_invariance(rule4):
    rng = np.random.default_rng(5)
    G = GaussianTriple.standard(P, 1)
    pt = OrbitPoint(G, np.array([[0.6, 0.1], [-0.3, 0.8]]))
    grid = OrbitPoint(pt.grid_functions(), pt.A)
    base = abs(phi(pt, P))
    base_grid = abs(phi(grid, P, rule4))
    closed, numeric = 0.0, 0.0
    for name in ("scaling", "modulation", "mix", "linear"):
        for _ in range(25):
            e = generator(name, random_element(rng, 0.3))
            closed = max(closed, abs(abs(phi(apply_symmetry(e, pt), P)) - base) / base)
            e = generator(name, random_element(rng, 0.15))
            numeric = max(numeric, abs(abs(phi(apply_symmetry(e, grid), P, rule4)) - base_grid))
    record(5, "|Phi| invariant under the four generators", closed <= 1e-12 and numeric <= 1e-6,
           f"closed-form max rel diff {closed:.2e}, quadrature max diff {numeric:.2e}, 25 draws per generator")


def test_criterion_6_balancing():
    rng = np.random.default_rng(6)
    gs = [GridFunction.from_gaussian(GaussianFactor.standard(pj, 1)) for pj in P.ps]
    worst_res, worst_it = 0.0, 0
    for k in range(10):
        eps = 0.05 * rng.uniform(0.2, 1.0)
        t = 0.05 * rng.uniform(0.0, 1.0)
        dirs = random_direction(rng, P, 1)
        A = random_twist(rng, 1, t) if k else None
        res = balance([gj + eps * h for gj, h in zip(gs, dirs)], A, P)
        worst_res = max(worst_res, res.residual)
        worst_it = max(worst_it, res.iterations)
    jac = analytic_jacobian(P, 1)
    mask = np.zeros_like(jac, dtype=bool)
    for idx in BalanceChart(P, 1).block_slices().values():
        mask[np.ix_(idx, idx)] = True
    off = float(np.max(np.abs(jac[~mask])))
    fd = Balancer(GaussianTriple.standard(P, 1), None, P).fd_jacobian(np.zeros(jac.shape[1]))
    fd_rel = float(np.max(np.abs(fd - jac)) / np.max(np.abs(jac)))
    ok = worst_res <= 1e-8 and worst_it <= 25 and off <= 1e-8 and fd_rel <= 1e-6
    record(6, "balancing", ok,
           f"max residual {worst_res:.2e} in <= {worst_it} steps over 10 draws; off-block {off:.2e}; "
           f"FD Jacobian rel diff {fd_rel:.2e}")


def test_criterion_7_stability_scan(scan, kappa_fit):
    res, elapsed = scan
    pred = 0.5 * kappa_fit.kappa / np.prod([lp_norm_gaussian(GaussianFactor.standard(pj, 1), pj) for pj in P.ps])
    at = {r.t: r for r in res.twist_path}[1e-3]
    rel = abs(at.ratio - pred) / pred
    ratios = [r.ratio for r in sorted(res.twist_path, key=lambda r: r.t)]
    ok = (res.failures == 0 and res.min_deficit >= -1e-6 and res.c_fit > 0
          and rel <= 0.2 and min(ratios) > 0 and elapsed < 600)
    record(7, "stability scan", ok,
           f"min deficit {res.min_deficit:.3e}, min deficit/dist^2 {res.c_fit:.4f}, "
           f"median {res.median_ratio:.3f}, failures {res.failures}, degenerate {res.degenerate}; "
           f"deficit/t^2 at t=1e-3 {at.ratio:.6e} vs kappa/2 prediction {pred:.6e} (rel {rel:.1e}); {elapsed:.0f} s")


def test_criterion_8_expansion_audit(scan):
    res, _ = scan
    errs = [r.audit_error for r in res.records if not r.failure]
    ok = len(errs) == len(res.records) and max(errs) <= 1e-8
    record(8, "sixteen-term expansion audit", ok,
           f"max |sum - direct| {max(errs):.2e} over {len(errs)} scan samples")


def test_criterion_9_truncation_radius():
    rng = np.random.default_rng(9)
    dirs = random_direction(rng, P, 1)
    shapes = {
        "gaussian": GridFunction.from_gaussian(GaussianFactor.standard(P[0], 1)),
        "hermite": dirs[0],
    }
    g1 = GridFunction.from_gaussian(GaussianFactor.standard(P[0], 1))
    worst_res, details, ok = 0.0, [], True
    for name, shape in shapes.items():
        ratios = []
        for eps in (1e-1, 1e-2, 1e-3, 1e-4):
            sharp = sharp_flat_split(eps * shape, g1, 0.1).sharp
            norm = tail_norm(sharp, P[0], 0.0)
            M = truncation_radius(sharp, P[0])
            worst_res = max(worst_res, abs(tail_norm(sharp, P[0], M) - norm**2))
            ratios.append(M / np.log(1 / norm))
        ok &= max(ratios) <= 2 * ratios[0]
        details.append(f"{name} M/log(1/|f|) = " + ", ".join(f"{r:.3f}" for r in ratios))
    ok &= worst_res <= 1e-8
    record(9, "truncation radius", ok, f"max bisection residual {worst_res:.2e}; " + "; ".join(details))
