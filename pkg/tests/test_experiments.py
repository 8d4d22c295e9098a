import numpy as np
import pytest

from twistyoung.core import DEFAULT_EXPONENTS, GaussianFactor, GaussianTriple, sharp_constant
from twistyoung.experiments import (
    ScanRecord,
    SamplerConfig,
    check_onesigma,
    check_twosigma,
    deficit,
    expansion_audit,
    expansion_terms,
    fit_kappa,
    pure_twist_path,
    random_direction,
    random_twist,
    scan_sample,
    summarize,
    third_order_scan,
    twist_prediction,
    twosigma_kappa,
)
from twistyoung.hermite import basis, eval_tensor, tau
from twistyoung.quadrature import GridFunction, build_rule, lp_norm_numeric
from twistyoung.symmetry import DistanceConfig, OrbitPoint, SymmetryElement, apply_symmetry
from twistyoung.symplectic import twist_form

P = DEFAULT_EXPONENTS


@pytest.fixture(scope="module")
def r24():
    return build_rule(24, 4, 0.5)


def small_triple(seed, eps=0.02):
    dirs = random_direction(np.random.default_rng(seed), P, 1)
    return tuple(eps * h for h in dirs)


def test_expansion_zero_perturbation(r24):
    z = (GridFunction.zero(2),) * 3
    terms = expansion_terms(z, np.eye(2), P, r24)
    assert len(terms) == 16
    for (kind, word), v in terms.items():
        if word != "ggg":
            assert v == 0
    assert terms[("T0", "ggg")] == pytest.approx(1 / 32, abs=1e-12)


def test_expansion_sum_matches_direct(r24):
    for seed in range(3):
        audit = expansion_audit(small_triple(seed), 0.3 * np.eye(2), P, r24)
        assert audit.error <= 1e-8


def test_expansion_multilinear(r24):
    fs = small_triple(5)
    A = np.array([[0.5, 0.1], [0.0, 0.4]])
    a = expansion_terms(fs, A, P, r24)
    b = expansion_terms((2 * fs[0], fs[1], fs[2]), A, P, r24)
    changed = 0
    for key in a:
        if key[1][0] == "f":
            assert b[key] == pytest.approx(2 * a[key], rel=1e-13)
            changed += 1
        else:
            assert b[key] == a[key]
    assert changed == 8


def test_onesigma(r24):
    g1 = GaussianFactor.standard(P[0], 1)
    h = GridFunction(lambda x: x[..., 0] * g1(x), 2)
    assert check_onesigma(h, 1, np.zeros((2, 2)), r24) == 0.0
    assert check_onesigma(h, 1, np.eye(2), r24) <= 1e-8
    b = basis(tau(P[1]), 3)
    g2 = GaussianFactor.standard(P[1], 1)
    rng = np.random.default_rng(2)
    c = rng.standard_normal(3)
    h2 = GridFunction(lambda x: (c[0] * eval_tensor(b, (2, 1), x) + c[1] * eval_tensor(b, (0, 3), x) + c[2]) * g2(x), 2)
    assert check_onesigma(h2, 2, rng.standard_normal((2, 2)), r24) <= 1e-8
    with pytest.raises(ValueError):
        check_onesigma(h, 4, np.eye(2), r24)


def test_twosigma(r24):
    assert check_twosigma(np.zeros((2, 2)), rule=r24).value == 0
    r = check_twosigma(np.eye(2), rule=r24)
    assert r.value == pytest.approx(r.kappa, rel=1e-14)
    assert r.value == pytest.approx(r.factorized, rel=1e-8)
    assert r.kappa == pytest.approx(twosigma_kappa(P, 1), rel=1e-10)
    A = np.random.default_rng(3).standard_normal((2, 2))
    v1 = check_twosigma(A, rule=r24).value
    v2 = check_twosigma(2 * A, rule=r24).value
    assert v2 / v1 == pytest.approx(16, rel=1e-6)


def test_kappa_fit(r24):
    rng = np.random.default_rng(4)
    fit = fit_kappa([rng.standard_normal((2, 2)) for _ in range(5)], P, r24)
    assert fit.rel_residual <= 1e-6
    assert fit.kappa > 0


def test_third_order_scan(r24):
    dirs = random_direction(np.random.default_rng(6), P, 1)
    rows = third_order_scan(dirs, 0.1, [0.0, 3e-3, 1e-3, 1e-4], rule=r24)
    assert rows[0].term == 0
    assert rows[2].ratio < rows[1].ratio
    assert rows[3].ratio < rows[2].ratio
    assert rows[3].branch == "localized"
    # strong fixed twist puts the small scales in the trivial branch
    rows = third_order_scan(dirs, 0.1, [1e-2, 1e-3], a_scales=[0.5, 0.5], rule=r24)
    for r in rows:
        assert abs(r.term) <= r.trivial_bound
    assert rows[-1].branch == "trivial"


def test_deficit_examples():
    g = GaussianTriple.standard(P, 1)
    assert abs(deficit(OrbitPoint(g, None), P)) <= 1e-8
    assert deficit(OrbitPoint(g, 0.1 * np.eye(2)), P) > 0
    rule = build_rule(40, 4, 0.5)
    grid = OrbitPoint(tuple(GridFunction.from_gaussian(f) for f in g), 0.3 * np.eye(2))
    s = SymmetryElement((1.5, 0.5j, 2), [0.1, -0.2], [0.05, 0.1], [-0.1, 0.0], [[1.1, 0.1], [0.0, 0.9]])
    assert deficit(apply_symmetry(s, grid), P, rule) == pytest.approx(deficit(grid, P, rule), abs=1e-6)
    assert deficit(grid, P, rule) == pytest.approx(deficit(OrbitPoint(g, 0.3 * np.eye(2)), P), abs=1e-10)


def test_pure_twist_path():
    path = pure_twist_path([1e-2, 1e-3, 1e-4])
    for r in path:
        assert r.atja_sq == pytest.approx(r.t**2, abs=1e-10)
    pred = twist_prediction(P, 1)
    assert path[1].ratio == pytest.approx(pred, rel=0.01)
    # |Phi| decreases with the twist
    ts = np.linspace(0, 1, 11)
    phis = [r.phi_abs for r in pure_twist_path(ts)]
    assert all(b < a for a, b in zip(phis, phis[1:]))
    assert phis[0] == pytest.approx(sharp_constant(P, 2), rel=1e-14)


def test_function_perturbation_deficit_is_quadratic():
    rng = np.random.default_rng(9)
    dirs = random_direction(rng, P, 1)
    rule = build_rule(32, 4, 0.5)
    gs = [GridFunction.from_gaussian(GaussianFactor.standard(pj, 1)) for pj in P.ps]
    from twistyoung.balancing import balance

    ratios = []
    for eps in (0.02, 0.01):
        F = [gj + eps * h for gj, h in zip(gs, dirs)]
        pt = balance(F, None, P, rule.with_axes(2), check_regime=False).point
        fs = [h - gj for h, gj in zip(pt.grid_functions(), gs)]
        size = max(lp_norm_numeric(f, pj, rule.with_axes(2)) for f, pj in zip(fs, P.ps))
        ratios.append(deficit(pt, P, rule) / size**2)
    assert ratios[0] > 0 and ratios[1] > 0
    assert 0.5 < ratios[1] / ratios[0] < 2


def test_random_twist_norm():
    rng = np.random.default_rng(1)
    for t in (1e-4, 1e-2):
        A = random_twist(rng, 1, t)
        assert twist_form(A).norm == pytest.approx(t, rel=1e-12)


def test_scan_sample_record():
    rec = scan_sample(7, sampler=SamplerConfig(), rule=build_rule(24, 4, 0.5),
                      distance=DistanceConfig(starts=1, maxfev=400, points=20), timing=False)
    assert rec.wall_ms == 0.0
    assert 1e-3 <= rec.epsilon <= 1e-1 and 1e-4 <= rec.atja_norm <= 1.1e-2
    assert rec.deficit >= -1e-6 and rec.dist_sq > 0
    assert rec.ratio == pytest.approx(rec.deficit / rec.dist_sq)
    assert rec.audit_error <= 1e-8
    again = scan_sample(7, sampler=SamplerConfig(), rule=build_rule(24, 4, 0.5),
                        distance=DistanceConfig(starts=1, maxfev=400, points=20), timing=False)
    assert again == rec


def test_degenerate_records_excluded():
    recs = [
        ScanRecord(0, 0.0, 0.1, 0.0, 0.0, 0.0, 0.0, float("nan"), 0.0),
        ScanRecord(1, 0.01, 0.1, 0.01, 0.0, 1e-4, 5e-4, 5.0, 0.0),
        ScanRecord(2, 0.01, 0.1, 0.01, 0.0, 1e-4, 3e-4, 3.0, 0.0),
        ScanRecord(3, 0.01, 0.1, 0.01, 0.0, 1e-4, 3e-4, 3.0, 0.0, failure="balance: x"),
    ]
    c, med, failures, degenerate = summarize(recs)
    assert c == 3.0 and med == 4.0 and failures == 1 and degenerate == 1
    assert recs[0].degenerate
