import io
import math
import warnings

import numpy as np
import pytest
from scipy import integrate
from sklearn.base import clone

from horolift import equidist
from horolift.equidist import (DecayRateEstimator, ExperimentConfig, adaptive_gk15, decay_fit,
                               main_term, mu_Y_reference, nu_y, run_experiment)
from horolift.fourier import SiegelTestFn
from horolift.geometry import lift_point
from horolift.lifts import default_density, quadratic_lift, zero_lift

RHO = default_density()
ANNULUS = SiegelTestFn(1.0, 2.0)
SMALL = SiegelTestFn(0.25, 0.5)


def test_gk15_rule_exact_on_polynomials():
    # the 15-point Kronrod rule integrates degree 22 exactly on one panel
    val, err = adaptive_gk15(lambda x: x**22, -1.0, 1.0)
    assert val == pytest.approx(2 / 23, abs=1e-15)
    assert adaptive_gk15(np.sin, 0, 3)[0] == pytest.approx(1 - math.cos(3), abs=1e-12)
    with pytest.raises(ValueError):
        adaptive_gk15(np.sin, 1, 1)


def test_gk15_oscillatory():
    val, _ = adaptive_gk15(lambda x: np.cos(200 * x) * np.exp(-x * x), -3, 3, tol=1e-12)
    ref, _ = integrate.quad(lambda x: math.exp(-x * x), -3, 3, weight="cos", wvar=200,
                            epsabs=1e-14)
    assert abs(val - ref) < 1e-11


def test_horocycle_points_match_lift_point():
    lift = quadratic_lift()
    x = np.array([-0.7, -0.2])
    M, t = equidist.horocycle_points(lift, x, 0.03)
    for i, xi in enumerate(x):
        g = lift_point(lift, xi, 0.03)
        assert np.allclose(M[i], g.M) and np.allclose(t[i], g.x)


def test_nu_y_against_scipy_quad():
    """Independent route: point-by-point group arithmetic and QUADPACK."""
    lift, y = quadratic_lift(), 0.2

    def integrand(x):
        g = lift_point(lift, x, y)
        return ANNULUS(g.M, g.x) * float(RHO.rho(np.array([x]))[0])

    ref, _ = integrate.quad(integrand, -1, 0, epsabs=1e-11, limit=400)
    assert abs(nu_y(ANNULUS, lift, RHO, y) - ref) < 1e-8


def test_nu_y_reduction_independent():
    a = nu_y(SMALL, quadratic_lift(), RHO, 0.01)
    b = nu_y(SMALL, quadratic_lift(), RHO, 0.01, reduce=False)
    assert abs(a - b) < 1e-9


def test_nu_y_half_tolerance_rerun():
    a = nu_y(ANNULUS, quadratic_lift(), RHO, 1e-2, tol=1e-8)
    b = nu_y(ANNULUS, quadratic_lift(), RHO, 1e-2, tol=5e-9)
    assert abs(a - b) < 1e-8


def test_nu_y_linear_and_positive():
    f1, f2 = SiegelTestFn(1.0, 2.0, normalize=False), SiegelTestFn(1.0, 2.0, normalize=False)
    f3 = SiegelTestFn(0.5, 1.5, normalize=False)
    lift, y = quadratic_lift(), 0.02
    a, b = nu_y(f1, lift, RHO, y), nu_y(f3, lift, RHO, y)
    assert a > 0 and b > 0

    class Combo:
        affine = True

        def evaluate(self, M, x, reduce=True):
            return 2.0 * f1.evaluate(M, x) - 0.5 * f3.evaluate(M, x)

    combo = nu_y(Combo(), lift, RHO, y)
    assert abs(combo - (2 * a - 0.5 * b)) < 1e-8
    assert f1 == f2


def test_main_term_constant_for_affine():
    for y in (1e-3, 0.1):
        assert main_term(ANNULUS, RHO, y) == pytest.approx(1.0, abs=1e-12)


def test_main_term_equals_nu_for_fibre_constant_function():
    F = SiegelTestFn(1.0, 2.0, affine=False)
    for y in (0.3, 0.01):
        assert abs(main_term(F, RHO, y) - nu_y(F, quadratic_lift(), RHO, y)) < 1e-9


def test_y_range_checked():
    with pytest.raises(ValueError):
        nu_y(ANNULUS, zero_lift(), RHO, 1.0)
    with pytest.raises(ValueError):
        main_term(ANNULUS, RHO, 0.0)


def test_monte_carlo_reference():
    mean, se = mu_Y_reference(SMALL, 40_000, seed=11)
    assert abs(mean - 1) <= 3 * se
    again = mu_Y_reference(SMALL, 40_000, seed=11, workers=2)
    assert again == (mean, se)
    _, se4 = mu_Y_reference(SMALL, 160_000, seed=12)
    assert 0.35 < se4 / se < 0.65
    with pytest.raises(ValueError):
        mu_Y_reference(SMALL, 999, seed=1)


def test_haar_sampler_matches_hyperbolic_area():
    M, _ = equidist.sample_haar(200_000, np.random.default_rng(5))
    v = 1.0 / (M[:, 1, 0] ** 2 + M[:, 1, 1] ** 2)
    # fraction above height 2 is (1/2) / (pi/3)
    assert np.mean(v > 2) == pytest.approx(1.5 / math.pi, abs=0.005)


def test_decay_fit_exact_cases():
    ys = np.geomspace(1e-4, 1e-1, 7)
    fit = decay_fit(list(zip(ys, ys**0.5)))
    assert fit.slope == pytest.approx(0.5, abs=1e-12) and fit.rsquared == pytest.approx(1)
    fit = decay_fit(list(zip(ys, 3 * ys)))
    assert fit.slope == pytest.approx(1, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)
    two = decay_fit([(0.01, 0.1), (0.1, 0.2)])
    assert two.slope == pytest.approx(math.log(2) / math.log(10)) and two.rsquared == 1


def test_decay_fit_reproduces_least_squares(rng):
    ys = np.geomspace(1e-3, 0.5, 12)
    errs = ys**0.3 * np.exp(rng.normal(0, 0.2, 12))
    fit = decay_fit(list(zip(ys, errs)))
    A = np.stack([np.log(ys), np.ones(12)], axis=1)
    ref, *_ = np.linalg.lstsq(A, np.log(errs), rcond=None)
    assert np.allclose([fit.slope, fit.intercept], ref, atol=1e-12)
    assert 0 <= fit.rsquared <= 1


def test_decay_fit_drops_zeros():
    with pytest.warns(RuntimeWarning):
        fit = decay_fit([(0.1, 0.0), (0.01, 0.1), (0.001, 0.01)])
    assert fit.dropped == 1 and fit.slope == pytest.approx(1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        with pytest.raises(ValueError):
            decay_fit([(0.1, 0.0), (0.01, 0.0), (0.5, 1.0)])


def test_decay_estimator():
    ys = np.geomspace(1e-3, 1e-1, 5)
    est = DecayRateEstimator().fit(ys, 2 * ys**0.25)
    assert est.slope_ == pytest.approx(0.25)
    assert np.allclose(est.predict(ys), 2 * ys**0.25)
    assert est.score(ys, 2 * ys**0.25) == pytest.approx(1)
    assert clone(est).get_params() == {}
    with pytest.raises(ValueError):
        DecayRateEstimator().fit(ys, ys[:3])


def test_experiment_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(quadratic_lift(), ANNULUS, y_grid=(0.1, 0.01, 5))
    with pytest.raises(ValueError):
        ExperimentConfig(quadratic_lift(), ANNULUS, y_grid=(0.01, 0.1, 1))
    with pytest.raises(ValueError):
        ExperimentConfig(quadratic_lift(), ANNULUS, mc_samples=10)


def test_two_point_experiment_is_deterministic():
    cfg = ExperimentConfig(quadratic_lift(), ANNULUS, y_grid=(0.05, 0.2, 2))
    res = run_experiment(cfg)
    assert len(res.rows) == 2
    fit = res.fit
    (y1, _, _, e1), (y2, _, _, e2) = res.rows
    assert fit.slope == pytest.approx(math.log(e2 / e1) / math.log(y2 / y1))
    outs = []
    for workers in (1, 2):
        buf, js = io.StringIO(), io.StringIO()
        r = run_experiment(ExperimentConfig(quadratic_lift(), ANNULUS, y_grid=(0.05, 0.2, 2),
                                            workers=workers))
        equidist.write_equidist(buf, js, r, cfg.echo())
        outs.append((buf.getvalue(), js.getvalue()))
    assert outs[0] == outs[1]
    assert outs[0][0].splitlines()[1] == "y,nu,mu_ref,abs_err"


def test_estimator_front_end():
    exp = equidist.EquidistributionExperiment(psi="annulus:1,2").fit([0.05, 0.2])
    assert exp.table_.shape == (2, 4)
    assert exp.get_params()["lift"] == "quadratic"
    assert np.isfinite(exp.slope_)
