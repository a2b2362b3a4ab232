import json

import numpy as np
import pytest

import oracles
from condgraph.objective import make_f_eps, make_plateau, make_quadratic, objective_from_label, square
from condgraph.optimize import (
    CLASSES,
    adaptive_gd,
    estimate_rate,
    first_hit,
    gd,
    gd_step,
    heavy_ball,
    hb_step,
    sublinear_slack,
)
from condgraph.tuning import hb_quadratic_rule


def test_gd_one_step_to_minimizer():
    t = gd(make_quadratic([2.0]), [1.0], 0.5, 5)
    assert t.iterates[1, 0] == 0.0
    assert first_hit(t, 0.5) == 1


def test_trajectory_shapes(f_lrp):
    t = gd(f_lrp, [3.0], 0.01, 50)
    n = len(t)
    assert n == 51
    for s in (t.values, t.grad_norms, t.subopt, t.dist):
        assert s.shape == (n,)
    assert np.all(t.subopt >= -1e-12)
    lines = t.to_csv().splitlines()
    assert lines[0] == "iter,x0,f,grad_norm,subopt,dist"
    assert len(lines) == 52


def test_gd_matches_scalar_oracle(f_lrp):
    t = gd(f_lrp, [3.3], 0.05, 100)
    ref = oracles.gd_scalar(oracles.lrp_grad, 3.3, 0.05, 100)
    assert np.array_equal(t.iterates[:, 0], ref)


def test_replay(f_lrp):
    t = heavy_ball(f_lrp, [3.3], 0.06, 0.3, 200)
    for k in range(1, len(t)):
        prev = t.iterates[k - 2] if k >= 2 else t.iterates[0]
        x = hb_step(t.iterates[k - 1], prev, f_lrp.grad(t.iterates[k - 1]), 0.06, 0.3)
        assert np.array_equal(x, t.iterates[k])
    t2 = heavy_ball(f_lrp, [3.3], 0.06, 0.3, 200)
    assert np.array_equal(t.iterates, t2.iterates)


def test_gd_step_is_plain():
    assert np.array_equal(gd_step(np.array([1.0]), np.array([2.0]), 0.25), np.array([0.5]))


@pytest.mark.parametrize("eps", [0.1, 0.5])
def test_f_eps_two_steps(eps):
    t = gd(make_f_eps(eps), [3.0], 0.5, 5)
    assert abs(t.iterates[2, 0]) < 1e-12
    assert first_hit(t, 1e-9) <= 2


def test_f_eps_slow_tuning():
    eps = 0.1
    t = gd(make_f_eps(eps), [3.0], eps / (2 * eps + 1), 50)
    c = (1 - eps**2) / ((2 * eps + 1) * (1 + eps**2))
    x = np.abs(t.iterates[:, 0])
    assert np.all(x[1:] >= c * x[:-1] - 1e-12)
    assert c == pytest.approx(0.8168, abs=1e-4)


def test_hb_beta_zero_is_gd(f_lrp):
    a = gd(f_lrp, [3.3], 0.03, 300)
    b = heavy_ball(f_lrp, [3.3], 0.03, 0.0, 300)
    assert np.array_equal(a.iterates, b.iterates)


def test_hb_lrp_tunings(f_lrp):
    bad = heavy_ball(f_lrp, [3.3], *hb_quadratic_rule(25, 1), 2000)
    assert estimate_rate(bad).cls in ("stalled", "diverged")
    assert first_hit(bad, 0.1) is None
    good = heavy_ball(f_lrp, [3.3], *hb_quadratic_rule(25, 19), 2000)
    assert estimate_rate(good).cls == "converged_linear"


def test_adaptive_reductions(f_lrp):
    a = gd(f_lrp, [3.0], 0.02, 100)
    b = adaptive_gd(f_lrp, [3.0], 0.02, lambda t: 1.0, 100)
    assert np.array_equal(a.iterates, b.iterates)


def test_adaptive_equals_composed():
    f = objective_from_label("logistic:seed=42,d=3,m=200")
    x0 = f.minimizers.low + 2.0
    a = adaptive_gd(f, x0, 0.5, lambda t: 2.0 * t, 300)
    b = gd(square(f), x0, 0.5, 300)
    assert np.max(np.abs(a.iterates - b.iterates)) <= 1e-12


def test_input_validation(f_lrp):
    with pytest.raises(ValueError):
        gd(f_lrp, [1.0], 0.0, 10)
    with pytest.raises(ValueError):
        heavy_ball(f_lrp, [1.0], 0.1, 1.0, 10)
    with pytest.raises(ValueError):
        gd(f_lrp, [1.0, 2.0], 0.1, 10)
    with pytest.raises(ValueError):
        first_hit(gd(f_lrp, [1.0], 0.01, 10), 0.0)


def test_divergence_flagged(f_lrp):
    t = gd(f_lrp, [3.0], 1.0, 500)
    assert t.diverged
    assert estimate_rate(t).cls == "diverged"


def test_rate_on_geometric_series():
    r = estimate_rate(0.9 ** np.arange(100))
    assert r.linear_rate == pytest.approx(0.9, abs=1e-12)
    assert r.cls == "converged_linear"
    assert json.loads(r.to_json())["class"] == "converged_linear"


def test_rate_on_quadratic():
    f = make_quadratic([1.0, 10.0])
    t = gd(f, [3.0, 3.0], 2 / 11, 200)
    assert estimate_rate(t, series="dist_sq").linear_rate == pytest.approx((9 / 11) ** 2, abs=1e-6)
    assert estimate_rate(t).linear_rate <= (9 / 11) ** 2 + 1e-9


@pytest.mark.parametrize("alpha", [0.1, 0.5, 1.0])
def test_plateau_stalls(alpha):
    t = gd(make_plateau(0.5, 1.0), [3.0], alpha, 300)
    r = estimate_rate(t)
    assert r.cls == "stalled"
    assert t.subopt[-1] == pytest.approx(0.75)


def test_sublinear_classification():
    r = estimate_rate(1.0 / np.arange(1, 2001))
    assert r.cls == "converged_sublinear"


def test_flat_series_stalls():
    assert estimate_rate(np.full(50, 0.3)).cls == "stalled"


def test_short_series_rejected():
    with pytest.raises(ValueError):
        estimate_rate(np.ones(5))


def test_classes_closed():
    for s in (0.5 ** np.arange(40), np.ones(40), 2.0 ** np.arange(40), 1 / np.arange(1, 41)):
        assert estimate_rate(s).cls in CLASSES


@pytest.mark.parametrize("label,L", [("quadratic:1,10", 10.0), ("smooth_abs", 1.0), ("box_well:-1,1", 1.0)])
def test_sublinear_bounds(label, L):
    f = objective_from_label(label)
    x0 = np.full(f.dimension, 3.0)
    assert sublinear_slack(gd(f, x0, 1 / L, 1000), L) >= 0
    assert sublinear_slack(gd(f, x0, 1 / (2 * L), 1000), L, best_iterate=True) >= 0
