import numpy as np
import pytest

import oracles
from condgraph.objective import (
    MinimizerSet,
    InvalidParameterError,
    make_f_eps,
    make_quadratic,
    objective_from_label,
)
from condgraph.starnorm import (
    IncompatiblePerturbationError,
    InvalidPerturbationError,
    Perturbation,
    PerturbationChangesMinimizersError,
    as_perturbation,
    diff_as_perturbation,
    make_omega_eps,
    perturb,
    perturbation_from_label,
    star_norm,
)


def test_example_norms():
    assert star_norm(perturbation_from_label("smooth_abs")).value == pytest.approx(1.0, abs=1e-6)
    assert star_norm(perturbation_from_label("cubic_ramp")).value == pytest.approx(1.5, abs=1e-6)


@pytest.mark.parametrize("eps", [0.4, 0.2, 0.1])
def test_omega_norm(eps):
    n = star_norm(make_omega_eps(eps)).value
    brute = oracles.brute_star_norm_1d(lambda t: oracles.omega_grad(t, eps))
    assert 0 < n <= eps / (1 - eps**2) + 1e-9
    assert n == pytest.approx(brute, abs=1e-6)


def test_omega_branches():
    eps = 0.3
    h = make_omega_eps(eps)
    t = np.linspace(-2, 3, 5001)
    g = h.grad(t[:, None])[:, 0]
    assert np.max(np.abs(g)) <= eps + 1e-12
    assert np.allclose(g, oracles.omega_grad(t, eps), atol=1e-12)
    assert h.grad(np.array([1.0]))[0] == pytest.approx(-eps)
    far = np.array([[1 + eps**2], [2.0], [50.0]])
    v = h.value(far)
    assert np.allclose(v, v[0])
    assert h.value(np.array([0.0])) == 0.0


def test_omega_bad_eps():
    for eps in (0.0, 1.0, 1.5):
        with pytest.raises(InvalidParameterError):
            make_omega_eps(eps)


def test_omega_direction_in_2d():
    u = np.array([0.6, 0.8])
    h = make_omega_eps(0.2, direction=u, x_star=np.array([1.0, -1.0]))
    assert h.dimension == 2
    x = np.array([1.0, -1.0]) + 1.0 * u
    assert np.allclose(h.grad(x), -0.2 * u)
    with pytest.raises(InvalidParameterError):
        make_omega_eps(0.2, direction=np.array([1.0, 1.0]), x_star=np.zeros(2))


def test_f_eps_difference_decreases():
    f0 = make_quadratic([2.0])
    norms = [star_norm(diff_as_perturbation(f0, make_f_eps(e))).value for e in (0.4, 0.2, 0.1, 0.05)]
    assert all(a > b for a, b in zip(norms, norms[1:]))


def test_zero_difference():
    f = make_quadratic([2.0])
    assert star_norm(diff_as_perturbation(f, f)).value == 0.0


def test_difference_recovers_omega():
    f = make_quadratic([2.0])
    h = make_omega_eps(0.2)
    g = perturb(f, h)
    assert star_norm(diff_as_perturbation(f, g)).value == pytest.approx(star_norm(h).value, abs=1e-12)


def test_incompatible_difference():
    with pytest.raises(IncompatiblePerturbationError):
        diff_as_perturbation(make_quadratic([2.0]), make_quadratic([2.0], center=[1.0]))


def test_roundtrip_f_eps():
    f0 = make_quadratic([2.0])
    for eps in (0.5, 0.1):
        fe = make_f_eps(eps)
        g = perturb(f0, diff_as_perturbation(f0, fe))
        x = np.linspace(-4, 4, 801)[:, None]
        assert np.max(np.abs(g(x) - fe(x))) < 1e-12


def test_perturb_keeps_minimizer():
    f = perturb(make_quadratic([2.0]), make_omega_eps(0.5))
    assert f.minimizers.same_as(MinimizerSet.point([0.0]))


def test_scaled_omega_regression_baseline():
    # norm 4 exceeds mu = 2 yet the minimizer survives; rejection starts once the bump digs below f*
    f = make_quadratic([2.0])
    h = make_omega_eps(0.5)
    perturb(f, h.scale(8.0))
    with pytest.raises(PerturbationChangesMinimizersError):
        perturb(f, h.scale(12.0))


def test_unbounded_perturbation_rejected():
    with pytest.raises(InvalidPerturbationError):
        Perturbation(
            value=lambda x: np.asarray(x)[..., 0] ** 4,
            gradient=lambda x: 4 * np.asarray(x)[..., :1] ** 3,
            anchor_set=MinimizerSet.point([0.0]),
            label="quartic",
        )


def test_nonvanishing_perturbation_rejected():
    with pytest.raises(InvalidPerturbationError):
        Perturbation(
            value=lambda x: np.asarray(x)[..., 0] ** 2 + 1.0,
            gradient=lambda x: 2 * np.asarray(x)[..., :1],
            anchor_set=MinimizerSet.point([0.0]),
            label="shifted",
        )


def test_wrong_gradient_rejected():
    with pytest.raises(InvalidPerturbationError):
        Perturbation(
            value=lambda x: np.asarray(x)[..., 0] ** 2,
            gradient=lambda x: 3 * np.asarray(x)[..., :1],
            anchor_set=MinimizerSet.point([0.0]),
            label="bad",
        )


def test_value_bound():
    for label in ("smooth_abs", "cubic_ramp", "omega_eps:0.2"):
        h = perturbation_from_label(label)
        n = star_norm(h).value
        x = np.linspace(-5, 5, 2001)[:, None]
        assert np.all(np.abs(h.value(x)) <= n * x[:, 0] ** 2 / 2 + 1e-12)


def test_label_grammar():
    h = perturbation_from_label("diff:f_eps:0.1-quadratic:2")
    assert star_norm(h).value == pytest.approx(star_norm(diff_as_perturbation(make_quadratic([2.0]), make_f_eps(0.1))).value)
    assert perturbation_from_label("0.5*omega_eps:0.1").label == "0.5*omega_eps:0.1"
    f = objective_from_label("quadratic:2+omega_eps:0.2")
    assert f(np.array([1.0])) == pytest.approx(1.0 + make_omega_eps(0.2).value(np.array([1.0])))


def test_discontinuity_family():
    f0 = make_quadratic([2.0])
    from condgraph.conditions import estimate_constant

    Ls, mus = [], []
    for eps in (0.2, 0.1, 0.05):
        f = perturb(f0, make_omega_eps(eps))
        Ls.append(estimate_constant("SC+", f).value)
        mus.append(estimate_constant("SC-", f).value)
    assert Ls[0] < Ls[1] < Ls[2]
    assert mus[0] > mus[1] > mus[2]


def test_as_perturbation_of_objective():
    h = as_perturbation(objective_from_label("smooth_abs"))
    assert h.value(np.array([0.0])) == 0.0
