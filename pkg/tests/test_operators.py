import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from adaptvi.operators import (
    CoveringBallProblem,
    SaddleComposite,
    composite_ltilde,
    composite_problem,
    covering_ball_problem,
    diag_problem,
    eval_composite,
    eval_covering_ball,
    eval_diag_squares,
    eval_holder,
    eval_identity,
    gen_covering_ball,
    holder_problem,
    identity_problem,
    ltilde,
    make_rng,
    sample_chisq,
    sample_lomax,
)

from conftest import uniform_in_ball


def test_identity_examples():
    np.testing.assert_array_equal(eval_identity([1.0, 2.0]), [1.0, 2.0])
    np.testing.assert_array_equal(eval_identity(np.zeros(3)), np.zeros(3))


def test_diag_squares_examples():
    np.testing.assert_array_equal(eval_diag_squares([1.0, 1.0, 1.0]), [1.0, 4.0, 9.0])
    np.testing.assert_array_equal(eval_diag_squares(np.zeros(4)), np.zeros(4))
    p = diag_problem(2)
    assert p.meta["kappa"] == 4.0
    assert p.known_L == 4.0 and p.mu == 1.0


@pytest.mark.parametrize("make", [identity_problem, diag_problem])
def test_minty_operators_strongly_monotone(make, rng):
    prob = make(6, 1.0)
    for _ in range(1000):
        u, v = rng.standard_normal((2, 6))
        lhs = float((prob(u) - prob(v)) @ (u - v))
        rhs = prob.mu * float((u - v) @ (u - v))
        assert lhs >= rhs * (1 - 1e-12)


@pytest.mark.parametrize("make", [identity_problem, diag_problem, lambda n, r: holder_problem(n, 1.0, 1.0, 0.5, r)])
def test_known_solution_solves_minty_problem(make, rng):
    prob = make(4, 2.0)
    xs = prob.known_solution
    for _ in range(200):
        x = uniform_in_ball(rng, 4, 2.0)
        assert float(prob(x) @ (xs - x)) <= 1e-8


# -- four-block saddle operator -------------------------------------------------------


def test_composite_example():
    sc = SaddleComposite(np.array([[1.0]]), 0.5, 0.5)
    np.testing.assert_allclose(eval_composite(sc, [1.0, 1.0, 0.0, 0.0]), [1.5, -0.5, -1.0, 1.0])
    np.testing.assert_array_equal(eval_composite(sc, np.zeros(4)), np.zeros(4))


@pytest.mark.parametrize("mu", [0.0, 1.0, -0.2, 1.5])
def test_composite_rejects_moduli_outside_unit_interval(mu):
    with pytest.raises(ValueError):
        SaddleComposite(np.eye(2), mu, 0.5)


def test_composite_prox_divergence_matches_definition(rng):
    sc = SaddleComposite(rng.standard_normal((3, 2)), 0.3, 0.6)
    for _ in range(50):
        u, v = rng.standard_normal((2, sc.dim))
        h = 1e-6
        grad = np.array([(sc.prox_d(v + h * e) - sc.prox_d(v - h * e)) / (2 * h) for e in np.eye(sc.dim)])
        direct = sc.prox_d(u) - sc.prox_d(v) - grad @ (u - v)
        assert sc.bregman(u, v) == pytest.approx(direct, rel=1e-6, abs=1e-8)


def test_composite_relative_strong_monotonicity(rng):
    sc = SaddleComposite(make_rng(11).standard_normal((5, 5)), 0.5, 0.5)
    for _ in range(1000):
        u, v = 3 * rng.standard_normal((2, sc.dim))
        lhs = float((eval_composite(sc, u) - eval_composite(sc, v)) @ (u - v))
        rhs = sc.bregman(u, v) + sc.bregman(v, u)
        assert lhs >= rhs - 1e-10 * max(1.0, abs(rhs))


def test_composite_smoothness_on_random_triples(rng):
    sc = SaddleComposite(make_rng(11).standard_normal((5, 5)), 0.5, 0.5)
    Lt = composite_ltilde(sc)
    for _ in range(1000):
        x, y, z = 3 * rng.standard_normal((3, sc.dim))
        lhs = float((eval_composite(sc, y) - eval_composite(sc, z)) @ (y - x))
        assert lhs <= Lt * (sc.bregman(y, z) + sc.bregman(x, y))


def test_composite_worst_case_smoothness_exceeds_ltilde():
    """The sharp constant is ||I + S||, S the skew part in prox-scaled
    coordinates; it sits above ltilde, and an aligned triple shows it."""
    sc = SaddleComposite(make_rng(5).standard_normal((5, 5)), 0.5, 0.5)
    root = np.sqrt(sc.prox_weights())
    G = np.array([eval_composite(sc, e) for e in np.eye(sc.dim)]).T
    M = G / root[:, None] / root[None, :]
    np.testing.assert_allclose((M + M.T) / 2, np.eye(sc.dim), atol=1e-14)
    sharp = np.linalg.norm(M, 2)
    skew = np.linalg.norm((M - M.T) / 2, 2)
    assert sharp == pytest.approx(np.sqrt(1 + skew**2), rel=1e-12)
    assert sharp > composite_ltilde(sc)

    U, _, Vt = np.linalg.svd(M)
    y = np.zeros(sc.dim)
    z = y - Vt[0] / root
    x = y - U[:, 0] / root
    ratio = float((eval_composite(sc, y) - eval_composite(sc, z)) @ (y - x)) / (sc.bregman(y, z) + sc.bregman(x, y))
    assert ratio == pytest.approx(sharp, rel=1e-10)


def test_composite_problem_is_euclidean_in_scaled_coordinates(rng):
    sc = SaddleComposite(rng.standard_normal((3, 4)), 0.4, 0.7)
    prob = composite_problem(sc, 2.0)
    back = prob.meta["to_natural"]
    for _ in range(100):
        u, v = rng.standard_normal((2, sc.dim))
        assert 0.5 * float((u - v) @ (u - v)) == pytest.approx(sc.bregman(u * back, v * back), rel=1e-12)
        lhs = float((prob(u) - prob(v)) @ (u - v))
        assert lhs == pytest.approx(float((u - v) @ (u - v)), rel=1e-10)


def test_ltilde_examples():
    assert ltilde(0.3, 1.0, 1.0, 2.0, 3.0, 1.0, 1.0) == 6.0
    assert ltilde(2.0, 0.0, 1.0, 2.0, 3.0, 1.0, 1.0) == 14.0
    assert ltilde(0.5, 0.0, 1.0, 2.0, 3.0, 1.0, 1.0) == 56.0
    assert ltilde(0.0, 1.0, 1.0, 2.0, 3.0, 1.0, 1.0) == 6.0


def test_ltilde_rejects_zero_delta_below_lipschitz():
    with pytest.raises(ValueError):
        ltilde(0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0)


# -- Hölder fixture ------------------------------------------------------------------------


def test_holder_examples():
    x = np.array([1.0, -2.0])
    np.testing.assert_allclose(eval_holder(0.5, 2.0, 1.0, x), 2.5 * x)
    np.testing.assert_allclose(eval_holder(0.0, 1.0, 0.5, [4.0, 0.0]), [2.0, 0.0])
    np.testing.assert_array_equal(eval_holder(1.0, 1.0, 0.5, np.zeros(3)), np.zeros(3))


@pytest.mark.parametrize("nu", [0.25, 0.5, 0.75])
def test_holder_continuity_loose_constant(nu, rng):
    mu, L_nu = 1.0, 1.5
    for _ in range(500):
        x = uniform_in_ball(rng, 3)
        y = uniform_in_ball(rng, 3)
        d = np.linalg.norm(x - y)
        lhs = np.linalg.norm(eval_holder(mu, L_nu, nu, x) - eval_holder(mu, L_nu, nu, y))
        assert lhs <= (mu * 2.0 + 3 * L_nu) * d**nu + 1e-12


# -- covering ball ----------------------------------------------------------------------------


def test_covering_ball_hand_example():
    prob = CoveringBallProblem(np.array([[1.0, 0.0], [0.0, 2.0]]), np.array([[1.0, 1.0]]))
    ev = eval_covering_ball(prob, [0.0, 0.0], [0.0])
    np.testing.assert_array_equal(ev.x_block, [0.0, -4.0])
    np.testing.assert_array_equal(ev.lam_block, [5.0])
    assert ev.objective == 4.0


def test_covering_ball_ties_pick_smallest_index():
    prob = CoveringBallProblem(np.array([[1.0, 0.0], [-1.0, 0.0]]), np.array([[1.0, 1.0]]))
    ev = eval_covering_ball(prob, [0.0, 0.0], [0.0])
    np.testing.assert_array_equal(ev.x_block, [-2.0, 0.0])


def test_covering_ball_lambda_block_at_origin():
    cb = gen_covering_ball(3, 4, 5, 6)
    ev = eval_covering_ball(cb, np.zeros(4), np.ones(5))
    np.testing.assert_array_equal(ev.lam_block, np.full(5, 5.0))


def test_covering_ball_multiplier_terms():
    cb = gen_covering_ball(1, 3, 2, 4, "ChiSq3")
    x = np.array([0.1, -0.2, 0.3])
    lam = np.array([0.5, 2.0])
    ev = eval_covering_ball(cb, x, lam)
    k = int(np.argmax(cb.sq_dists(x)))
    expected = 2 * (x - cb.points_A[k]) + 2 * (lam[0] * cb.alpha[0] + lam[1] * cb.alpha[1]) * x
    np.testing.assert_allclose(ev.x_block, expected, rtol=1e-14)
    np.testing.assert_allclose(ev.lam_block, 5.0 - cb.alpha @ (x * x), rtol=1e-14)


def test_covering_ball_rejects_multipliers_outside_box():
    cb = gen_covering_ball(0, 2, 1, 2)
    with pytest.raises(ValueError):
        eval_covering_ball(cb, np.zeros(2), [-1.0])
    with pytest.raises(ValueError):
        eval_covering_ball(cb, np.zeros(2), [11.0])


def test_covering_ball_subgradient_inequality(rng):
    cb = gen_covering_ball(7, 5, 2, 8)
    for _ in range(500):
        x, u = 2 * rng.standard_normal((2, 5))
        g = eval_covering_ball(cb, x, np.zeros(2)).x_block
        assert cb.psi(u) >= cb.psi(x) + float(g @ (u - x)) - 1e-9


def test_covering_ball_problem_bundle():
    cb = gen_covering_ball(0, 3, 2, 4)
    prob = covering_ball_problem(cb)
    assert prob.dim == 5 and prob.mu == 2.0
    z = np.array([0.1, 0.2, 0.3, 1.0, 0.0])
    ev = eval_covering_ball(cb, z[:3], z[3:])
    np.testing.assert_array_equal(prob(z), np.concatenate([ev.x_block, ev.lam_block]))
    assert prob.objective(z) == cb.psi(z[:3])


def test_covering_ball_json_round_trip():
    cb = gen_covering_ball(42, 6, 3, 5, "ChiSq3")
    doc = json.loads(cb.to_json())
    assert doc["dims"] == {"n": 6, "m": 3, "s": 5}
    assert doc["seed"] == 42 and doc["case"] == "ChiSq3" and doc["dual_cap"] == 10.0
    back = CoveringBallProblem.from_json(cb.to_json())
    np.testing.assert_array_equal(back.points_A, cb.points_A)
    np.testing.assert_array_equal(back.alpha, cb.alpha)


@given(st.integers(0, 2**63 - 1), st.sampled_from(["Lomax10", "ChiSq3"]))
def test_generator_is_deterministic(seed, case):
    a = gen_covering_ball(seed, 3, 2, 4, case)
    b = gen_covering_ball(seed, 3, 2, 4, case)
    np.testing.assert_array_equal(a.points_A, b.points_A)
    np.testing.assert_array_equal(a.alpha, b.alpha)
    assert np.all(a.alpha >= 0)


def test_generator_rejects_bad_input():
    with pytest.raises(ValueError):
        gen_covering_ball(0, 0, 1, 1)
    with pytest.raises(ValueError):
        gen_covering_ball(0, 1, 1, 1, "Gamma")


def test_sample_means():
    lomax = sample_lomax(make_rng(2024), 10.0, 100_000)
    chisq = sample_chisq(make_rng(2024), 3, 100_000)
    assert abs(lomax.mean() - 1.0 / 9.0) <= 0.01
    assert abs(chisq.mean() - 3.0) <= 0.05


@given(arrays(np.float64, 3, elements=st.floats(-10, 10)))
def test_identity_is_fixed_by_copy(x):
    out = eval_identity(x)
    np.testing.assert_array_equal(out, x)
    out[0] += 1.0
    assert out[0] != x[0]
