import numpy as np
import pytest

from balm import problems as pb
from conftest import cached_reference


def test_seeded_generation_is_bit_reproducible():
    for make, dims in (
        (pb.make_piecewise_max, (15, 20)),
        (pb.make_log_sum_exp, (15, 20)),
        (pb.make_random_qp, (40, 10)),
        (pb.make_counterexample_lp, (6, 3)),
    ):
        a = make(*dims, seed=3)
        b = make(*dims, seed=3)
        if a.A is not None:
            assert np.array_equal(a.A, b.A) and np.array_equal(a.b, b.b)
        else:
            assert np.array_equal(a.attrs["rows"], b.attrs["rows"])
        c = make(*dims, seed=4)
        first = c.A if c.A is not None else c.attrs["rows"]
        second = a.A if a.A is not None else a.attrs["rows"]
        assert not np.array_equal(first, second)


def test_piecewise_max_oracle():
    p = pb.piecewise_max_problem(np.array([[0.0, 1.0]]))
    x = np.array([0.5, 0.5])
    assert p.objective.value(x) == pytest.approx(0.5)
    np.testing.assert_allclose(p.objective.subgrad(x), [0.0, 1.0])
    # tie-break at the smallest maximizing index
    p2 = pb.piecewise_max_problem(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert p2.objective.value(x) == pytest.approx(0.5)
    np.testing.assert_allclose(p2.objective.subgrad(x), [1.0, 0.0])


def test_piecewise_max_paper_scale(pmax_paper):
    C = pmax_paper.attrs["rows"]
    assert C.shape == (15, 20)
    assert np.max(np.abs(C)) <= 1.0


def test_log_sum_exp_trivial_cases():
    p = pb.log_sum_exp_problem(np.zeros((1, 2)))
    for x in (np.zeros(2), np.array([0.3, 0.7])):
        assert p.objective.value(x) == pytest.approx(1.0)
        np.testing.assert_allclose(p.objective.grad(x), np.zeros(2))
    p2 = pb.log_sum_exp_problem(np.array([[1.0, 0.0], [-1.0, 0.0]]))
    x = np.array([0.0, 1.0])
    assert p2.objective.value(x) == pytest.approx(2.0)
    np.testing.assert_allclose(p2.objective.grad(x), np.zeros(2), atol=1e-15)


def test_log_sum_exp_gradient_matches_central_differences(lse_paper):
    obj = lse_paper.objective
    rng = np.random.default_rng(5)
    x = rng.dirichlet(np.ones(20))
    g = obj.grad(x)
    h = 1e-6
    for i in rng.choice(20, size=6, replace=False):
        e = np.zeros(20)
        e[i] = h
        fd = (obj.value(x + e) - obj.value(x - e)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


def test_mdp_one_state_closed_form():
    p = pb.make_mdp_lp(1, 1, 0.9, 0)
    p.attrs["r"][:] = 0.5
    p.b[:] = -0.5
    ref = pb.compute_reference(p)
    assert ref.f_star == pytest.approx(0.5 / (1 - 0.9), abs=1e-9)


def test_mdp_two_state_chain_matches_value_iteration_oracle():
    # deterministic chain 0 -> 1 -> 1, rewards (1, 0), discount 0.5
    p = pb.make_mdp_lp(2, 1, 0.5, 0)
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 1] = 1.0
    r = np.array([[1.0], [0.0]])
    p.attrs["P"], p.attrs["r"] = P, r
    for s in range(2):
        p.A[s] = 0.5 * P[s, 0]
        p.A[s, s] -= 1.0
        p.b[s] = -r[s, 0]
    V = np.zeros(2)
    for _ in range(200):
        V = r[:, 0] + 0.5 * P[:, 0] @ V
    ref = pb.compute_reference(p)
    np.testing.assert_allclose(ref.x_star, V, atol=1e-12)
    assert np.all(p.A @ ref.x_star <= p.b + 1e-12)


def test_mdp_paper_scale(mdp_paper):
    assert mdp_paper.A.shape == (150, 30)
    assert mdp_paper.sense == "ineq"
    # rows are discount*P - indicator with P a stochastic matrix
    np.testing.assert_allclose(mdp_paper.A.sum(axis=1), 0.9 - 1.0, atol=1e-12)


def test_qp_rank_one_override_values():
    p = pb.quadratic_problem(np.array([1.0, 1.0]), np.zeros((1, 2)), np.ones(1))
    assert p.objective.value(np.array([1.0, -1.0])) == pytest.approx(0.0)
    p2 = pb.quadratic_problem(np.array([2.0, 0.0]), np.zeros((1, 2)), np.ones(1))
    assert p2.objective.value(np.array([1.0, 0.0])) == pytest.approx(2.0)


def test_qp_nonnegative_objective(qp_paper):
    rng = np.random.default_rng(11)
    for _ in range(1000):
        x = rng.normal(size=30) * 5
        assert qp_paper.objective.value(x) >= 0.0


def test_counterexample_structure():
    p = pb.make_counterexample_lp(6, 3, 1)
    A, b = p.A, p.b
    assert np.linalg.matrix_rank(A) == 3
    x_star = np.linalg.lstsq(A, b, rcond=None)[0]
    np.testing.assert_allclose(x_star, p.attrs["x_feasible"], atol=1e-10)
    assert np.linalg.norm(A @ x_star - b) <= 1e-12
    with pytest.raises(ValueError):
        pb.make_counterexample_lp(3, 3, 0)


def test_counterexample_reference_closed_form():
    # A = [[1],[1]], b = (1,1), c = (1): x* = 1, lambda* = -(1/2, 1/2), f* = 1
    p = pb.ConstrainedProblem(
        kind="counterexample",
        objective=pb.LinearObjective(np.array([1.0])),
        feasible_set="free",
        n=1,
        A=np.array([[1.0], [1.0]]),
        b=np.array([1.0, 1.0]),
        sense="eq",
    )
    ref = pb.compute_reference(p)
    assert ref.f_star == pytest.approx(1.0)
    np.testing.assert_allclose(ref.lambda_star, [-0.5, -0.5], atol=1e-14)
    assert ref.rho_star == pytest.approx(2.0 * np.sqrt(0.5) + 1.0)
    # c@(A.T A)^-1 c = 0.5 appears as the gap scale of the classical scheme
    gram = p.A.T @ p.A
    assert float(p.objective.c @ np.linalg.solve(gram, p.objective.c)) == pytest.approx(0.5)


def test_references_validate_and_satisfy_saddle_inequality(qp_paper, mdp_paper, pmax_paper):
    rng = np.random.default_rng(2)
    for problem in (qp_paper, mdp_paper):
        ref = cached_reference(problem)
        ref.validate(problem, feastol=1e-9)
        # f(x) - f* + lambda* @ (A x - b) >= -tol for random x
        for _ in range(100):
            x = ref.x_star + rng.normal(size=problem.n)
            lhs = (
                problem.objective.value(x)
                - ref.f_star
                + float(ref.lambda_star @ problem.constraint_residual(x))
            )
            assert lhs >= -1e-8 * (1.0 + abs(lhs))
    ref = cached_reference(pmax_paper)
    for _ in range(100):
        x = rng.dirichlet(np.ones(20))
        assert pmax_paper.objective.value(x) >= ref.f_star - 1e-9


def test_convexity_spot_check():
    rng = np.random.default_rng(7)
    for problem in (
        pb.make_piecewise_max(8, 6, 1),
        pb.make_log_sum_exp(8, 6, 1),
        pb.make_random_qp(12, 6, 1),
    ):
        obj = problem.objective
        for _ in range(200):
            x, y = rng.normal(size=(2, 6))
            mid = obj.value(0.5 * x + 0.5 * y)
            assert mid <= 0.5 * obj.value(x) + 0.5 * obj.value(y) + 1e-12


def test_serialization_roundtrip(tmp_path):
    for problem in (
        pb.make_piecewise_max(5, 4, 2),
        pb.make_log_sum_exp(5, 4, 2),
        pb.make_mdp_lp(3, 2, 0.9, 2),
        pb.make_random_qp(6, 4, 2),
        pb.make_counterexample_lp(5, 3, 2),
    ):
        path = tmp_path / f"{problem.kind}.txt"
        pb.save_instance(problem, path)
        loaded = pb.load_instance(path)
        assert loaded.kind == problem.kind and loaded.n == problem.n
        if problem.A is not None:
            assert np.array_equal(loaded.A, problem.A)
            assert np.array_equal(loaded.b, problem.b)
        else:
            assert np.array_equal(loaded.attrs["rows"], problem.attrs["rows"])
        x = np.abs(np.random.default_rng(0).normal(size=problem.n)) + 0.1
        if problem.feasible_set == "simplex":
            x = x / x.sum()
        assert loaded.objective.value(x) == problem.objective.value(x)
