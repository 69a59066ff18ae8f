import numpy as np
import pytest

from balm import problems as pb
from balm.geometry import euclidean_geometry, full_space

_REF_CACHE = {}


def cached_reference(problem):
    key = (problem.kind, problem.n, problem.m, problem.seed)
    if key not in _REF_CACHE:
        _REF_CACHE[key] = pb.compute_reference(problem)
    return _REF_CACHE[key]


@pytest.fixture(scope="session")
def pmax_paper():
    return pb.make_piecewise_max(15, 20, 0)


@pytest.fixture(scope="session")
def lse_paper():
    return pb.make_log_sum_exp(15, 20, 0)


@pytest.fixture(scope="session")
def qp_paper():
    return pb.make_random_qp(150, 30, 0)


@pytest.fixture(scope="session")
def mdp_paper():
    return pb.make_mdp_lp(30, 5, 0.9, 0)


def quadratic_toy(center):
    """min 0.5||x - center||^2 over free space; optimum (center, 0)."""
    center = np.asarray(center, dtype=float)
    n = center.shape[0]
    obj = pb.CallableObjective(
        lambda x: 0.5 * float((x - center) @ (x - center)),
        lambda x: x - center,
        lambda x: np.eye(n),
    )
    problem = pb.ConstrainedProblem(kind="toy", objective=obj, feasible_set="free", n=n)
    ref = pb.ReferenceSolution(x_star=center, lambda_star=None, f_star=0.0, rho_star=1.0)
    return problem, ref


def equality_toy():
    """min x^2/2 s.t. x = 1; optimum x* = 1, multiplier -1."""
    problem = pb.ConstrainedProblem(
        kind="toy",
        objective=pb.QuadraticObjective(np.eye(1)),
        feasible_set="free",
        n=1,
        A=np.array([[1.0]]),
        b=np.array([1.0]),
        sense="eq",
    )
    ref = pb.ReferenceSolution(
        x_star=np.array([1.0]), lambda_star=np.array([-1.0]), f_star=0.5, rho_star=3.0
    )
    return problem, ref
