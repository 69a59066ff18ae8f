"""Benchmark problem instances, oracles, and reference solutions.

Every instance is a :class:`ConstrainedProblem`: an objective oracle, a
feasible set (free space or the unit simplex), and an optional linear
constraint A x = b or A x <= b.  Generators are seeded with a Philox
counter-based generator (key word 0 = seed, key word 1 = stream index), so
the same (kind, dims, seed) always reproduces the same matrices bit for bit.
Draw order per kind is documented on each factory.

Reference solutions (x*, lambda*, f*, rho* = 2*||lambda*|| + 1) are computed
by routines that are deliberately independent of the solver stack in
:mod:`balm.solvers`: closed forms where available, value iteration for the
MDP program, an LP solve for the matrix game, and self-contained Newton /
method-of-multipliers loops otherwise.  Each reference is KKT-verified
before it is returned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

FREE = "free"
SIMPLEX_SET = "simplex"

EQUALITY = "eq"
INEQUALITY = "ineq"


class ReferenceUnavailable(RuntimeError):
    """No KKT-accurate reference could be produced within the budget."""


# ----------------------------------------------------------------------
# objective oracles
# ----------------------------------------------------------------------


class LinearObjective:
    """f(x) = c @ x."""

    structure = "linear"
    smooth = True

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    def value(self, x):
        return float(self.c @ x)

    def subgrad(self, x):
        return self.c

    grad = subgrad

    def hess(self, x):
        n = self.c.shape[0]
        return np.zeros((n, n))


class PiecewiseMaxObjective:
    """f(x) = max_j rows[j] @ x, subgradient from the smallest maximizing row."""

    structure = "piecewise_max"
    smooth = False

    def __init__(self, rows):
        self.rows = np.asarray(rows, dtype=float)

    def value(self, x):
        return float(np.max(self.rows @ x))

    def subgrad(self, x):
        j = int(np.argmax(self.rows @ x))  # argmax returns the first maximizer
        return self.rows[j]


class ExpSumObjective:
    """f(x) = sum_j exp(rows[j] @ x)."""

    structure = "exp_sum"
    smooth = True

    def __init__(self, rows):
        self.rows = np.asarray(rows, dtype=float)

    def _weights(self, x):
        return np.exp(self.rows @ x)

    def value(self, x):
        return float(np.sum(self._weights(x)))

    def grad(self, x):
        return self.rows.T @ self._weights(x)

    subgrad = grad

    def hess(self, x):
        w = self._weights(x)
        return self.rows.T @ (w[:, None] * self.rows)


class QuadraticObjective:
    """f(x) = 0.5 * x @ W @ x for a PSD matrix W."""

    structure = "quadratic"
    smooth = True

    def __init__(self, W):
        self.W = np.asarray(W, dtype=float)

    def value(self, x):
        return 0.5 * float(x @ (self.W @ x))

    def grad(self, x):
        return self.W @ x

    subgrad = grad

    def hess(self, x):
        return self.W


class CallableObjective:
    """Wraps value/grad/hess callables; handy for hand-built test problems."""

    def __init__(self, value, grad, hess=None, structure="smooth", smooth=True):
        self._value = value
        self._grad = grad
        self._hess = hess
        self.structure = structure
        self.smooth = smooth

    def value(self, x):
        return float(self._value(x))

    def grad(self, x):
        return np.asarray(self._grad(x), dtype=float)

    subgrad = grad

    def hess(self, x):
        if self._hess is None:
            raise AttributeError("no hessian oracle attached")
        return np.asarray(self._hess(x), dtype=float)


@dataclass
class ConstrainedProblem:
    kind: str
    objective: object
    feasible_set: str
    n: int
    A: np.ndarray | None = None
    b: np.ndarray | None = None
    sense: str | None = None
    seed: int | None = None
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.feasible_set not in (FREE, SIMPLEX_SET):
            raise ValueError(f"unknown feasible set {self.feasible_set!r}")
        if (self.A is None) != (self.b is None) or (self.A is None) != (self.sense is None):
            raise ValueError("A, b, sense must be given together")
        if self.A is not None:
            if self.A.shape != (self.b.shape[0], self.n):
                raise ValueError("constraint shape mismatch")
            if self.sense not in (EQUALITY, INEQUALITY):
                raise ValueError(f"unknown constraint sense {self.sense!r}")

    @property
    def m(self) -> int:
        return 0 if self.A is None else self.A.shape[0]

    def constraint_residual(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x - self.b

    def feasibility_norm(self, x: np.ndarray) -> float:
        if self.A is None:
            return 0.0
        r = self.constraint_residual(x)
        if self.sense == INEQUALITY:
            r = np.maximum(r, 0.0)
        return float(np.linalg.norm(r))


@dataclass(frozen=True)
class ReferenceSolution:
    x_star: np.ndarray
    lambda_star: np.ndarray | None
    f_star: float
    rho_star: float

    @property
    def d_star(self) -> float:
        # strong duality: the dual optimum equals the primal optimum
        return self.f_star

    def multiplier_norm(self) -> float:
        if self.lambda_star is None:
            return 0.0
        return float(np.linalg.norm(self.lambda_star))

    def validate(self, problem: ConstrainedProblem, feastol: float = 1e-9) -> None:
        scale = 1.0 + abs(self.f_star)
        if problem.A is not None:
            if self.lambda_star is None:
                raise ReferenceUnavailable("constrained problem without multiplier")
            feas = problem.feasibility_norm(self.x_star)
            if feas > feastol * scale:
                raise ReferenceUnavailable(f"primal infeasibility {feas:.3g}")
            if problem.sense == INEQUALITY:
                if np.min(self.lambda_star) < -feastol:
                    raise ReferenceUnavailable("negative multiplier on inequality")
                comp = float(self.lambda_star @ problem.constraint_residual(self.x_star))
                if abs(comp) > feastol * (1.0 + self.multiplier_norm()) * scale:
                    raise ReferenceUnavailable(f"complementarity residual {comp:.3g}")
            g = problem.objective.subgrad(self.x_star)
            stat = float(np.linalg.norm(g + problem.A.T @ self.lambda_star))
            if stat > feastol * (1.0 + float(np.linalg.norm(g))):
                raise ReferenceUnavailable(f"stationarity residual {stat:.3g}")


# ----------------------------------------------------------------------
# seeded generation
# ----------------------------------------------------------------------


def _rng(seed: int, stream: int) -> np.random.Generator:
    """Philox counter-based generator; key = (seed, stream)."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def piecewise_max_problem(rows, seed=None) -> ConstrainedProblem:
    rows = np.asarray(rows, dtype=float)
    return ConstrainedProblem(
        kind="pmax",
        objective=PiecewiseMaxObjective(rows),
        feasible_set=SIMPLEX_SET,
        n=rows.shape[1],
        seed=seed,
        attrs={"rows": rows},
    )


def make_piecewise_max(m: int, n: int, seed: int) -> ConstrainedProblem:
    """min over the simplex of max_j c_j @ x; stream 0 draws C ~ U[-1,1]^(m,n)."""
    if m < 1 or n < 1:
        raise ValueError("m, n must be >= 1")
    C = _rng(seed, 0).uniform(-1.0, 1.0, size=(m, n))
    return piecewise_max_problem(C, seed=seed)


def log_sum_exp_problem(rows, seed=None) -> ConstrainedProblem:
    rows = np.asarray(rows, dtype=float)
    return ConstrainedProblem(
        kind="lse",
        objective=ExpSumObjective(rows),
        feasible_set=SIMPLEX_SET,
        n=rows.shape[1],
        seed=seed,
        attrs={"rows": rows},
    )


def make_log_sum_exp(m: int, n: int, seed: int) -> ConstrainedProblem:
    """min over the simplex of sum_j exp(a_j @ x); stream 0 draws A ~ U[-1,1]^(m,n)."""
    if m < 1 or n < 1:
        raise ValueError("m, n must be >= 1")
    A = _rng(seed, 0).uniform(-1.0, 1.0, size=(m, n))
    return log_sum_exp_problem(A, seed=seed)


def make_mdp_lp(states: int, actions: int, discount: float, seed: int) -> ConstrainedProblem:
    """Value-function LP of a random MDP: min 1@V s.t. V(s) >= r(s,a) + g*P(.|s,a)@V.

    Rewritten as min c@x s.t. A x <= b with one row per (s, a) pair, rows in
    s-major order: A[(s,a), s'] = discount*P(s'|s,a) - [s'==s], b = -r.
    Stream 0 draws the raw transition table U[0,1]^(S,A,S) (normalized over
    the landing state), stream 1 the rewards U[0,1]^(S,A).
    """
    if not (0.0 < discount < 1.0):
        raise ValueError("discount must lie in (0, 1)")
    if states < 1 or actions < 1:
        raise ValueError("states, actions must be >= 1")
    raw = _rng(seed, 0).uniform(0.0, 1.0, size=(states, actions, states))
    P = raw / raw.sum(axis=2, keepdims=True)
    r = _rng(seed, 1).uniform(0.0, 1.0, size=(states, actions))
    m = states * actions
    A = np.zeros((m, states))
    b = np.zeros(m)
    for s in range(states):
        for a in range(actions):
            row = s * actions + a
            A[row] = discount * P[s, a]
            A[row, s] -= 1.0
            b[row] = -r[s, a]
    c = np.ones(states)
    return ConstrainedProblem(
        kind="mdp",
        objective=LinearObjective(c),
        feasible_set=FREE,
        n=states,
        A=A,
        b=b,
        sense=INEQUALITY,
        seed=seed,
        attrs={"P": P, "r": r, "discount": discount},
    )


def quadratic_problem(omega, A, b, seed=None) -> ConstrainedProblem:
    """min 0.5 x@W@x s.t. A x <= b with W = omega.T @ omega.

    ``omega`` may be a vector (rank-one W, the degenerate objective) or a
    matrix whose Gram product gives a full-rank W.
    """
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    W = omega.T @ omega
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    return ConstrainedProblem(
        kind="qp",
        objective=QuadraticObjective(W),
        feasible_set=FREE,
        n=A.shape[1],
        A=A,
        b=b,
        sense=INEQUALITY,
        seed=seed,
        attrs={"omega": omega},
    )


def make_random_qp(m: int, n: int, seed: int) -> ConstrainedProblem:
    """min 0.5 x@W@x s.t. A x <= b with W the Gram product of a U[0,2] square factor.

    Stream 0 draws the factor omega ~ U[0,2]^(n,n) and W = omega.T @ omega,
    stream 1 draws A ~ U[0,1]^(m,n), stream 2 draws b ~ U[-1,1]^m.  A square
    factor keeps W full rank; a single-row factor would put the flat minimum
    of f inside the feasible region for every seed (the all-positive rows of
    A leave recession directions that cross omega @ x = 0), collapsing the
    multiplier to zero and with it any visible primal convergence-rate
    separation between the plain and accelerated multiplier methods.
    """
    if m < 1 or n < 1:
        raise ValueError("m, n must be >= 1")
    omega = _rng(seed, 0).uniform(0.0, 2.0, size=(n, n))
    A = _rng(seed, 1).uniform(0.0, 1.0, size=(m, n))
    b = _rng(seed, 2).uniform(-1.0, 1.0, size=m)
    return quadratic_problem(omega, A, b, seed=seed)


def make_counterexample_lp(m: int, n: int, seed: int, max_resamples: int = 100) -> ConstrainedProblem:
    """Overdetermined equality LP min c@x s.t. A x = b with a unique feasible point.

    A (stream 0, resampled until full column rank) is m x n with m > n; the
    right-hand side is b = A x0 for a sampled x0 (stream 1), which guarantees
    feasibility, and c is drawn from stream 2.  All draws are U[-1,1].
    """
    if m <= n:
        raise ValueError("counterexample needs m > n")
    A = None
    for attempt in range(max_resamples):
        stream = 0 if attempt == 0 else 3 + attempt  # streams 1, 2 are taken
        cand = _rng(seed, stream).uniform(-1.0, 1.0, size=(m, n))
        if np.linalg.matrix_rank(cand) == n:
            A = cand
            break
    if A is None:
        raise ValueError("could not sample a full-column-rank matrix")
    x0 = _rng(seed, 1).uniform(-1.0, 1.0, size=n)
    b = A @ x0
    c = _rng(seed, 2).uniform(-1.0, 1.0, size=n)
    return ConstrainedProblem(
        kind="counterexample",
        objective=LinearObjective(c),
        feasible_set=FREE,
        n=n,
        A=A,
        b=b,
        sense=EQUALITY,
        seed=seed,
        attrs={"x_feasible": x0},
    )


# ----------------------------------------------------------------------
# reference solutions
# ----------------------------------------------------------------------


def compute_reference(
    problem: ConstrainedProblem, budget: int = 5000, feastol: float = 1e-9
) -> ReferenceSolution:
    """KKT-accurate reference for a benchmark instance.

    Dispatch: closed form for the counterexample LP, value iteration for the
    MDP program (when the generator attributes are present), an LP solve for
    the matrix game, a proximally regularized simplex Newton method for the
    smooth simplex instance, and a long classical method-of-multipliers run
    (euclidean penalty, eta = 10) for the remaining constrained instances.
    """
    if problem.kind == "counterexample":
        ref = _counterexample_reference(problem)
    elif problem.kind == "mdp" and "P" in problem.attrs:
        ref = _mdp_reference(problem, feastol)
    elif problem.kind == "pmax":
        ref = _game_lp_reference(problem, feastol)
    elif problem.kind == "lse":
        ref = _simplex_smooth_reference(problem, feastol)
    elif problem.A is not None and problem.objective.smooth:
        ref = _alm_reference(problem, budget=budget, feastol=feastol)
    else:
        raise ReferenceUnavailable(f"no reference method for kind {problem.kind!r}")
    ref.validate(problem, feastol=feastol)
    return ref


def _counterexample_reference(problem: ConstrainedProblem) -> ReferenceSolution:
    A, b, c = problem.A, problem.b, problem.objective.c
    gram = A.T @ A
    x_star = np.linalg.solve(gram, A.T @ b)
    lam_star = -A @ np.linalg.solve(gram, c)
    f_star = float(c @ x_star)
    return ReferenceSolution(
        x_star=x_star,
        lambda_star=lam_star,
        f_star=f_star,
        rho_star=2.0 * float(np.linalg.norm(lam_star)) + 1.0,
    )


def _mdp_reference(problem: ConstrainedProblem, feastol: float) -> ReferenceSolution:
    P = problem.attrs["P"]
    r = problem.attrs["r"]
    gamma = problem.attrs["discount"]
    states, actions, _ = P.shape
    V = np.zeros(states)
    # Bellman optimality iteration; contraction factor gamma
    for _ in range(100_000):
        Q = r + gamma * np.einsum("sat,t->sa", P, V)
        V_new = Q.max(axis=1)
        if np.max(np.abs(V_new - V)) < 1e-14 * (1.0 + np.max(np.abs(V_new))):
            V = V_new
            break
        V = V_new
    Q = r + gamma * np.einsum("sat,t->sa", P, V)
    policy = Q.argmax(axis=1)
    # discounted state-visitation measure for unit weight on every state
    P_pi = P[np.arange(states), policy]  # (states, states)
    mu = np.linalg.solve(np.eye(states) - gamma * P_pi.T, np.ones(states))
    lam = np.zeros(states * actions)
    for s in range(states):
        lam[s * actions + policy[s]] = mu[s]
    return ReferenceSolution(
        x_star=V,
        lambda_star=lam,
        f_star=float(np.sum(V)),
        rho_star=2.0 * float(np.linalg.norm(lam)) + 1.0,
    )


def _game_lp_reference(problem: ConstrainedProblem, feastol: float) -> ReferenceSolution:
    C = problem.attrs["rows"]
    m, n = C.shape
    # epigraph LP over the simplex: min t s.t. C x <= t, 1 @ x = 1, x >= 0
    c_lp = np.zeros(n + 1)
    c_lp[-1] = 1.0
    A_ub = np.hstack([C, -np.ones((m, 1))])
    A_eq = np.zeros((1, n + 1))
    A_eq[0, :n] = 1.0
    bounds = [(0, None)] * n + [(None, None)]
    res = linprog(
        c_lp,
        A_ub=A_ub,
        b_ub=np.zeros(m),
        A_eq=A_eq,
        b_eq=np.array([1.0]),
        bounds=bounds,
        method="highs",
    )
    if not res.success:
        raise ReferenceUnavailable(f"LP solve failed: {res.message}")
    x = np.maximum(res.x[:n], 0.0)
    x /= x.sum()
    f_star = problem.objective.value(x)
    # certify with the game dual: any w on the simplex lower-bounds the value
    w = np.maximum(-np.asarray(res.ineqlin.marginals), 0.0)
    if w.sum() <= 0:
        raise ReferenceUnavailable("degenerate LP duals")
    w /= w.sum()
    lower = float(np.min(C.T @ w))
    if f_star - lower > feastol * (1.0 + abs(f_star)):
        raise ReferenceUnavailable(f"duality gap {f_star - lower:.3g}")
    return ReferenceSolution(x_star=x, lambda_star=None, f_star=f_star, rho_star=1.0)


def _simplex_smooth_reference(problem: ConstrainedProblem, feastol: float) -> ReferenceSolution:
    obj = problem.objective
    n = problem.n
    x = np.full(n, 1.0 / n)
    tau = 1e-8
    gap = np.inf
    for _ in range(80):
        xc = x.copy()

        def val(y):
            return obj.value(y) + tau * float((y - xc) @ (y - xc))

        def grad(y):
            return obj.grad(y) + 2.0 * tau * (y - xc)

        def hess(y):
            return obj.hess(y) + 2.0 * tau * np.eye(n)

        x = _simplex_newton_min(val, grad, hess, x, tol=1e-13)
        g = obj.grad(x)
        gap = float(g @ x - np.min(g))
        if gap <= 0.1 * feastol * (1.0 + abs(obj.value(x))):
            break
    f_star = obj.value(x)
    if gap > feastol * (1.0 + abs(f_star)):
        raise ReferenceUnavailable(f"simplex optimality gap {gap:.3g}")
    return ReferenceSolution(x_star=x, lambda_star=None, f_star=f_star, rho_star=1.0)


def _simplex_newton_min(val, grad, hess, x0, tol=1e-12, max_iters=300):
    """Active-set Newton for min f over the unit simplex (f strictly convex)."""
    n = x0.shape[0]
    x = np.maximum(x0, 0.0)
    x /= x.sum()
    active = x > 0.0
    for _ in range(max_iters):
        g = grad(x)
        idx = np.flatnonzero(active)
        H = hess(x)[np.ix_(idx, idx)]
        k = idx.size
        KKT = np.zeros((k + 1, k + 1))
        KKT[:k, :k] = H
        KKT[:k, k] = -1.0
        KKT[k, :k] = 1.0
        rhs = np.concatenate([-g[idx], [0.0]])
        try:
            sol = np.linalg.solve(KKT, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
        d = np.zeros(n)
        d[idx] = sol[:k]
        nu = sol[k]
        if np.linalg.norm(d) <= tol * (1.0 + np.linalg.norm(x)):
            # first-order check on the inactive set
            viol = np.flatnonzero(~active & (g < nu - tol * (1.0 + abs(nu))))
            if viol.size == 0:
                return x
            active[viol[np.argmin(g[viol])]] = True
            continue
        # longest feasible step, then Armijo backtracking
        neg = d < 0
        alpha_max = 1.0
        if np.any(neg):
            alpha_max = min(1.0, float(np.min(-x[neg] / d[neg])))
        f0 = val(x)
        slope = float(g @ d)
        alpha = alpha_max
        for _ in range(60):
            x_new = x + alpha * d
            if val(x_new) <= f0 + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        x = np.maximum(x + alpha * d, 0.0)
        dropped = active & (x <= 0.0)
        if np.any(dropped):
            active &= ~dropped
        x[~active] = 0.0
        s = x.sum()
        if s <= 0:
            raise ReferenceUnavailable("active set collapsed")
        x /= s
    return x


def _alm_reference(problem: ConstrainedProblem, budget: int, feastol: float) -> ReferenceSolution:
    """Classical method of multipliers (euclidean penalty, eta = 10)."""
    eta = 10.0
    A, b = problem.A, problem.b
    obj = problem.objective
    n, m = problem.n, problem.m
    x = np.zeros(n)
    lam = np.zeros(m)
    for _ in range(budget):
        x = _penalized_newton(obj, A, b, lam, eta, problem.sense, x)
        r = A @ x - b
        if problem.sense == EQUALITY:
            lam_new = lam + eta * r
            feas = float(np.linalg.norm(r))
            comp = 0.0
        else:
            lam_new = np.maximum(lam + eta * r, 0.0)
            feas = float(np.linalg.norm(np.maximum(r, 0.0)))
            comp = abs(float(lam_new @ r))
        g = obj.grad(x)
        stat = float(np.linalg.norm(g + A.T @ lam_new))
        scale = 1.0 + abs(obj.value(x)) + float(np.linalg.norm(lam_new))
        lam = lam_new
        if feas <= feastol * scale and stat <= feastol * scale and comp <= feastol * scale:
            return ReferenceSolution(
                x_star=x,
                lambda_star=lam,
                f_star=obj.value(x),
                rho_star=2.0 * float(np.linalg.norm(lam)) + 1.0,
            )
    raise ReferenceUnavailable("method of multipliers did not reach feastol in budget")


def _penalized_newton(obj, A, b, lam, eta, sense, x0, tol=1e-13, max_iters=200):
    """Minimize the euclidean augmented objective in x (semismooth Newton)."""
    x = x0.copy()
    n = x.shape[0]

    def grad_and_active(x):
        r = A @ x - b
        w = lam + eta * r
        if sense == INEQUALITY:
            w = np.maximum(w, 0.0)
        return obj.grad(x) + A.T @ w, w

    g, w = grad_and_active(x)
    g0 = np.linalg.norm(g)
    for _ in range(max_iters):
        if np.linalg.norm(g) <= tol * (1.0 + g0):
            return x
        if sense == INEQUALITY:
            act = w > 0.0
            H = obj.hess(x) + eta * (A[act].T @ A[act])
        else:
            H = obj.hess(x) + eta * (A.T @ A)
        ridge = 0.0
        for _ in range(12):
            try:
                d = np.linalg.solve(H + ridge * np.eye(n), -g)
                break
            except np.linalg.LinAlgError:
                ridge = max(2.0 * ridge, 1e-12)
        else:
            raise ReferenceUnavailable("singular penalized hessian")
        if g @ d >= 0:
            d = -g
        # objective of the augmented problem for backtracking
        def value(y):
            r = A @ y - b
            if sense == INEQUALITY:
                wv = np.maximum(lam + eta * r, 0.0)
                return obj.value(y) + (float(wv @ wv) - float(lam @ lam)) / (2.0 * eta)
            return obj.value(y) + float(lam @ r) + 0.5 * eta * float(r @ r)

        f0 = value(x)
        slope = float(g @ d)
        alpha = 1.0
        for _ in range(60):
            x_new = x + alpha * d
            if value(x_new) <= f0 + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        x = x + alpha * d
        g, w = grad_and_active(x)
    return x


# ----------------------------------------------------------------------
# plain-text serialization
# ----------------------------------------------------------------------
#
# Format: one header line "kind m n seed", then kind-specific blocks of
# row-major decimal doubles (%.17g), one matrix row per line:
#   pmax / lse        : the m x n coefficient matrix
#   mdp / counterexample: A (m lines), b (one line), c (one line)
#   qp                : A (m lines), b (one line), W (n lines)


def save_instance(problem: ConstrainedProblem, path) -> None:
    lines = [f"{problem.kind} {problem.m if problem.A is not None else problem.attrs['rows'].shape[0]} {problem.n} {problem.seed if problem.seed is not None else -1}"]

    def emit(mat):
        mat = np.atleast_2d(mat)
        for row in mat:
            lines.append(" ".join(f"{v:.17g}" for v in row))

    if problem.kind in ("pmax", "lse"):
        emit(problem.attrs["rows"])
    elif problem.kind in ("mdp", "counterexample"):
        emit(problem.A)
        emit(problem.b)
        emit(problem.objective.c)
    elif problem.kind == "qp":
        emit(problem.A)
        emit(problem.b)
        emit(problem.objective.W)
    else:
        raise ValueError(f"cannot serialize kind {problem.kind!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_instance(path) -> ConstrainedProblem:
    with open(path) as fh:
        header = fh.readline().split()
        kind, m, n, seed = header[0], int(header[1]), int(header[2]), int(header[3])
        seed = None if seed < 0 else seed
        data = [np.array([float(t) for t in line.split()]) for line in fh if line.strip()]
    if kind in ("pmax", "lse"):
        rows = np.vstack(data)
        if rows.shape != (m, n):
            raise ValueError(f"{path}: expected {m}x{n} matrix")
        make = piecewise_max_problem if kind == "pmax" else log_sum_exp_problem
        return make(rows, seed=seed)
    A = np.vstack(data[:m])
    b = data[m]
    if kind in ("mdp", "counterexample"):
        c = data[m + 1]
        sense = INEQUALITY if kind == "mdp" else EQUALITY
        return ConstrainedProblem(
            kind=kind, objective=LinearObjective(c), feasible_set=FREE,
            n=n, A=A, b=b, sense=sense, seed=seed,
        )
    if kind == "qp":
        W = np.vstack(data[m + 1:])
        return ConstrainedProblem(
            kind="qp", objective=QuadraticObjective(W), feasible_set=FREE,
            n=n, A=A, b=b, sense=INEQUALITY, seed=seed,
        )
    raise ValueError(f"{path}: unknown kind {kind!r}")
