"""Per-iteration subproblem solvers.

A :class:`ProxEnvironment` fixes how one proximal step is computed:

* ``direct`` mode minimizes f(x) + D_h(x, center)/eta over the feasible set
  (simplex + entropy divergence, or free space + euclidean divergence);
* ``dual`` mode solves the saddle subproblem of the multiplier method,
  max over multipliers of min over x of
  f(x) + lam@(A x - b) - D_h(lam, center)/eta.

In dual mode the x-block is the smoothed primal: the quadratic penalty for
the euclidean divergence, the exponential penalty sum_i center_i *
exp(eta*(A x - b)_i) for the entropy divergence.  The multiplier update is
then the closed-form mirror step grad h*(grad h(center) + eta*(A x - b)),
clamped at zero for the euclidean/inequality combination, so the
multiplier-side optimality condition holds exactly and the reported
residual measures only the x-block stationarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    ENTROPY,
    EUCLIDEAN,
    FULL_SPACE,
    ORTHANT,
    SIMPLEX,
    BregmanGeometry,
    MirrorPoint,
    _logsumexp,
)
from .problems import EQUALITY, FREE, INEQUALITY, SIMPLEX_SET, ConstrainedProblem

DIRECT = "direct"
DUAL = "dual"


class InnerMaxIters(RuntimeError):
    """The inner solver did not reach its tolerance within the iteration cap."""


@dataclass(frozen=True)
class ProxEnvironment:
    problem: ConstrainedProblem
    geom: BregmanGeometry
    mode: str
    inner_tol: float = 1e-10
    inner_max_iters: int = 10000

    def __post_init__(self):
        p, g = self.problem, self.geom
        if self.mode == DIRECT:
            if p.A is not None:
                raise ValueError("direct mode takes an unconstrained problem")
            ok = (p.feasible_set == SIMPLEX_SET and g.kind == ENTROPY and g.domain.kind == SIMPLEX) or (
                p.feasible_set == FREE and g.kind == EUCLIDEAN and g.domain.kind == FULL_SPACE
            )
            if not ok:
                raise ValueError("direct mode needs simplex+entropy or free+euclidean")
            if g.dim != p.n:
                raise ValueError("geometry dimension does not match the problem")
        elif self.mode == DUAL:
            if p.A is None:
                raise ValueError("dual mode needs a linear constraint")
            if g.dim != p.m:
                raise ValueError("geometry dimension does not match the constraint count")
            if p.sense == EQUALITY and g.domain.kind != FULL_SPACE:
                raise ValueError("equality constraints pair with a full-space multiplier domain")
            if p.sense == INEQUALITY and g.domain.kind != ORTHANT:
                raise ValueError("inequality constraints pair with the nonnegative orthant")
        else:
            raise ValueError(f"unknown mode {self.mode!r}")

    def d_at(self, point: np.ndarray) -> float:
        """Exact objective of the maximized function at a candidate point.

        Only the direct mode has a cheap exact evaluation (the sign-flipped
        primal objective); dual runs report the Lagrangian value recorded by
        each prox step instead.
        """
        if self.mode != DIRECT:
            raise ValueError("exact d-values are only available in direct mode")
        return -self.problem.objective.value(point)

    def d_value(self, result: "ProxResult") -> float:
        if self.mode == DIRECT:
            return -self.problem.objective.value(result.lam.value)
        p = self.problem
        lagr = p.objective.value(result.x) + float(result.lam.value @ (p.A @ result.x - p.b))
        return lagr


@dataclass(frozen=True)
class ProxResult:
    x: np.ndarray | None
    lam: MirrorPoint
    iterations: int
    residual: float


def prox_step(env: ProxEnvironment, center, eta: float, warm: np.ndarray | None = None) -> ProxResult:
    """One proximal step from ``center`` with parameter ``eta``."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if isinstance(center, np.ndarray):
        center = env.geom.to_mirror(center)
    if env.mode == DIRECT:
        if env.geom.kind == ENTROPY:
            point, gap, iters = simplex_prox_solve(
                env.problem, center, eta, env.inner_tol, env.inner_max_iters
            )
            return ProxResult(None, point, iters, gap)
        return _euclidean_direct_prox(env, center, eta, warm)
    return _dual_prox(env, center, eta, warm)


def _euclidean_direct_prox(env, center, eta, warm):
    obj = env.problem.objective

    def fun(x):
        d = x - center.value
        return obj.value(x) + float(d @ d) / (2.0 * eta), obj.grad(x) + d / eta

    hess = None
    if hasattr(obj, "hess"):
        eye = np.eye(env.problem.n)

        def hess(x):
            return obj.hess(x) + eye / eta

    x0 = warm if warm is not None else center.value
    x, iters, res = _minimize(fun, x0, env.inner_tol, env.inner_max_iters, hess=hess)
    return ProxResult(None, env.geom.to_mirror(x), iters, res)


def _dual_prox(env, center, eta, warm):
    p = env.problem
    A, b = p.A, p.b
    obj = p.objective
    euclid = env.geom.kind == EUCLIDEAN
    inequality = p.sense == INEQUALITY

    if euclid and not inequality:

        def fun(x):
            r = A @ x - b
            w = center.value + eta * r
            val = obj.value(x) + float(center.value @ r) + 0.5 * eta * float(r @ r)
            return val, obj.grad(x) + A.T @ w

        def hess(x):
            return obj.hess(x) + eta * (A.T @ A)

    elif euclid and inequality:

        def fun(x):
            r = A @ x - b
            w = np.maximum(center.value + eta * r, 0.0)
            val = obj.value(x) + (float(w @ w) - float(center.value @ center.value)) / (2.0 * eta)
            return val, obj.grad(x) + A.T @ w

        def hess(x):
            r = A @ x - b
            act = (center.value + eta * r) > 0.0
            Aa = A[act]
            return obj.hess(x) + eta * (Aa.T @ Aa)

    else:  # entropy / inequality: exponential penalty
        log_center = center.mirror - 1.0

        def fun(x):
            s = log_center + eta * (A @ x - b)
            with np.errstate(over="ignore"):
                w = np.exp(s)
            val = obj.value(x) + float(np.sum(w)) / eta
            return val, obj.grad(x) + A.T @ w

        def hess(x):
            s = log_center + eta * (A @ x - b)
            with np.errstate(over="ignore"):
                w = np.exp(s)
            return obj.hess(x) + eta * (A.T @ (w[:, None] * A))

    x0 = warm if warm is not None else np.zeros(p.n)
    x, iters, res = _minimize(fun, x0, env.inner_tol, env.inner_max_iters, hess=hess)
    mirror = center.mirror + eta * (A @ x - b)
    if euclid and inequality:
        mirror = np.maximum(mirror, 0.0)
    lam = env.geom.from_mirror(mirror)
    return ProxResult(x, lam, iters, res)


# ----------------------------------------------------------------------
# smooth unconstrained minimization
# ----------------------------------------------------------------------


def smooth_minimize(fun, x0, tol=1e-10, max_iters=10000, hess=None) -> np.ndarray:
    """Minimize a smooth convex function given by fun(x) -> (value, gradient).

    Stops when ||grad|| <= tol * (1 + ||grad at x0||).  Uses a damped Newton
    method when a hessian callable is supplied and a BFGS update otherwise;
    both backtrack with an Armijo condition.
    """
    x, _, _ = _minimize(fun, np.asarray(x0, dtype=float), tol, max_iters, hess=hess)
    return x


def _minimize(fun, x0, tol, max_iters, hess=None):
    x = np.asarray(x0, dtype=float).copy()
    n = x.shape[0]
    f, g = fun(x)
    g0 = float(np.linalg.norm(g))
    target = tol * (1.0 + g0)
    Hinv = None if hess is not None else np.eye(n)
    for it in range(max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= target:
            return x, it, gnorm / (1.0 + g0)
        if hess is not None:
            H = hess(x)
            ridge = 0.0
            for _ in range(15):
                try:
                    d = np.linalg.solve(H + ridge * np.eye(n) if ridge else H, -g)
                    if g @ d < 0:
                        break
                except np.linalg.LinAlgError:
                    pass
                ridge = max(4.0 * ridge, 1e-12 * (1.0 + float(np.trace(H)) / n))
            else:
                d = -g
        else:
            d = -(Hinv @ g)
            if g @ d >= 0:
                Hinv = np.eye(n)
                d = -g
        slope = float(g @ d)
        alpha = 1.0
        for _ in range(60):
            x_new = x + alpha * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * alpha * slope:
                break
            # near the solution the Armijo decrease drops below the float
            # resolution of f; a Newton step that contracts the gradient is
            # safe to take for a convex objective
            if (
                hess is not None
                and alpha == 1.0
                and np.all(np.isfinite(g_new))
                and float(np.linalg.norm(g_new)) <= 0.9 * gnorm
            ):
                break
            alpha *= 0.5
        else:
            raise InnerMaxIters("line search failed to make progress")
        if Hinv is not None:
            s = x_new - x
            yv = g_new - g
            sy = float(s @ yv)
            if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(yv)):
                rho = 1.0 / sy
                V = np.eye(n) - rho * np.outer(s, yv)
                Hinv = V @ Hinv @ V.T + rho * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
    raise InnerMaxIters(f"no convergence in {max_iters} iterations (|g|={np.linalg.norm(g):.3g})")


# ----------------------------------------------------------------------
# entropy prox over the simplex
# ----------------------------------------------------------------------


def simplex_prox_solve(problem, center, eta, tol=1e-10, max_iters=10000):
    """argmin over the simplex of f(x) + D_KL(x, center)/eta.

    Returns (point, certified prox gap, iterations).  The gap certificate is
    the simplex linearization bound grad P(x) @ x - min_i grad P(x)_i, which
    upper-bounds the objective suboptimality of the returned point.
    Dispatch on objective structure:

    * constants return the center,
    * linear objectives have the closed-form multiplicative update,
    * smooth objectives are solved by a log-space Newton method on the
      interior stationarity system,
    * piecewise-max objectives go through the concave dual over the weight
      simplex, whose inner minimization is the linear closed form.
    """
    if isinstance(center, np.ndarray):
        raise TypeError("center must be a MirrorPoint; use geom.to_mirror")
    obj = problem.objective
    log_c = center.mirror - 1.0
    if obj.structure == "linear":
        logx = log_c - eta * obj.c
        logx -= _logsumexp(logx)
        return MirrorPoint(np.exp(logx), 1.0 + logx), 0.0, 0
    if obj.structure == "piecewise_max":
        return _piecewise_prox_dual(obj.rows, log_c, eta, tol, max_iters)
    if obj.smooth:
        return _entropy_prox_newton(obj, log_c, eta, tol, max_iters)
    raise ValueError(f"unsupported objective structure {obj.structure!r}")


def _normalized_point(logx):
    logx = logx - _logsumexp(logx)
    return MirrorPoint(np.exp(logx), 1.0 + logx)


def _entropy_prox_newton(obj, log_c, eta, tol, max_iters):
    """Newton on grad f(x) + (log x - log c)/eta = mu, sum x = 1, in z = log x."""
    n = log_c.shape[0]
    z = log_c - _logsumexp(log_c)
    x = np.exp(z)
    mu = float(np.mean(obj.grad(x)))
    for it in range(max_iters):
        x = np.exp(z)
        g = obj.grad(x) + (z - log_c) / eta
        xh = x / x.sum()
        gap = float(g @ xh - np.min(g))
        scale = 1.0 + abs(obj.value(xh))
        s = float(x.sum()) - 1.0
        if gap <= tol * scale and abs(s) <= 1e-12 * n:
            return _normalized_point(z), gap, it
        r = g - mu
        J = obj.hess(x) * x[None, :]
        J[np.diag_indices(n)] += 1.0 / eta
        KKT = np.zeros((n + 1, n + 1))
        KKT[:n, :n] = J
        KKT[:n, n] = -1.0
        KKT[n, :n] = x
        rhs = np.concatenate([-r, [-s]])
        try:
            sol = np.linalg.solve(KKT, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
        dz, dmu = sol[:n], sol[n]
        # keep the log step bounded so exp stays sane
        step_cap = 50.0
        norm_inf = float(np.max(np.abs(dz)))
        alpha = min(1.0, step_cap / norm_inf) if norm_inf > 0 else 1.0
        merit0 = float(r @ r) + s * s
        for _ in range(60):
            z_try = z + alpha * dz
            mu_try = mu + alpha * dmu
            x_try = np.exp(z_try)
            r_try = obj.grad(x_try) + (z_try - log_c) / eta - mu_try
            s_try = float(x_try.sum()) - 1.0
            if float(r_try @ r_try) + s_try * s_try <= (1.0 - 1e-4 * alpha) * merit0:
                break
            alpha *= 0.5
        z = z + alpha * dz
        mu = mu + alpha * dmu
    raise InnerMaxIters("simplex prox newton did not converge")


def _piecewise_prox_dual(C, log_c, eta, tol, max_iters):
    """Entropy prox of max_j C[j] @ x over the simplex via its concave dual.

    For weights w on the piece simplex the inner minimization has the closed
    form log x(w) = log c - eta*(C.T @ w) - logZ, with dual value
    g(w) = -logZ/eta (plus the additive (sum c - 1)/eta correction), dual
    gradient C @ x(w), and duality gap at (x(w), w) equal to
    max_j (C @ x)_j - w @ C @ x, which certifies the prox gap.

    An active-set ascent on w identifies the supporting pieces; eliminating
    x leaves the dual curvature badly conditioned once x concentrates, so a
    primal-dual Newton polish on the full stationarity system finishes the
    solve to tolerance.
    """
    m, n = C.shape
    csum = float(np.sum(np.exp(log_c)))
    csum_corr = (csum - 1.0) / eta

    def primal_point(w):
        lw = log_c - eta * (C.T @ w)
        logZ = _logsumexp(lw)
        return lw - logZ, logZ

    def dual_value(logZ):
        return -logZ / eta + csum_corr

    def true_gap(w):
        logx, logZ = primal_point(w)
        x = np.exp(logx)
        div = float(x @ (logx - log_c)) - float(np.sum(x)) + csum
        primal = float(np.max(C @ x)) + div / eta
        return primal - dual_value(logZ), logx, primal

    w = np.full(m, 1.0 / m)
    active = np.ones(m, dtype=bool)
    coarse = max(tol, 1e-6)
    it = 0
    for it in range(max_iters):
        gap, logx, primal = true_gap(w)
        scale = 1.0 + abs(primal)
        if gap <= tol * scale:
            return _normalized_point(logx), gap, it
        if gap <= coarse * scale:
            break
        x = np.exp(logx)
        gval = dual_value(_logsumexp(log_c - eta * (C.T @ w)))
        grad = C @ x
        H = -eta * (C @ ((x[:, None] * C.T) - np.outer(x, x) @ C.T))
        # re-solve after freezing boundary coordinates pushed outward, so the
        # feasible step length below never collapses to zero
        for _ in range(m + 1):
            idx = np.flatnonzero(active)
            k = idx.size
            KKT = np.zeros((k + 1, k + 1))
            KKT[:k, :k] = -H[np.ix_(idx, idx)]
            KKT[:k, :k] += 1e-13 * np.eye(k)
            KKT[:k, k] = 1.0
            KKT[k, :k] = 1.0
            rhs = np.concatenate([grad[idx], [0.0]])
            try:
                sol = np.linalg.solve(KKT, rhs)
            except np.linalg.LinAlgError:
                sol = np.linalg.lstsq(KKT, rhs, rcond=None)[0]
            d = np.zeros(m)
            d[idx] = sol[:k]
            blocked = active & (w <= 0.0) & (d < 0.0)
            if not np.any(blocked) or k <= 1:
                break
            active &= ~blocked
        slope = float(grad @ d)
        # the face is exhausted once the achievable directional gain sits at
        # noise level; shift weight toward the best piece instead
        if float(np.linalg.norm(d)) <= 1e-12 * (1.0 + float(np.linalg.norm(w))) or (
            slope <= 1e-12 * (1.0 + abs(gval))
        ):
            j = int(np.argmax(grad))
            if grad[j] <= float(w @ grad) + 1e-15 * (1.0 + abs(gval)):
                break  # dual stationary to float precision; polish finishes it
            active[j] = True
            w = 0.99 * w + 0.01 * np.eye(m)[j]
            continue
        neg = d < 0
        alpha_max = 1.0
        if np.any(neg):
            alpha_max = min(1.0, float(np.min(-w[neg] / d[neg])))
        alpha = alpha_max
        accepted = False
        for _ in range(60):
            w_try = np.maximum(w + alpha * d, 0.0)
            ssum = w_try.sum()
            if ssum > 0:
                w_try = w_try / ssum
                _, logZ_try = primal_point(w_try)
                if dual_value(logZ_try) >= gval + 1e-4 * alpha * slope:
                    accepted = True
                    break
                if alpha == alpha_max:
                    gap_try, _, _ = true_gap(w_try)
                    if gap_try <= 0.9 * gap:
                        accepted = True
                        break
            alpha *= 0.5
        if not accepted:
            j = int(np.argmax(grad))
            active[j] = True
            w = 0.9 * w + 0.1 * np.eye(m)[j]
            continue
        w = w_try
        dropped = active & (w <= 0.0)
        if np.any(dropped):
            active &= ~dropped
        w[~active] = 0.0
    return _piecewise_polish(C, log_c, eta, tol, w, it, max_iters)


def _piecewise_polish(C, log_c, eta, tol, w, it0, max_iters):
    """Primal-dual Newton on the supporting-piece stationarity system.

    Unknowns (z = log x, mu, w_S, t) solve
        C_S.T w_S + (z - log_c)/eta + mu = 0,   C_S x = t,
        sum w_S = 1,                            sum exp(z) = 1.
    The (1/eta) block keeps the Jacobian well conditioned where the reduced
    dual curvature is degenerate.
    """
    m, n = C.shape
    csum = float(np.sum(np.exp(log_c)))

    def true_gap_from(z, w_full):
        x = np.exp(z)
        div = float(x @ (z - log_c)) - float(np.sum(x)) + csum
        primal = float(np.max(C @ x)) + div / eta
        lw = log_c - eta * (C.T @ w_full)
        logZ = _logsumexp(lw)
        dual = -logZ / eta + (csum - 1.0) / eta
        return primal - dual, primal

    support = w > max(1e-10, 1e-6 * float(np.max(w)))
    lw = log_c - eta * (C.T @ w)
    z = lw - _logsumexp(lw)
    for round_ in range(2 * m + 2):
        idx = np.flatnonzero(support)
        s = idx.size
        Cs = C[idx]
        ws = np.maximum(w[idx], 0.0)
        tot = ws.sum()
        ws = ws / tot if tot > 0 else np.full(s, 1.0 / s)
        x = np.exp(z)
        mu = -float(np.mean(Cs.T @ ws + (z - log_c) / eta))
        t = float(np.max(Cs @ x))
        for _ in range(80):
            x = np.exp(z)
            r1 = Cs.T @ ws + (z - log_c) / eta + mu
            r2 = Cs @ x - t
            r3 = np.array([ws.sum() - 1.0])
            r4 = np.array([x.sum() - 1.0])
            res = float(np.linalg.norm(np.concatenate([r1, r2, r3, r4])))
            if res <= 1e-14 * (1.0 + abs(t) * s + float(np.linalg.norm(ws))):
                break
            J = np.zeros((n + s + 2, n + s + 2))
            J[:n, :n] = np.eye(n) / eta
            J[:n, n] = 1.0
            J[:n, n + 1 : n + 1 + s] = Cs.T
            J[n : n + s, :n] = Cs * x[None, :]
            J[n : n + s, n + 1 + s] = -1.0
            J[n + s, n + 1 : n + 1 + s] = 1.0
            J[n + s + 1, :n] = x
            rhs = -np.concatenate([r1, r2, r3, r4])
            try:
                step = np.linalg.solve(J, rhs)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(J, rhs, rcond=None)[0]
            cap = float(np.max(np.abs(step[:n])))
            damp = min(1.0, 30.0 / cap) if cap > 0 else 1.0
            z = z + damp * step[:n]
            mu += damp * float(step[n])
            ws = ws + damp * step[n + 1 : n + 1 + s]
            t += damp * float(step[n + 1 + s])
        w_full = np.zeros(m)
        w_full[idx] = np.maximum(ws, 0.0)
        tot = w_full.sum()
        if tot <= 0:
            raise InnerMaxIters("piecewise polish lost its support")
        w_full = w_full / tot
        gap, primal = true_gap_from(z - _logsumexp(z), w_full)
        if gap <= tol * (1.0 + abs(primal)) and float(np.min(ws)) >= -1e-12:
            zn = z - _logsumexp(z)
            return _normalized_point(zn), gap, it0 + round_ + 1
        if float(np.min(ws)) < -1e-12:
            support[idx[int(np.argmin(ws))]] = False
            continue
        x = np.exp(z - _logsumexp(z))
        viol = C @ x - t
        viol[idx] = -np.inf
        j = int(np.argmax(viol))
        if viol[j] > 1e-15 * (1.0 + abs(t)):
            support[j] = True
            w = w_full * 0.99
            w[j] += 0.01
            continue
        raise InnerMaxIters(
            f"piecewise polish stalled with gap {gap:.3g} above tolerance"
        )
    raise InnerMaxIters("piecewise polish did not settle on a support")
