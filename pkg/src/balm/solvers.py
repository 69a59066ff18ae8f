"""Outer loops: proximal point, multiplier methods, and their accelerations.

Every run returns a :class:`RunTrace`.  Provable per-iteration inequalities
are checked online against the trace with an additive slack

    eps_slack = 10 * inner_tol * (1 + |lhs| + |rhs|)

that absorbs the inexactness of the inner solves (the analysis assumes the
subproblems are solved exactly; ours stop at ``inner_tol``).  A failed check
is recorded in ``trace.violations`` and, when ``strict`` is set, raised as
:class:`InvariantViolation` after the loop completes so the trace survives
for inspection.  Checks that rely on the triangle-scaling inequality are
asserted only on geometries whose constant is certified (euclidean, G >= 1);
on entropy geometries the constant is a heuristic and those margins are
recorded without being enforced.

Dual-mode traces report d(lam_{k+1}) as the Lagrangian value
f(x_{k+1}) + lam_{k+1} @ (A x_{k+1} - b); the inner stationarity condition
grad f(x_{k+1}) + A.T @ lam_{k+1} ~ 0 makes this the exact dual value up to
inner tolerance, which the slack absorbs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .geometry import BregmanGeometry, MirrorPoint, SIMPLEX, _logsumexp
from .inner import DIRECT, DUAL, ProxEnvironment, prox_step
from .problems import EQUALITY, INEQUALITY, ConstrainedProblem, ReferenceSolution


class InvariantViolation(RuntimeError):
    """A certified inequality failed beyond the inexactness slack."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class NumericalInstability(RuntimeError):
    """An extrapolation coefficient lost all precision."""


@dataclass(frozen=True)
class StepSchedule:
    """Proximal parameter sequence: constant, eta*(k+1)^p, or an explicit list."""

    kind: str
    eta0: float = 1.0
    power: float = 0.0
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in ("const", "poly", "explicit"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind in ("const", "poly") and self.eta0 <= 0:
            raise ValueError("eta must be positive")
        if self.kind == "explicit" and (not self.values or min(self.values) <= 0):
            raise ValueError("explicit schedule needs positive values")

    def eta(self, k: int) -> float:
        if self.kind == "const":
            return self.eta0
        if self.kind == "poly":
            return self.eta0 * float(k + 1) ** self.power
        return float(self.values[k])

    @classmethod
    def constant(cls, eta: float) -> "StepSchedule":
        return cls("const", eta0=eta)

    @classmethod
    def polynomial(cls, eta: float, p: float) -> "StepSchedule":
        return cls("poly", eta0=eta, power=p)

    @classmethod
    def explicit(cls, values) -> "StepSchedule":
        return cls("explicit", values=tuple(float(v) for v in values))

    @classmethod
    def parse(cls, text: str) -> "StepSchedule":
        head, _, rest = text.partition(":")
        if head == "const":
            return cls.constant(float(rest))
        if head == "poly":
            eta, p = rest.split(",")
            return cls.polynomial(float(eta), float(p))
        if head == "file":
            with open(rest) as fh:
                return cls.explicit([float(t) for t in fh.read().split()])
        raise ValueError(f"cannot parse schedule {text!r}")

    def describe(self) -> str:
        if self.kind == "const":
            return f"const:{self.eta0:g}"
        if self.kind == "poly":
            return f"poly:{self.eta0:g},{self.power:g}"
        return f"explicit[{len(self.values)}]"


@dataclass
class RunTrace:
    algorithm: str
    ks: list = field(default_factory=list)
    etas: list = field(default_factory=list)
    thetas: list = field(default_factory=list)
    xs: list = field(default_factory=list)
    lams: list = field(default_factory=list)
    d_vals: list = field(default_factory=list)
    primal_objs: list = field(default_factory=list)
    feas: list = field(default_factory=list)
    erg_primal_gap: list = field(default_factory=list)
    erg_feas: list = field(default_factory=list)
    bound_lhs: list = field(default_factory=list)
    bound_rhs: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    def append_row(
        self, k, eta, theta=None, x=None, lam=None, d_val=None, primal_obj=None,
        feas=None, erg_primal_gap=None, erg_feas=None, bound_lhs=None, bound_rhs=None,
    ):
        self.ks.append(k)
        self.etas.append(eta)
        self.thetas.append(theta)
        self.xs.append(x)
        self.lams.append(lam)
        self.d_vals.append(d_val)
        self.primal_objs.append(primal_obj)
        self.feas.append(feas)
        self.erg_primal_gap.append(erg_primal_gap)
        self.erg_feas.append(erg_feas)
        self.bound_lhs.append(bound_lhs)
        self.bound_rhs.append(bound_rhs)

    def bound_margins(self):
        return [
            None if (l is None or r is None) else r - l
            for l, r in zip(self.bound_lhs, self.bound_rhs)
        ]

    def record_violation(self, message: str):
        self.violations.append(message)

    def finish(self, strict: bool):
        if self.violations:
            self.status = "invariant_violation"
            if strict:
                head = self.violations[0]
                raise InvariantViolation(
                    f"{len(self.violations)} violation(s); first: {head}", trace=self
                )
        return self


def _slack(tol: float, lhs: float, rhs: float) -> float:
    return 10.0 * tol * (1.0 + abs(lhs) + abs(rhs))


def _reference_point(env_mode: str, reference: ReferenceSolution) -> np.ndarray:
    if env_mode == DIRECT:
        return np.asarray(reference.x_star, dtype=float)
    if reference.lambda_star is None:
        raise ValueError("dual-mode checks need a multiplier in the reference")
    return np.asarray(reference.lambda_star, dtype=float)


def _reference_d(env_mode: str, reference: ReferenceSolution) -> float:
    return -reference.f_star if env_mode == DIRECT else reference.d_star


def _sample_points(geom: BregmanGeometry, anchor: np.ndarray, count: int, rng):
    """Strictly feasible probe points for per-step inequality checks."""
    pts = []
    m = geom.dim
    for _ in range(count):
        if geom.domain.kind == SIMPLEX:
            p = rng.dirichlet(np.ones(m))
            p = 0.9 * p + 0.1 / m
        elif geom.domain.kind == "orthant":
            p = np.exp(rng.normal(size=m) * 0.7)
        else:
            p = anchor + rng.normal(size=m) * (1.0 + float(np.linalg.norm(anchor)))
        pts.append(p)
    return pts


def _ref_div(geom, ref_point, anchor: MirrorPoint) -> float:
    """D_h(reference, anchor); the reference may sit on the domain boundary."""
    return geom.div_value_from(ref_point, anchor)


# ----------------------------------------------------------------------
# plain proximal point / multiplier method
# ----------------------------------------------------------------------


def run_bpp(
    env: ProxEnvironment,
    start,
    schedule: StepSchedule,
    T: int,
    reference: ReferenceSolution | None = None,
    lemma_samples: int = 0,
    sample_seed: int = 0,
    strict: bool = True,
    _ergodic_for_dual: bool = False,
    _maxd: float | None = None,
) -> RunTrace:
    """Proximal point iteration lam_{k+1} = prox(lam_k, eta_k).

    Online checks: the per-step decrease inequality on sampled points (a),
    monotone d (b), monotone divergence to the reference point (c), and the
    aggregate gap bound d* - d(lam_T) <= D_h(ref, lam0) / sum eta (d).  The
    sampled check (a) needs exact d-values, hence direct mode.
    """
    geom = env.geom
    trace = RunTrace(algorithm="balm" if env.mode == DUAL else "bpp")
    if lemma_samples and env.mode != DIRECT:
        raise ValueError("sampled decrease checks need exact d-values (direct mode)")
    rng = np.random.default_rng(sample_seed)
    P = geom.to_mirror(start) if isinstance(start, np.ndarray) else start
    P0 = P
    tol = env.inner_tol
    ref_pt = ref_d = div_ref_start = None
    if reference is not None:
        ref_pt = _reference_point(env.mode, reference)
        ref_d = _reference_d(env.mode, reference)
        div_ref_start = _ref_div(geom, ref_pt, P0)
    d_prev = env.d_at(P0.value) if env.mode == DIRECT else None
    sum_eta = 0.0
    warm = None
    erg_w = 0.0
    erg_x = erg_lam = None
    problem = env.problem
    for k in range(T):
        eta = schedule.eta(k)
        res = prox_step(env, P, eta, warm=warm)
        Pn = res.lam
        d_new = env.d_value(res)
        delta_mirror = Pn.mirror - P.mirror
        if lemma_samples:
            for lam_s in _sample_points(geom, P0.value, lemma_samples, rng):
                lhs = eta * (env.d_at(lam_s) - d_new)
                rhs = float(delta_mirror @ (lam_s - Pn.value))
                if lhs > rhs + _slack(tol, lhs, rhs):
                    trace.record_violation(
                        f"k={k}: one-step decrease failed by {lhs - rhs:.3e}"
                    )
        if d_prev is not None and d_new < d_prev - _slack(tol, d_new, d_prev):
            trace.record_violation(f"k={k}: d decreased by {d_prev - d_new:.3e}")
        if ref_pt is not None:
            div_step = geom.div_m(Pn, P)
            drift = float(delta_mirror @ (Pn.value - ref_pt)) - div_step
            if drift > _slack(tol, drift, 0.0):
                trace.record_violation(
                    f"k={k}: divergence to reference grew by {drift:.3e}"
                )
        sum_eta += eta
        bound_lhs = bound_rhs = None
        if ref_pt is not None:
            bound_lhs = ref_d - d_new
            bound_rhs = div_ref_start / sum_eta
            if bound_lhs > bound_rhs + _slack(tol, bound_lhs, bound_rhs):
                trace.record_violation(
                    f"k={k}: aggregate gap bound failed by {bound_lhs - bound_rhs:.3e}"
                )
        erg_gap = erg_feas = feas_val = primal = None
        if env.mode == DUAL:
            warm = res.x
            feas_val = problem.feasibility_norm(res.x)
            primal = problem.objective.value(res.x)
            if _ergodic_for_dual:
                if erg_x is None:
                    erg_x = np.zeros_like(res.x)
                    erg_lam = np.zeros_like(Pn.value)
                erg_x = erg_x + eta * res.x
                erg_lam = erg_lam + eta * Pn.value
                erg_w += eta
                if reference is not None:
                    xt = erg_x / erg_w
                    erg_gap = abs(problem.objective.value(xt) - reference.f_star)
                    erg_feas = problem.feasibility_norm(xt)
                    if _maxd is not None:
                        bound_lhs = max(erg_gap, erg_feas)
                        bound_rhs = _maxd / sum_eta
                        if bound_lhs > bound_rhs + _slack(tol, bound_lhs, bound_rhs):
                            trace.record_violation(
                                f"k={k}: ergodic primal bound failed by "
                                f"{bound_lhs - bound_rhs:.3e}"
                            )
        else:
            primal = -d_new
        trace.append_row(
            k, eta, x=res.x, lam=Pn.value, d_val=d_new, primal_obj=primal,
            feas=feas_val, erg_primal_gap=erg_gap, erg_feas=erg_feas,
            bound_lhs=bound_lhs, bound_rhs=bound_rhs,
        )
        d_prev = d_new
        P = Pn
    return trace.finish(strict)


def run_balm(
    problem: ConstrainedProblem,
    geom: BregmanGeometry,
    lambda0,
    schedule: StepSchedule,
    T: int,
    reference: ReferenceSolution | None = None,
    inner_tol: float = 1e-10,
    inner_max_iters: int = 10000,
    strict: bool = True,
) -> RunTrace:
    """Multiplier method with Bregman dual prox steps; eta-weighted ergodic pair.

    With a reference attached the trace carries the ergodic primal bound
    max(|f(xt) - f*|, feasibility(xt)) <= maxD / sum eta per iteration.
    """
    env = ProxEnvironment(
        problem, geom, DUAL, inner_tol=inner_tol, inner_max_iters=inner_max_iters
    )
    maxd = None
    if reference is not None:
        lam0_arr = lambda0 if isinstance(lambda0, np.ndarray) else lambda0.value
        maxd = metrics.ball_max_divergence(
            geom, lam0_arr, reference.rho_star, nonneg=problem.sense == INEQUALITY
        )
    trace = run_bpp(
        env, lambda0, schedule, T, reference=reference, strict=strict,
        _ergodic_for_dual=True, _maxd=maxd,
    )
    trace.meta["maxd"] = maxd
    return trace


# ----------------------------------------------------------------------
# accelerated proximal point, general estimate-function form
# ----------------------------------------------------------------------


def _theta_from_q(q: float):
    """Root of G*theta^2 = eta*A*(1-theta) with q = A*eta/G, cancellation-free."""
    s = q + math.sqrt(q * q + 4.0 * q)
    theta = 2.0 * q / s
    one_minus = 4.0 * q / (s * s)
    if not (0.0 < theta < 1.0) or not math.isfinite(theta):
        raise NumericalInstability(f"extrapolation coefficient {theta!r} out of range")
    return theta, one_minus


def run_acc_bpp_general(
    env: ProxEnvironment,
    start,
    schedule: StepSchedule,
    T: int,
    A0: float,
    G: float | None = None,
    reference: ReferenceSolution | None = None,
    strict: bool = True,
) -> RunTrace:
    """Accelerated proximal point with an explicit concave estimate function.

    The estimate function phi_k(lam) = <c_k, lam> + const_k - A_k D_h(lam, lam0)
    is tracked through its affine coefficients; its maximizer v_k has the
    closed form grad h*(grad h(lam0) + c_k / A_k) restricted to the domain.
    Checked online: the product band for prod(1 - theta_k), the certified
    gap bound through that product, and (on certified geometries) the
    estimate-function certificate phi_k(v_k) <= d(lam_k).
    """
    if A0 <= 0:
        raise ValueError("A0 must be positive")
    geom = env.geom
    G = geom.scaling_constant if G is None else G
    tol = env.inner_tol
    trace = RunTrace(algorithm="acc-bpp")
    P0 = geom.to_mirror(start) if isinstance(start, np.ndarray) else start
    lam, v = P0, P0
    A_k = A0
    coef = np.zeros(geom.dim)
    d0 = env.d_at(P0.value) if env.mode == DIRECT else None
    const = d0
    ref_pt = ref_d = div_ref = None
    if reference is not None:
        ref_pt = _reference_point(env.mode, reference)
        ref_d = _reference_d(env.mode, reference)
        div_ref = _ref_div(geom, ref_pt, P0)
    prod = 1.0
    sqrt_sum = 0.0
    warm = None
    thetas = []
    for k in range(T):
        eta = schedule.eta(k)
        q = A_k * eta / G
        theta, one_minus = _theta_from_q(q)
        thetas.append(theta)
        y = geom.mix(theta, v, lam)
        res = prox_step(env, y, eta, warm=warm)
        lam_next = res.lam
        d_new = env.d_value(res)
        delta_mirror = lam_next.mirror - y.mirror
        coef = one_minus * coef + (theta / eta) * delta_mirror
        if const is not None:
            const = one_minus * const + theta * (
                d_new - float(delta_mirror @ lam_next.value) / eta
            )
        A_k = A_k * one_minus
        v = geom.argmax_affine(coef, P0, A_k)
        prod *= one_minus
        sqrt_sum += math.sqrt(eta)
        # closed two-sided envelope for the estimate-function product
        lo = 1.0 / (1.0 + math.sqrt(A0 / G) * sqrt_sum) ** 2
        hi = 1.0 / (1.0 + 0.5 * math.sqrt(A0 / G) * sqrt_sum) ** 2
        band_tol = 1e-9 * (1.0 + prod)
        if prod < lo - band_tol or prod > hi + band_tol:
            trace.record_violation(
                f"k={k}: product {prod:.6e} outside [{lo:.6e}, {hi:.6e}]"
            )
        if const is not None and geom.certified_scaling:
            phi_v = float(coef @ v.value) + const - A_k * geom.div_m(v, P0)
            if phi_v > d_new + _slack(tol, phi_v, d_new):
                trace.record_violation(
                    f"k={k}: estimate certificate failed by {phi_v - d_new:.3e}"
                )
        bound_lhs = bound_rhs = None
        if ref_pt is not None and d0 is not None:
            bound_lhs = ref_d - d_new
            bound_rhs = prod * (ref_d - d0 + A0 * div_ref)
            if geom.certified_scaling and bound_lhs > bound_rhs + _slack(
                tol, bound_lhs, bound_rhs
            ):
                trace.record_violation(
                    f"k={k}: accelerated gap bound failed by {bound_lhs - bound_rhs:.3e}"
                )
        primal = -d_new if env.mode == DIRECT else env.problem.objective.value(res.x)
        feas_val = env.problem.feasibility_norm(res.x) if env.mode == DUAL else None
        if env.mode == DUAL:
            warm = res.x
        trace.append_row(
            k, eta, theta=theta, x=res.x, lam=lam_next.value, d_val=d_new,
            primal_obj=primal, feas=feas_val, bound_lhs=bound_lhs, bound_rhs=bound_rhs,
        )
        lam = lam_next
    trace.meta["thetas"] = thetas
    trace.meta["A_final"] = A_k
    trace.meta["product"] = prod
    return trace.finish(strict)


# ----------------------------------------------------------------------
# memoryless and dual-averaging accelerated forms (theta_0 = 1)
# ----------------------------------------------------------------------


def _theta_next(theta: float, eta_k: float, eta_next: float) -> float:
    """Solve eta_k/theta_k^2 = eta_next/t^2 - eta_next/t for the next theta."""
    t = 1.0 / theta
    ratio = eta_k / eta_next
    t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * ratio * t * t))
    return 1.0 / t_next


def _peek_eta(schedule: StepSchedule, k: int, fallback: float) -> float:
    if schedule.kind == "explicit" and k >= len(schedule.values):
        return fallback
    return schedule.eta(k)


def _check_theta_recursion(trace, tol, k, eta_k, theta_k, eta_next, theta_next):
    lhs = eta_k / theta_k**2
    rhs = eta_next / theta_next**2 - eta_next / theta_next
    scale = 1e-10 * (1.0 + abs(lhs) + abs(rhs))
    if abs(lhs - rhs) > scale:
        trace.record_violation(f"k={k}: theta recursion residual {abs(lhs - rhs):.3e}")


def _check_theta_band(trace, k, theta, eta_k, sqrt_sum):
    lo = math.sqrt(eta_k) / sqrt_sum
    hi = 2.0 * lo
    pad = 1e-12 * (1.0 + hi)
    if theta < lo - pad or theta > hi + pad:
        trace.record_violation(f"k={k}: theta {theta:.6e} outside [{lo:.6e}, {hi:.6e}]")


def _restricted_mirror(geom: BregmanGeometry, mirror: np.ndarray) -> MirrorPoint:
    """Domain-restricted inverse mirror map for the v-recursion.

    The entropy/simplex restriction is the log normalization, which commutes
    with the additive recursion, so the memoryless and dual-averaging forms
    stay iterate-identical there.
    """
    if geom.kind == "euclidean":
        if geom.domain.kind == "orthant":
            raise ValueError("memoryless v-update needs an unconstrained mirror image")
        return geom.from_mirror(mirror)
    if geom.domain.kind == SIMPLEX:
        logv = mirror - 1.0
        logv = logv - _logsumexp(logv)
        return MirrorPoint(np.exp(logv), 1.0 + logv)
    return geom.from_mirror(mirror)


def run_acc_bpp_memoryless(
    env: ProxEnvironment,
    start,
    schedule: StepSchedule,
    T: int,
    G: float | None = None,
    reference: ReferenceSolution | None = None,
    strict: bool = True,
) -> RunTrace:
    """Accelerated proximal point via the recursive v-update (theta_0 = 1).

    Certified gap bound (checked when the reference and a certified scaling
    constant are available):
    d* - d(lam_T) <= 4 G D_h(ref, lam0) / (sum_{k<T} sqrt(eta_k))^2.
    """
    geom = env.geom
    G = geom.scaling_constant if G is None else G
    tol = env.inner_tol
    trace = RunTrace(algorithm="acc-bpp2")
    P0 = geom.to_mirror(start) if isinstance(start, np.ndarray) else start
    lam, v = P0, P0
    theta = 1.0
    ref_pt = ref_d = div_ref = None
    if reference is not None:
        ref_pt = _reference_point(env.mode, reference)
        ref_d = _reference_d(env.mode, reference)
        div_ref = _ref_div(geom, ref_pt, P0)
    sqrt_sum = 0.0
    warm = None
    thetas, ys, vs = [], [], []
    for k in range(T):
        eta = schedule.eta(k)
        sqrt_sum += math.sqrt(eta)
        _check_theta_band(trace, k, theta, eta, sqrt_sum)
        y = geom.mix(theta, v, lam)
        res = prox_step(env, y, eta, warm=warm)
        lam_next = res.lam
        d_new = env.d_value(res)
        v = _restricted_mirror(geom, v.mirror + (lam_next.mirror - y.mirror) / (G * theta))
        thetas.append(theta)
        ys.append(y.value.copy())
        vs.append(v.value.copy())
        bound_lhs = bound_rhs = None
        if ref_pt is not None:
            bound_lhs = ref_d - d_new
            bound_rhs = 4.0 * G * div_ref / (sqrt_sum * sqrt_sum)
            if geom.certified_scaling and bound_lhs > bound_rhs + _slack(
                tol, bound_lhs, bound_rhs
            ):
                trace.record_violation(
                    f"k={k}: sqrt-sum gap bound failed by {bound_lhs - bound_rhs:.3e}"
                )
        primal = -d_new if env.mode == DIRECT else env.problem.objective.value(res.x)
        feas_val = env.problem.feasibility_norm(res.x) if env.mode == DUAL else None
        if env.mode == DUAL:
            warm = res.x
        trace.append_row(
            k, eta, theta=theta, x=res.x, lam=lam_next.value, d_val=d_new,
            primal_obj=primal, feas=feas_val, bound_lhs=bound_lhs, bound_rhs=bound_rhs,
        )
        lam = lam_next
        eta_next = _peek_eta(schedule, k + 1, eta)
        theta_new = _theta_next(theta, eta, eta_next)
        _check_theta_recursion(trace, tol, k, eta, theta, eta_next, theta_new)
        theta = theta_new
    trace.meta["thetas"] = thetas
    trace.meta["ys"] = ys
    trace.meta["vs"] = vs
    return trace.finish(strict)


def run_acc_bpp_dual_avg(
    env: ProxEnvironment,
    start,
    schedule: StepSchedule,
    T: int,
    G: float | None = None,
    reference: ReferenceSolution | None = None,
    strict: bool = True,
    cor_samples: int = 0,
    sample_seed: int = 0,
    _ergodic: bool = False,
    _maxd: float | None = None,
) -> RunTrace:
    """Accelerated proximal point in dual-averaging form (theta_0 = 1).

    v_{k+1} maximizes the running lower model
    -G D_h(lam, lam0) + sum_j (eta_j/theta_j) (d(lam_{j+1}) + <...>);
    only the accumulated gradient differences enter the maximizer, the
    d(lam_{j+1}) terms are constants in lam and are dropped.  Checked:
    S_k = eta_k/theta_k^2, the theta band, and the per-step certified bound
    d(ref) - d(lam_{k+1}) <= theta_k^2 G D_h(ref, lam0) / eta_k.
    """
    geom = env.geom
    G = geom.scaling_constant if G is None else G
    tol = env.inner_tol
    trace = RunTrace(algorithm="acc-bpp3" if not _ergodic else "acc-balm")
    if cor_samples and env.mode != DIRECT:
        raise ValueError("sampled bound checks need exact d-values (direct mode)")
    rng = np.random.default_rng(sample_seed)
    P0 = geom.to_mirror(start) if isinstance(start, np.ndarray) else start
    lam, v = P0, P0
    theta = 1.0
    ref_pt = ref_d = div_ref = None
    if reference is not None:
        ref_pt = _reference_point(env.mode, reference)
        ref_d = _reference_d(env.mode, reference)
        div_ref = _ref_div(geom, ref_pt, P0)
    grad_sum = np.zeros(geom.dim)
    S_k = 0.0
    sqrt_sum = 0.0
    sum_theta = 0.0
    warm = None
    thetas, ys, vs = [], [], []
    erg_x = erg_lam = None
    problem = env.problem
    for k in range(T):
        eta = schedule.eta(k)
        sqrt_sum += math.sqrt(eta)
        _check_theta_band(trace, k, theta, eta, sqrt_sum)
        y = geom.mix(theta, v, lam)
        res = prox_step(env, y, eta, warm=warm)
        lam_next = res.lam
        d_new = env.d_value(res)
        grad_sum = grad_sum + (lam_next.mirror - y.mirror) / theta
        v = geom.argmax_affine(grad_sum, P0, G)
        S_k += eta / theta
        sum_theta += theta
        s_resid = abs(S_k - eta / theta**2)
        if s_resid > 1e-10 * (1.0 + abs(S_k)):
            trace.record_violation(f"k={k}: S_k identity residual {s_resid:.3e}")
        thetas.append(theta)
        ys.append(y.value.copy())
        vs.append(v.value.copy())
        bound_lhs = bound_rhs = None
        if ref_pt is not None:
            bound_lhs = ref_d - d_new
            bound_rhs = theta * theta * G * div_ref / eta
            if geom.certified_scaling and bound_lhs > bound_rhs + _slack(
                tol, bound_lhs, bound_rhs
            ):
                trace.record_violation(
                    f"k={k}: dual-averaging gap bound failed by {bound_lhs - bound_rhs:.3e}"
                )
        if cor_samples:
            for lam_s in _sample_points(geom, P0.value, cor_samples, rng):
                lhs_s = env.d_at(lam_s) - d_new
                rhs_s = theta * theta * G * geom.div_m(geom.to_mirror(lam_s), P0) / eta
                if geom.certified_scaling and lhs_s > rhs_s + _slack(tol, lhs_s, rhs_s):
                    trace.record_violation(
                        f"k={k}: sampled dual-averaging bound failed by {lhs_s - rhs_s:.3e}"
                    )
        erg_gap = erg_feas = None
        primal = -d_new if env.mode == DIRECT else problem.objective.value(res.x)
        feas_val = problem.feasibility_norm(res.x) if env.mode == DUAL else None
        if env.mode == DUAL:
            warm = res.x
            if _ergodic:
                if erg_x is None:
                    erg_x = np.zeros_like(res.x)
                    erg_lam = np.zeros_like(lam_next.value)
                w = eta / theta
                erg_x = erg_x + w * res.x
                erg_lam = erg_lam + w * lam_next.value
                if reference is not None:
                    xt = erg_x / S_k
                    erg_gap = abs(problem.objective.value(xt) - reference.f_star)
                    erg_feas = problem.feasibility_norm(xt)
                    if _maxd is not None:
                        bound_lhs = max(erg_gap, erg_feas)
                        bound_rhs = G * _maxd * (1.0 + sum_theta) / S_k
                        if geom.certified_scaling and bound_lhs > bound_rhs + _slack(
                            tol, bound_lhs, bound_rhs
                        ):
                            trace.record_violation(
                                f"k={k}: accelerated ergodic bound failed by "
                                f"{bound_lhs - bound_rhs:.3e}"
                            )
        trace.append_row(
            k, eta, theta=theta, x=res.x, lam=lam_next.value, d_val=d_new,
            primal_obj=primal, feas=feas_val, erg_primal_gap=erg_gap,
            erg_feas=erg_feas, bound_lhs=bound_lhs, bound_rhs=bound_rhs,
        )
        lam = lam_next
        eta_next = _peek_eta(schedule, k + 1, eta)
        theta_new = _theta_next(theta, eta, eta_next)
        _check_theta_recursion(trace, tol, k, eta, theta, eta_next, theta_new)
        theta = theta_new
    trace.meta["thetas"] = thetas
    trace.meta["ys"] = ys
    trace.meta["vs"] = vs
    trace.meta["S_final"] = S_k
    trace.meta["sum_theta"] = sum_theta
    return trace.finish(strict)


def run_acc_balm(
    problem: ConstrainedProblem,
    geom: BregmanGeometry,
    lambda0,
    schedule: StepSchedule,
    T: int,
    G: float | None = None,
    reference: ReferenceSolution | None = None,
    inner_tol: float = 1e-10,
    inner_max_iters: int = 10000,
    strict: bool = True,
) -> RunTrace:
    """Accelerated multiplier method: dual-averaging scheme on the dual prox.

    Ergodic pair weighted by eta_k/theta_k; with a reference the trace
    carries the accelerated ergodic bound
    max(|f(xt)-f*|, feas(xt)) <= G maxD (1 + sum theta) / S_{T-1}.
    """
    env = ProxEnvironment(
        problem, geom, DUAL, inner_tol=inner_tol, inner_max_iters=inner_max_iters
    )
    maxd = None
    if reference is not None:
        lam0_arr = lambda0 if isinstance(lambda0, np.ndarray) else lambda0.value
        maxd = metrics.ball_max_divergence(
            geom, lam0_arr, reference.rho_star, nonneg=problem.sense == INEQUALITY
        )
    trace = run_acc_bpp_dual_avg(
        env, lambda0, schedule, T, G=G, reference=reference, strict=strict,
        _ergodic=True, _maxd=maxd,
    )
    trace.meta["maxd"] = maxd
    return trace


# ----------------------------------------------------------------------
# classical accelerated multiplier schemes (equality constraints)
# ----------------------------------------------------------------------

GULER1 = "guler1"
GULER2 = "guler2"
NESTEROV_DA = "nesterov-da"


def run_appendix_scheme(
    problem: ConstrainedProblem,
    variant: str,
    eta: float,
    lambda0,
    T: int,
    reference: ReferenceSolution | None = None,
    inner_tol: float = 1e-10,
) -> RunTrace:
    """Classical accelerated multiplier methods on an equality-constrained program.

    Shared updates (t_0 = 1, y_0 = lambda_0):
      x_{k+1} = argmin f(x) + y_k@(A x - b) + (eta/2)||A x - b||^2
      lam_{k+1} = y_k + eta (A x_{k+1} - b)
      t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2
    and the variant extrapolations:
      guler1      y_{k+1} = lam_{k+1} + ((t_k-1)/t_{k+1}) (lam_{k+1} - lam_k)
      guler2      ... + (t_k/t_{k+1}) (lam_{k+1} - y_k)
      nesterov-da y_{k+1} = (1 - 1/t_{k+1}) lam_{k+1}
                           + (1/t_{k+1}) (lam_0 + eta sum_j t_j (A x_{j+1} - b))
    """
    if variant not in (GULER1, GULER2, NESTEROV_DA):
        raise ValueError(f"unknown variant {variant!r}")
    if problem.sense != EQUALITY:
        raise ValueError("appendix schemes apply to equality constraints")
    from .geometry import euclidean_geometry, full_space

    geom = euclidean_geometry(full_space(problem.m))
    env = ProxEnvironment(problem, geom, DUAL, inner_tol=inner_tol)
    trace = RunTrace(algorithm=variant)
    lam = np.asarray(lambda0, dtype=float).copy()
    y = lam.copy()
    t = 1.0
    vsum = lam.copy()  # lam0 + eta * sum t_j (A x_{j+1} - b)
    warm = None
    ts, ys = [t], [y.copy()]
    for k in range(T):
        res = prox_step(env, geom.to_mirror(y), eta, warm=warm)
        x_new = res.x
        lam_new = res.lam.value
        warm = x_new
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if variant == GULER1:
            y_next = lam_new + ((t - 1.0) / t_next) * (lam_new - lam)
        elif variant == GULER2:
            y_next = (
                lam_new
                + ((t - 1.0) / t_next) * (lam_new - lam)
                + (t / t_next) * (lam_new - y)
            )
        else:
            vsum = vsum + t * eta * (problem.A @ x_new - problem.b)
            y_next = (1.0 - 1.0 / t_next) * lam_new + (1.0 / t_next) * vsum
        primal = problem.objective.value(x_new)
        feas_val = problem.feasibility_norm(x_new)
        gap = abs(primal - reference.f_star) if reference is not None else None
        trace.append_row(
            k, eta, x=x_new, lam=lam_new, d_val=None, primal_obj=primal,
            feas=feas_val, erg_primal_gap=gap,
        )
        lam, y, t = lam_new, y_next, t_next
        ts.append(t)
        ys.append(y.copy())
    trace.meta["ts"] = ts
    trace.meta["ys"] = ys
    return trace


def counterexample_predict(A, b, c, eta: float, T: int) -> dict:
    """Closed-form last-iterate predictions for the second classical scheme
    on the unique-feasible-point equality program (t_0 = 1, y_0 = 0).

    predicted_primal_gap  = c@(A.T A)^-1 c / eta * t_0 / t_{T-1}
    predicted_feasibility = ||A (A.T A)^-1 c|| / eta * t_0 / t_{T-1}
    predicted_x           = x* - (-1)^{T-1} (A.T A)^-1 c / eta * t_0 / t_{T-1}
    predicted_lambda1     = -A (A.T A)^-1 c   (dual-optimal after one step)
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.linalg.matrix_rank(A) < A.shape[1]:
        raise ValueError("matrix must have full column rank")
    if T < 1:
        raise ValueError("T must be >= 1")
    gram = A.T @ A
    ginv_c = np.linalg.solve(gram, c)
    x_star = np.linalg.solve(gram, A.T @ b)
    t = 1.0
    for _ in range(T - 1):
        t = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
    factor = 1.0 / (eta * t)
    return {
        "predicted_primal_gap": float(c @ ginv_c) * factor,
        "predicted_feasibility": float(np.linalg.norm(A @ ginv_c)) * factor,
        "predicted_x": x_star - ((-1.0) ** (T - 1)) * ginv_c * factor,
        "predicted_lambda1": -A @ ginv_c,
    }


# ----------------------------------------------------------------------
# degenerate accelerated-gradient baseline
# ----------------------------------------------------------------------


def run_abpg_degenerate(
    env: ProxEnvironment,
    start,
    T: int,
    L: float,
    reference: ReferenceSolution | None = None,
    strict: bool = True,
) -> RunTrace:
    """Four-line averaging recursion with prox parameter 1/(theta_k L).

      y_k       = (1 - theta_k) mu_k + theta_k lam_k
      lam_{k+1} = argmax d(lam) - theta_k L D_h(lam, lam_k)
      mu_{k+1}  = (1 - theta_k) mu_k + theta_k lam_{k+1}
      theta:      (1 - theta_{k+1}) / theta_{k+1}^2 = 1 / theta_k^2,  theta_0 = 1

    Checked online: theta_k <= 2/(k+1) (hence the implied prox parameter is
    at least (k+1)/(2L)) and, with a reference on a certified geometry, the
    averaged-iterate bound d* - d(mu_T) <= 4 L D_h(ref, mu_0) / T^2.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    geom = env.geom
    tol = env.inner_tol
    trace = RunTrace(algorithm="abpg0")
    P0 = geom.to_mirror(start) if isinstance(start, np.ndarray) else start
    lam, mu = P0, P0
    theta = 1.0
    ref_pt = ref_d = div_ref = None
    if reference is not None:
        ref_pt = _reference_point(env.mode, reference)
        ref_d = _reference_d(env.mode, reference)
        div_ref = _ref_div(geom, ref_pt, P0)
    warm = None
    thetas, mus = [], []
    for k in range(T):
        if theta > 2.0 / (k + 1.0) + 1e-12:
            trace.record_violation(f"k={k}: theta {theta:.6e} above 2/(k+1)")
        eta = 1.0 / (theta * L)
        y = geom.mix(theta, lam, mu)  # recorded for parity with the source recursion
        res = prox_step(env, lam, eta, warm=warm)
        lam_next = res.lam
        mu = geom.mix(theta, lam_next, mu)
        d_mu = env.d_at(mu.value) if env.mode == DIRECT else None
        bound_lhs = bound_rhs = None
        if ref_pt is not None and d_mu is not None:
            bound_lhs = ref_d - d_mu
            bound_rhs = 4.0 * L * div_ref / float((k + 1) * (k + 1))
            if geom.certified_scaling and bound_lhs > bound_rhs + _slack(
                tol, bound_lhs, bound_rhs
            ):
                trace.record_violation(
                    f"k={k}: averaged-iterate bound failed by {bound_lhs - bound_rhs:.3e}"
                )
        if env.mode == DUAL:
            warm = res.x
        trace.append_row(
            k, eta, theta=theta, x=res.x, lam=lam_next.value, d_val=d_mu,
            primal_obj=None if d_mu is None else -d_mu,
            bound_lhs=bound_lhs, bound_rhs=bound_rhs,
        )
        thetas.append(theta)
        mus.append(mu.value.copy())
        lam = lam_next
        c = 1.0 / theta**2
        theta = 2.0 / (1.0 + math.sqrt(1.0 + 4.0 * c))
        _ = y
    trace.meta["thetas"] = thetas
    trace.meta["mus"] = mus
    return trace.finish(strict)
