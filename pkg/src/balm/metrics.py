"""Ergodic averages, certified bound right-hand sides, and rate fits.

Bound identifiers (stable strings, also used in bounds.csv):

=========================  ====================================================
id                         certified inequality (lhs <= rhs)
=========================  ====================================================
dual_gap_sum_eta           d* - d(lam_T)  vs  D_h(lam*, lam0) / sum eta_k
ergodic_primal_eq          max(|f(xt)-f*|, ||A xt - b||)   vs  maxD / sum eta_k
ergodic_primal_ineq        max(|f(xt)-f*|, ||[A xt - b]+||) vs  maxD / sum eta_k
acc_estimate_product       prod(1-theta_k)  vs  its closed upper envelope
acc_dual_gap_sqrt          d* - d(lam_T)  vs  4 G D_h(lam*, lam0)/(sum sqrt(eta))^2
acc_dual_gap_theta         d* - d(lam_{k+1})  vs  theta_k^2 G D_h(lam*, lam0)/eta_k
acc_ergodic_primal_eq /    max(...) vs  G maxD (1 + sum theta_k) / S_{T-1},
acc_ergodic_primal_ineq    S_{T-1} = sum eta_k/theta_k
matched_step_gap           d* - d(mu_T)  vs  4 L D_h(lam*, mu0) / T^2
=========================  ====================================================

``maxD`` is the maximum of D_h(., lam0) over the multiplier ball of radius
rho* = 2||lam*|| + 1 (intersected with the orthant for inequality senses);
see :func:`ball_max_divergence`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import ENTROPY, EUCLIDEAN, ORTHANT, BregmanGeometry

ETA_WEIGHTS = "eta"
ETA_OVER_THETA_WEIGHTS = "eta_over_theta"


def ergodic_average(trace, weighting: str, T: int):
    """Weighted average (x_tilde, lambda_tilde) of the first T iterates.

    ``eta`` weighting uses w_k = eta_k, ``eta_over_theta`` uses
    w_k = eta_k / theta_k; weights are normalized to sum to one.
    """
    if T < 1 or T > len(trace.ks):
        raise ValueError("T out of range for this trace")
    etas = np.asarray(trace.etas[:T], dtype=float)
    if weighting == ETA_WEIGHTS:
        w = etas
    elif weighting == ETA_OVER_THETA_WEIGHTS:
        thetas = trace.thetas[:T]
        if any(t is None for t in thetas):
            raise ValueError("trace has no theta values")
        w = etas / np.asarray(thetas, dtype=float)
    else:
        raise ValueError(f"unknown weighting {weighting!r}")
    w = w / w.sum()
    lam = np.zeros_like(np.asarray(trace.lams[0], dtype=float))
    for wk, lk in zip(w, trace.lams[:T]):
        lam += wk * np.asarray(lk, dtype=float)
    x = None
    if trace.xs[0] is not None:
        x = np.zeros_like(np.asarray(trace.xs[0], dtype=float))
        for wk, xk in zip(w, trace.xs[:T]):
            x += wk * np.asarray(xk, dtype=float)
    return x, lam


# ----------------------------------------------------------------------
# maximum divergence over a multiplier ball
# ----------------------------------------------------------------------


def ball_max_divergence(
    geom: BregmanGeometry, lambda0: np.ndarray, rho: float, nonneg: bool
) -> float:
    """max of D_h(lam, lambda0) over {||lam||_2 <= rho} (and lam >= 0 if asked).

    Euclidean closed forms; for the entropy kind (orthant constraint is then
    implied) the maximum of the convex map over the ball sits at an extreme
    point, and with a uniform anchor the stationarity system on the sphere,
    log(t/alpha) = 2 nu t, admits at most two levels per coordinate while
    the second-order conditions allow at most one coordinate at the small
    level (two such coordinates leave an ascent direction in the tangent
    space).  The k-uniform and (k, 1) two-level candidates plus the origin
    corner are therefore enumerated exactly.  Nonuniform entropy anchors are
    not needed by any built-in configuration and are rejected.
    """
    lambda0 = np.asarray(lambda0, dtype=float)
    m = lambda0.shape[0]
    if rho <= 0:
        raise ValueError("rho must be positive")
    if geom.kind == EUCLIDEAN:
        if not nonneg:
            return 0.5 * (rho + float(np.linalg.norm(lambda0))) ** 2
        if np.min(lambda0) < 0:
            raise ValueError("nonnegative ball max needs lambda0 >= 0")
        # convex max over extreme points: the sphere cap against the
        # smallest anchor coordinate, compared with the origin corner
        nrm2 = float(lambda0 @ lambda0)
        sphere = 0.5 * (rho * rho - 2.0 * rho * float(np.min(lambda0)) + nrm2)
        return max(sphere, 0.5 * nrm2)
    if np.min(lambda0) <= 0:
        raise ValueError("entropy ball max needs lambda0 > 0")
    alpha = float(lambda0[0])
    if not np.allclose(lambda0, alpha):
        raise NotImplementedError("entropy ball max implemented for uniform anchors")
    return _entropy_ball_max_uniform(alpha, rho, m)


def _entropy_gain(t: float, alpha: float) -> float:
    # D contribution of one coordinate moved from the anchor value alpha to t
    if t == 0.0:
        return alpha
    return t * np.log(t / alpha) - t + alpha


def _entropy_ball_max_uniform(alpha: float, rho: float, m: int) -> float:
    best = m * alpha  # lam = 0 corner
    for k in range(1, m + 1):
        t2 = rho / np.sqrt(k)
        best = max(best, k * _entropy_gain(t2, alpha) + (m - k) * alpha)
    # two-level stationary configurations: k2 coords at the large root t2 of
    # log(t/alpha) = 2 nu t and a single coordinate at the small root t1
    for k2 in range(1, m):
        lo, hi = rho / np.sqrt(k2 + 1.0), rho / np.sqrt(k2)

        def excess(t2):
            nu = np.log(t2 / alpha) / (2.0 * t2) if t2 != alpha else 0.0
            if nu <= 0:
                return -1.0, 0.0
            t1 = _small_root(nu, alpha)
            if t1 is None:
                return -1.0, 0.0
            return k2 * t2 * t2 + t1 * t1 - rho * rho, t1

        e_lo, _ = excess(lo)
        e_hi, _ = excess(hi)
        if e_lo == -1.0 or e_hi == -1.0 or e_lo * e_hi > 0:
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            e_mid, t1 = excess(mid)
            if e_mid == -1.0:
                break
            if e_lo * e_mid <= 0:
                hi = mid
            else:
                lo, e_lo = mid, e_mid
        t2 = 0.5 * (lo + hi)
        _, t1 = excess(t2)
        val = k2 * _entropy_gain(t2, alpha) + _entropy_gain(t1, alpha) + (m - k2 - 1) * alpha
        best = max(best, val)
    return best


def _small_root(nu: float, alpha: float):
    """Smaller positive root of log(t/alpha) = 2 nu t, if it exists."""
    peak = 1.0 / (2.0 * nu)
    if np.log(peak / alpha) - 1.0 <= 0:
        return None  # the line never crosses: no interior stationary pair
    lo, hi = 1e-300, peak
    f = lambda t: np.log(t / alpha) - 2.0 * nu * t
    for _ in range(200):
        mid = np.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ----------------------------------------------------------------------
# bound right-hand sides
# ----------------------------------------------------------------------


def bound_rhs(
    bound_id: str,
    *,
    geom: BregmanGeometry | None = None,
    reference=None,
    lambda0: np.ndarray | None = None,
    T: int | None = None,
    etas=None,
    thetas=None,
    G: float = 1.0,
    A0: float | None = None,
    L: float | None = None,
    d_lambda_star_lambda0: float | None = None,
) -> float:
    """Evaluate the right-hand side of a certified inequality at horizon T."""

    def div_star():
        if d_lambda_star_lambda0 is not None:
            return d_lambda_star_lambda0
        target = reference.lambda_star if reference.lambda_star is not None else reference.x_star
        return geom.divergence(np.asarray(target, dtype=float), lambda0)

    if bound_id == "dual_gap_sum_eta":
        return div_star() / float(np.sum(np.asarray(etas[:T], dtype=float)))
    if bound_id in ("ergodic_primal_eq", "ergodic_primal_ineq"):
        maxd = ball_max_divergence(
            geom, lambda0, reference.rho_star, nonneg=bound_id.endswith("ineq")
        )
        return maxd / float(np.sum(np.asarray(etas[:T], dtype=float)))
    if bound_id == "acc_estimate_product":
        s = float(np.sum(np.sqrt(np.asarray(etas[:T], dtype=float))))
        return 1.0 / (1.0 + 0.5 * np.sqrt(A0 / G) * s) ** 2
    if bound_id == "acc_dual_gap_sqrt":
        s = float(np.sum(np.sqrt(np.asarray(etas[:T], dtype=float))))
        return 4.0 * G * div_star() / (s * s)
    if bound_id == "acc_dual_gap_theta":
        k = T - 1
        return thetas[k] ** 2 * G * div_star() / float(etas[k])
    if bound_id in ("acc_ergodic_primal_eq", "acc_ergodic_primal_ineq"):
        maxd = ball_max_divergence(
            geom, lambda0, reference.rho_star, nonneg=bound_id.endswith("ineq")
        )
        th = np.asarray(thetas[:T], dtype=float)
        et = np.asarray(etas[:T], dtype=float)
        S = float(np.sum(et / th))
        return G * maxd * (1.0 + float(np.sum(th))) / S
    if bound_id == "matched_step_gap":
        return 4.0 * L * div_star() / float(T * T)
    raise ValueError(f"unknown bound id {bound_id!r}")


@dataclass(frozen=True)
class BoundRow:
    T: int
    bound_id: str
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


# ----------------------------------------------------------------------
# log-log rate fits
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    dropped: int


def fit_loglog(ks, values, window) -> RateFit:
    """Ordinary least squares on log10(k) vs log10(value) over a k-window.

    Nonpositive values inside the window are dropped (their count is
    reported); fewer than five usable points is an error.
    """
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    inside = (ks >= lo) & (ks <= hi)
    usable = inside & (values > 0.0)
    dropped = int(np.sum(inside) - np.sum(usable))
    if np.sum(usable) < 5:
        raise ValueError("fewer than 5 usable points in the fit window")
    lx = np.log10(ks[usable])
    ly = np.log10(values[usable])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(slope), float(intercept), r2, (lo, hi), dropped)


PRIMAL_GAP = "primal_gap"
DUAL_GAP = "dual_gap"
FEASIBILITY = "feasibility"
ERGODIC_PRIMAL_GAP = "ergodic_primal_gap"


def fit_rate(trace, series: str, window, reference=None) -> RateFit:
    """Empirical convergence exponent of a trace series over an iteration window."""
    ks = [k + 1 for k in trace.ks]
    if series == PRIMAL_GAP:
        if reference is None:
            raise ValueError("primal gap needs a reference")
        vals = [abs(v - reference.f_star) if v is not None else np.nan for v in trace.primal_objs]
    elif series == DUAL_GAP:
        if reference is None:
            raise ValueError("dual gap needs a reference")
        vals = [reference.d_star - v if v is not None else np.nan for v in trace.d_vals]
    elif series == FEASIBILITY:
        vals = [v if v is not None else np.nan for v in trace.feas]
    elif series == ERGODIC_PRIMAL_GAP:
        vals = [v if v is not None else np.nan for v in trace.erg_primal_gap]
    else:
        raise ValueError(f"unknown series {series!r}")
    vals = np.asarray(vals, dtype=float)
    vals = np.where(np.isnan(vals), -1.0, vals)  # dropped by the fitter
    return fit_loglog(ks, vals, window)


def saddle_chain_violation(
    problem, geom, x_tilde, lam_tilde, reference, lambda0, rhs, n_samples=50, seed=0
) -> float:
    """Worst violation of f(xt) - f* + lam@(A xt - b) <= rhs over sampled lam.

    Samples live in the rho* ball (intersected with the orthant for
    inequality senses).  Returns max(lhs - rhs) over the samples; a value
    below the caller's slack certifies the intermediate inequality of the
    ergodic bound, not only its final max form.
    """
    rng = np.random.default_rng(seed)
    r = problem.constraint_residual(x_tilde)
    base = problem.objective.value(x_tilde) - reference.f_star
    worst = -np.inf
    for _ in range(n_samples):
        lam = rng.normal(size=problem.m)
        lam *= reference.rho_star * rng.uniform() ** (1.0 / problem.m) / np.linalg.norm(lam)
        if problem.sense == "ineq" or geom.domain.kind == ORTHANT:
            lam = np.abs(lam)
        worst = max(worst, base + float(lam @ r) - rhs)
    return worst
