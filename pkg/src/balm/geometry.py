"""Bregman geometries over the solver domains.

Two mirror maps are built in:

* ``euclidean``:  h(v) = 0.5*||v||^2   on R^m or the nonnegative orthant,
* ``entropy``:    h(v) = sum_i v_i*log(v_i)  on the orthant or the unit
  simplex, with the convention 0*log(0) = 0 so that divergences stay
  defined when the first argument touches the boundary.

Solver iterates are carried as (value, mirror) pairs, see
:class:`MirrorPoint`, where mirror = grad h(value).  Under aggressive step
schedules entropy iterates develop coordinates like exp(-4000) that
underflow to 0.0 in value space; the mirror coordinates remain finite, so
all divergence arithmetic and multiplicative updates go through them.
Overflow of the inverse mirror map (exp argument above ``exp_cap``) raises
:class:`DivergedMultiplier` because it signals a proximal parameter far too
large for the instance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EUCLIDEAN = "euclidean"
ENTROPY = "entropy"

FULL_SPACE = "full"
ORTHANT = "orthant"
SIMPLEX = "simplex"

# log(x) for x just below the largest double is ~709.78; the default cap
# stays a little under that so downstream products cannot overflow.
DEFAULT_EXP_CAP = 700.0


class DivergedMultiplier(RuntimeError):
    """A multiplier left the representable range of the mirror map."""


class DegenerateProbe(ValueError):
    """Scaling probe with D_h(p1, p2) = 0: the ratio is undefined."""


@dataclass(frozen=True)
class Domain:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in (FULL_SPACE, ORTHANT, SIMPLEX):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("domain dimension must be >= 1")

    def contains(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        if v.shape != (self.dim,):
            return False
        if self.kind == FULL_SPACE:
            return True
        if np.min(v) < -tol:
            return False
        if self.kind == SIMPLEX and abs(float(np.sum(v)) - 1.0) > tol:
            return False
        return True

    def strictly_interior(self, v: np.ndarray, tol: float = 1e-9) -> bool:
        if v.shape != (self.dim,):
            return False
        if self.kind == FULL_SPACE:
            return True
        if np.min(v) <= 0.0:
            return False
        if self.kind == SIMPLEX and abs(float(np.sum(v)) - 1.0) > tol:
            return False
        return True


def full_space(m: int) -> Domain:
    return Domain(FULL_SPACE, m)


def nonnegative_orthant(m: int) -> Domain:
    return Domain(ORTHANT, m)


def simplex(n: int) -> Domain:
    return Domain(SIMPLEX, n)


@dataclass(frozen=True)
class MirrorPoint:
    """A point together with its mirror image grad h(point).

    ``value`` may contain exact zeros on coordinates whose logs are very
    negative; ``mirror`` is always finite and is the authoritative
    representation for entropy geometries.
    """

    value: np.ndarray
    mirror: np.ndarray

    @property
    def dim(self) -> int:
        return self.value.shape[0]


@dataclass(frozen=True)
class BregmanGeometry:
    """A Bregman divergence D_h(p, q) = h(p) - h(q) - <grad h(q), p - q>.

    ``scaling_constant`` is the constant used by the accelerated schemes in
    the triangle-scaling inequality
    D_h((1-t)*b + t*p, (1-t)*b + t*q) <= G * t^2 * D_h(p, q).
    It is exact (G = 1, equality) for the euclidean kind; for the entropy
    kind no finite constant is certified and the value is a tunable
    heuristic, so ``certified_scaling`` is False there.
    """

    kind: str
    domain: Domain
    scaling_constant: float = 1.0
    exp_cap: float = DEFAULT_EXP_CAP

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, ENTROPY):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if self.kind == ENTROPY and self.domain.kind == FULL_SPACE:
            raise ValueError("entropy geometry needs a nonnegative domain")
        if self.kind == EUCLIDEAN and self.domain.kind == SIMPLEX:
            raise ValueError("euclidean geometry over the simplex is unsupported")
        if self.scaling_constant <= 0:
            raise ValueError("scaling constant must be positive")

    # ------------------------------------------------------------------
    # raw ndarray interface
    # ------------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def certified_scaling(self) -> bool:
        return self.kind == EUCLIDEAN and self.scaling_constant >= 1.0

    def _check_dim(self, *vs: np.ndarray) -> None:
        for v in vs:
            if v.shape != (self.dim,):
                raise ValueError(
                    f"dimension mismatch: expected ({self.dim},), got {v.shape}"
                )

    def h(self, v: np.ndarray) -> float:
        self._check_dim(v)
        if self.kind == EUCLIDEAN:
            return 0.5 * float(v @ v)
        if np.min(v) < 0:
            raise ValueError("entropy h needs nonnegative coordinates")
        pos = v > 0
        return float(np.sum(v[pos] * np.log(v[pos])))

    def grad(self, v: np.ndarray) -> np.ndarray:
        self._check_dim(v)
        if self.kind == EUCLIDEAN:
            return v.copy()
        if np.min(v) <= 0:
            raise ValueError("entropy grad needs strictly positive coordinates")
        return 1.0 + np.log(v)

    def grad_conjugate(self, g: np.ndarray) -> np.ndarray:
        """The inverse mirror map: the unique v with grad h(v) = g."""
        return self.from_mirror(np.asarray(g, dtype=float)).value

    def divergence(self, p: np.ndarray, q: np.ndarray) -> float:
        self._check_dim(p, q)
        if self.kind == EUCLIDEAN:
            d = p - q
            return 0.5 * float(d @ d)
        if np.min(q) <= 0:
            raise ValueError("entropy divergence needs q > 0 componentwise")
        if np.min(p) < 0:
            raise ValueError("entropy divergence needs p >= 0 componentwise")
        pos = p > 0
        val = float(np.sum(p[pos] * (np.log(p[pos]) - np.log(q[pos]))))
        val += float(np.sum(q) - np.sum(p))
        # rounding guard: the exact value is nonnegative
        return val if val > 0.0 else 0.0

    def three_point_residual(self, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> float:
        """|D(a,b) + D(b,c) - D(a,c) - <grad h(b) - grad h(c), b - a>|.

        Zero in exact arithmetic for every triple with b, c interior.
        """
        lhs = self.divergence(a, b) + self.divergence(b, c) - self.divergence(a, c)
        rhs = float((self.grad(b) - self.grad(c)) @ (b - a))
        return abs(lhs - rhs)

    def triangle_scaling_ratio(
        self, base: np.ndarray, p1: np.ndarray, p2: np.ndarray, theta: float
    ) -> float:
        """D((1-t) base + t p1, (1-t) base + t p2) / (t^2 D(p1, p2))."""
        if not (0.0 < theta <= 1.0):
            raise ValueError("theta must lie in (0, 1]")
        denom = self.divergence(p1, p2)
        if denom <= 0.0:
            raise DegenerateProbe("identical probe points: ratio undefined")
        m1 = (1.0 - theta) * base + theta * p1
        m2 = (1.0 - theta) * base + theta * p2
        return self.divergence(m1, m2) / (theta**2 * denom)

    # ------------------------------------------------------------------
    # mirror-point machinery used by the solvers
    # ------------------------------------------------------------------

    def to_mirror(self, v: np.ndarray) -> MirrorPoint:
        v = np.asarray(v, dtype=float)
        self._check_dim(v)
        if self.kind == EUCLIDEAN:
            return MirrorPoint(v.copy(), v.copy())
        if np.min(v) <= 0:
            raise DivergedMultiplier(
                "entropy iterate has a nonpositive coordinate; refusing to floor it"
            )
        return MirrorPoint(v.copy(), 1.0 + np.log(v))

    def from_mirror(self, m: np.ndarray) -> MirrorPoint:
        m = np.asarray(m, dtype=float)
        self._check_dim(m)
        if not np.all(np.isfinite(m)):
            raise DivergedMultiplier("mirror coordinates are not finite")
        if self.kind == EUCLIDEAN:
            return MirrorPoint(m.copy(), m.copy())
        logv = m - 1.0
        if np.max(logv) > self.exp_cap:
            raise DivergedMultiplier(
                f"exp argument {np.max(logv):.3g} exceeds cap {self.exp_cap:g}"
            )
        return MirrorPoint(np.exp(logv), m.copy())

    def mix(self, theta: float, p: MirrorPoint, q: MirrorPoint) -> MirrorPoint:
        """theta * p + (1 - theta) * q, computed stably in log space for entropy."""
        if theta >= 1.0:
            return p
        if theta <= 0.0:
            return q
        if self.kind == EUCLIDEAN:
            v = theta * p.value + (1.0 - theta) * q.value
            return MirrorPoint(v, v.copy())
        logv = np.logaddexp(
            np.log(theta) + (p.mirror - 1.0),
            np.log1p(-theta) + (q.mirror - 1.0),
        )
        return MirrorPoint(np.exp(logv), 1.0 + logv)

    def div_m(self, p: MirrorPoint, q: MirrorPoint) -> float:
        """Divergence from mirror pairs; immune to value-space underflow."""
        if self.kind == EUCLIDEAN:
            d = p.value - q.value
            return 0.5 * float(d @ d)
        val = float(p.value @ (p.mirror - q.mirror))
        val += float(np.sum(q.value) - np.sum(p.value))
        return val if val > 0.0 else 0.0

    def div_value_from(self, p: np.ndarray, q: MirrorPoint) -> float:
        """D_h(p, q) for a raw first argument (zeros allowed under entropy)."""
        p = np.asarray(p, dtype=float)
        self._check_dim(p)
        if self.kind == EUCLIDEAN:
            d = p - q.value
            return 0.5 * float(d @ d)
        if np.min(p) < 0:
            raise ValueError("entropy divergence needs p >= 0 componentwise")
        pos = p > 0
        val = float(np.sum(p[pos] * (np.log(p[pos]) - (q.mirror[pos] - 1.0))))
        val += float(np.sum(q.value) - np.sum(p))
        return val if val > 0.0 else 0.0

    def argmax_affine(
        self, a: np.ndarray, anchor: MirrorPoint, curvature: float
    ) -> MirrorPoint:
        """argmax over the domain of <a, v> - curvature * D_h(v, anchor).

        Closed form through the inverse mirror map; the orthant restriction
        under the euclidean kind is a componentwise clamp (the objective is
        separable there), the simplex restriction under the entropy kind is
        a normalization.
        """
        if curvature <= 0:
            raise ValueError("curvature must be positive")
        g = anchor.mirror + a / curvature
        if self.kind == EUCLIDEAN:
            v = g
            if self.domain.kind == ORTHANT:
                v = np.maximum(v, 0.0)
            return MirrorPoint(v, v.copy())
        logv = g - 1.0
        if self.domain.kind == SIMPLEX:
            logv = logv - _logsumexp(logv)
        if np.max(logv) > self.exp_cap:
            raise DivergedMultiplier(
                f"exp argument {np.max(logv):.3g} exceeds cap {self.exp_cap:g}"
            )
        return MirrorPoint(np.exp(logv), 1.0 + logv)


def _logsumexp(z: np.ndarray) -> float:
    zmax = float(np.max(z))
    if not np.isfinite(zmax):
        return zmax
    return zmax + float(np.log(np.sum(np.exp(z - zmax))))


def euclidean_geometry(domain: Domain, scaling_constant: float = 1.0) -> BregmanGeometry:
    return BregmanGeometry(EUCLIDEAN, domain, scaling_constant)


def entropy_geometry(domain: Domain, scaling_constant: float = 1.0) -> BregmanGeometry:
    return BregmanGeometry(ENTROPY, domain, scaling_constant)
