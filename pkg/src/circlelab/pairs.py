"""Commuting interval-map pairs and the interval renormalization step.

A pair holds two increasing commuting maps around 0: eta defined on
the interval between 0 and xi(0), xi defined between eta(0) and 0,
with eta(0) and xi(0) on opposite sides of 0.  The height counts
eta-steps taken by the orbit of xi(0) before it crosses 0;
renormalization passes to (eta^height o xi, eta) and rescales so the
new xi fixes 1 at 0.  Reading one height per level yields the partial
quotients of the pair's rotation number.

Pairs built from a single lift stay symbolic: each half is stored as
an (iterate count, translation) word in the lift, so deep levels cost
one compiled orbit instead of a tower of nested closures.  Pairs with
opaque halves (e.g. maps built from Fatou coordinates) go through the
same operations via direct evaluation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import optimize

from . import _kernels
from .cfrac import ContinuedFraction, cf_from_records, from_entries
from .errors import (
    BudgetExceededError,
    ConvergentOverflowError,
    DegeneratePairError,
    DomainError,
    InfiniteHeightError,
    InvariantViolationError,
)
from .lifts import Lift, RotationEstimate, first_quotient

_QP_LIMIT = 2**62
_STALL_RUN = 50  # consecutive sub-threshold steps before declaring a stall


# -- map expressions --


class MapExpr:
    """A real map assembled from a lift by iteration, translation,
    composition and affine conjugation, evaluated on demand."""

    def __call__(self, x):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError


class IterateExpr(MapExpr):
    """T^-p composed with the q-th iterate of a lift."""

    __slots__ = ("lift", "q", "p")

    def __init__(self, lift, q, p):
        if q < 1:
            raise DomainError(f"iterate count must be >= 1, got {q}")
        self.lift = lift
        self.q = int(q)
        self.p = int(p)

    def __call__(self, x):
        lift = self.lift
        if lift.fast and isinstance(x, float):
            return _kernels.pair_map_reduced(
                lift.code, lift.theta, float(lift.c), self.q, self.p, x
            )
        if isinstance(x, complex):
            z = x
            for _ in range(self.q):
                z = lift.complex_eval(z)
            return z - self.p
        y = x
        for _ in range(self.q):
            y = lift(y)
        return y - self.p

    def deriv(self, x):
        lift = self.lift
        if lift.fast and isinstance(x, float):
            return _kernels.pair_deriv_reduced(
                lift.code, lift.theta, float(lift.c), self.q, x
            )
        if isinstance(x, complex):
            z, d = x, 1.0
            for _ in range(self.q):
                d = d * lift.complex_deriv(z)
                z = lift.complex_eval(z)
            return d
        y, d = x, 1.0
        for _ in range(self.q):
            d = d * lift.deriv(y)
            y = lift(y)
        return d

    def __repr__(self):
        return f"IterateExpr(q={self.q}, p={self.p})"


class ConjExpr(MapExpr):
    """Affine conjugate x -> inner(s*x)/s."""

    __slots__ = ("inner", "s")

    def __init__(self, inner, s):
        if s == 0:
            raise DomainError("conjugation scale must be nonzero")
        self.inner = inner
        self.s = s

    def __call__(self, x):
        return self.inner(self.s * x) / self.s

    def deriv(self, x):
        return self.inner.deriv(self.s * x)

    def __repr__(self):
        return f"ConjExpr({self.inner!r}, s={self.s})"


class ComposeExpr(MapExpr):
    """outer after inner."""

    __slots__ = ("outer", "inner")

    def __init__(self, outer, inner):
        self.outer = outer
        self.inner = inner

    def __call__(self, x):
        return self.outer(self.inner(x))

    def deriv(self, x):
        y = self.inner(x)
        return self.outer.deriv(y) * self.inner.deriv(x)

    def __repr__(self):
        return f"ComposeExpr({self.outer!r}, {self.inner!r})"


class RawExpr(MapExpr):
    """Opaque callable half (e.g. a map built from Fatou coordinates).

    ``df`` is optional; without it derivatives fall back to a central
    difference, which is enough for the diagnostics that touch them.
    """

    __slots__ = ("f", "df", "name")

    def __init__(self, f, df=None, name="raw"):
        self.f = f
        self.df = df
        self.name = name

    def __call__(self, x):
        return self.f(x)

    def deriv(self, x):
        if self.df is not None:
            return self.df(x)
        h = 1e-6 * max(1.0, abs(x))
        return (self.f(x + h) - self.f(x - h)) / (2.0 * h)

    def __repr__(self):
        return f"RawExpr({self.name})"


def compose(outer, inner):
    """Compose two expressions, collapsing iterate words when both
    sides live in the same lift (translations commute with the lift)."""
    if (
        isinstance(outer, IterateExpr)
        and isinstance(inner, IterateExpr)
        and outer.lift is inner.lift
    ):
        return IterateExpr(outer.lift, outer.q + inner.q, outer.p + inner.p)
    if (
        isinstance(outer, ConjExpr)
        and isinstance(inner, ConjExpr)
        and outer.s == inner.s
    ):
        return ConjExpr(compose(outer.inner, inner.inner), outer.s)
    return ComposeExpr(outer, inner)


def conjugate(expr, s):
    """Conjugate by x -> s*x (s may be negative; s == 1 is a no-op)."""
    if s == 1:
        return expr
    if isinstance(expr, ConjExpr):
        return ConjExpr(expr.inner, expr.s * s)
    return ConjExpr(expr, s)


def power_expr(expr, n):
    """n-fold composition of an expression with itself (n >= 1)."""
    if n < 1:
        raise DomainError(f"power must be >= 1, got {n}")
    if isinstance(expr, IterateExpr):
        return IterateExpr(expr.lift, n * expr.q, n * expr.p)
    out = expr
    for _ in range(n - 1):
        out = compose(out, expr)
    return out


# -- the pair type --


class CommutingPair:
    """Two commuting increasing maps around 0.

    eta acts on the interval between 0 and xi(0); xi acts between
    eta(0) and 0.  Either orientation is allowed: renormalization
    swaps the sides of 0 at every level, and only ``normalize``
    restores the convention eta(0) < 0 < xi(0) = 1.

    scale is the accumulated affine factor back to the source
    coordinates: evaluating a half at x corresponds to source
    coordinates scale * x, so for a normalized pair the source length
    of the eta-interval is |scale|.  level counts renormalization
    steps from the source pair.
    """

    __slots__ = ("eta", "xi", "lift", "qp_eta", "qp_xi", "scale", "level", "_eta0", "_xi0")

    def __init__(self, eta, xi, lift=None, qp_eta=None, qp_xi=None, scale=1.0, level=0):
        self.eta = eta
        self.xi = xi
        self.lift = lift
        self.qp_eta = qp_eta
        self.qp_xi = qp_xi
        self.scale = scale
        self.level = level
        self._eta0 = None
        self._xi0 = None

    @property
    def eta0(self):
        if self._eta0 is None:
            self._eta0 = self.eta(0.0)
        return self._eta0

    @property
    def xi0(self):
        if self._xi0 is None:
            self._xi0 = self.xi(0.0)
        return self._xi0

    @property
    def symbolic(self):
        """True when both halves are iterate words in one fast lift."""
        return (
            self.lift is not None
            and self.lift.fast
            and self.qp_eta is not None
            and self.qp_xi is not None
        )

    @property
    def normalized(self):
        return self.xi0 == 1.0

    def interval_eta(self):
        """Endpoints of the eta side, as (closer to 0, farther)."""
        return (0.0, self.xi0)

    def interval_xi(self):
        return (0.0, self.eta0)

    def validate(self, comm_tol=1e-10, grid=33):
        """Check orientation, commutation near 0 and return containment.

        Raises DegeneratePairError or InvariantViolationError; returns
        self so construction sites can chain.
        """
        eta0 = float(self.eta0)
        xi0 = float(self.xi0)
        if eta0 == 0.0 or xi0 == 0.0:
            raise DegeneratePairError(
                f"endpoint collapsed: eta(0)={eta0}, xi(0)={xi0}"
            )
        if eta0 * xi0 > 0.0:
            raise InvariantViolationError(
                "opposite sides", f"eta(0)={eta0} and xi(0)={xi0} on the same side of 0"
            )
        span = abs(xi0)
        # commutation where both orders stay near the pair's intervals
        lo = 0.25 * min(eta0, xi0)
        hi = 0.25 * max(eta0, xi0)
        worst = 0.0
        for t in np.linspace(lo, hi, grid):
            t = float(t)
            r = abs(self.eta(self.xi(t)) - self.xi(self.eta(t)))
            worst = max(worst, float(r))
        if worst > comm_tol * span:
            raise InvariantViolationError(
                "commutation",
                f"commutator {worst:.3e} exceeds {comm_tol:.1e} * |I_eta| = {comm_tol * span:.3e}",
            )
        # the once-folded endpoint must come back into the eta side
        w = float(self.xi(self.eta0))
        wlo, whi = sorted((0.0, xi0))
        slack = 1e-9 * span
        if not (wlo - slack <= w <= whi + slack):
            raise InvariantViolationError(
                "return containment",
                f"xi(eta(0)) = {w} outside [{wlo}, {whi}]",
            )
        return self

    def __repr__(self):
        tag = "symbolic" if self.symbolic else "generic"
        return (
            f"CommutingPair(level={self.level}, {tag}, "
            f"eta0={float(self.eta0):.6g}, xi0={float(self.xi0):.6g})"
        )


def base_pair(lift, r0=None):
    """Level-0 pair of a lift with rotation number in (0, 1):
    eta = T^-1 o F^r0, xi = F, with r0 the verified first quotient."""
    if r0 is None:
        r0 = first_quotient(lift)
    r0 = int(r0)
    if r0 < 1:
        raise DomainError(f"first quotient must be >= 1, got {r0}")
    pair = CommutingPair(
        IterateExpr(lift, r0, 1),
        IterateExpr(lift, 1, 0),
        lift=lift,
        qp_eta=(r0, 1),
        qp_xi=(1, 0),
    )
    eta0 = float(pair.eta0)
    xi0 = float(pair.xi0)
    if not (eta0 < 0.0 < xi0):
        raise DegeneratePairError(
            f"base pair needs F^{r0}(0) - 1 < 0 < F(0); got {eta0}, {xi0}"
        )
    return pair.validate()


def boundary_pair(lift):
    """Pair attached to the rotation-number-0 tongue: eta = F,
    xi = T^-1 o F.  Valid on the tongue's closure, where the height
    is infinite (F has a fixed point at the boundary, parabolic)."""
    pair = CommutingPair(
        IterateExpr(lift, 1, 0),
        IterateExpr(lift, 1, 1),
        lift=lift,
        qp_eta=(1, 0),
        qp_xi=(1, 1),
    )
    eta0 = float(pair.eta0)
    xi0 = float(pair.xi0)
    if not (xi0 < 0.0 < eta0):
        raise DegeneratePairError(
            f"boundary pair needs F(0) - 1 < 0 < F(0); got xi0={xi0}, eta0={eta0}"
        )
    return pair.validate()


# -- heights --


def _confirm_fixed_point(eta, y_stall, scale):
    """Decide whether a stalled eta-orbit sits above a genuine fixed
    point between y_stall and 0 (transverse crossing or tangency)."""
    lo, hi = sorted((0.0, float(y_stall)))
    ts = np.linspace(lo, hi, 1025)
    vals = np.array([float(eta(float(t)) - t) for t in ts])
    if np.min(vals) <= 0.0 <= np.max(vals):
        return True
    # one-sided: polish the near-tangency minimum of |eta - id|
    k = int(np.argmin(np.abs(vals)))
    a = ts[max(0, k - 1)]
    b = ts[min(len(ts) - 1, k + 1)]
    if a == b:
        best = abs(vals[k])
    else:
        res = optimize.minimize_scalar(
            lambda t: abs(float(eta(float(t)) - t)),
            bounds=(float(a), float(b)),
            method="bounded",
            options={"xatol": 1e-14 * max(1.0, hi - lo)},
        )
        best = float(res.fun)
    return best <= max(1e-13, 1e-11 * scale)


def _height_generic(pair, cap):
    """Python-level height; returns (r, y_r) or (inf, None)."""
    y0 = pair.xi0
    if y0 == 0:
        raise DegeneratePairError("xi(0) = 0: height undefined")
    s = 1.0 if y0 > 0 else -1.0
    stall_eps = 1e-14 * abs(y0)
    eta = pair.eta
    y = y0
    stalled = 0
    for r in range(cap):
        y_next = eta(y)
        if s * y_next < 0:
            return r, y
        if abs(y_next - y) < stall_eps:
            stalled += 1
            if stalled >= _STALL_RUN:
                if _confirm_fixed_point(eta, y_next, abs(y0)):
                    return math.inf, None
                raise BudgetExceededError(
                    "eta-orbit stalled without a confirmed fixed point"
                )
        else:
            stalled = 0
        y = y_next
    # a parabolic approach shrinks like 1/n and can outlast any cap
    # without tripping the geometric stall threshold; the certificate
    # is the same either way
    if _confirm_fixed_point(eta, y, abs(y0)):
        return math.inf, None
    raise BudgetExceededError(f"height budget {cap} exhausted")


def _height_symbolic(pair, cap):
    # the kernel works in source coordinates, where heights and the
    # crossing structure are the same; the seed is the xi word at 0
    lift = pair.lift
    qe, pe = pair.qp_eta
    qx, px = pair.qp_xi
    y0 = _kernels.pair_map_reduced(lift.code, lift.theta, float(lift.c), qx, px, 0.0)
    return _height_kernel(lift, qe, pe, y0, cap)


def _height_kernel(lift, q, p, y0, cap):
    if y0 == 0.0:
        raise DegeneratePairError("xi(0) = 0: height undefined")
    stall_eps = 1e-14 * abs(y0)
    r, status, y_r, y_next = _kernels.height_orbit(
        lift.code, lift.theta, float(lift.c), q, p, y0, int(cap), stall_eps
    )
    if status == 0:
        return int(r), float(y_r)
    eta = IterateExpr(lift, q, p)
    if _confirm_fixed_point(eta, y_next, abs(y0)):
        return math.inf, None
    if status == 1:
        raise BudgetExceededError("eta-orbit stalled without a confirmed fixed point")
    raise BudgetExceededError(f"height budget {cap} exhausted")


def _height_full(pair, cap):
    """(height, crossing value in the pair's own coordinates)."""
    if pair.symbolic:
        r, y = _height_symbolic(pair, cap)
        if y is not None:
            y = y / float(pair.scale)
        return r, y
    return _height_generic(pair, cap)


def height(pair, cap=10**6):
    """Number of eta-steps before the orbit of xi(0) crosses 0.

    Returns a nonnegative integer, or math.inf when the orbit is
    confirmed to converge to a fixed point of eta before reaching 0.
    Running out of ``cap`` raises BudgetExceededError: an undecided
    budget is not the same thing as a certified infinite height.
    """
    r, _ = _height_full(pair, cap)
    return r


# -- renormalization --


def prerenormalize(pair, cap=10**6):
    """One unrescaled renormalization step:
    (eta, xi) -> (eta^height o xi, eta)."""
    r, y_r = _height_full(pair, cap)
    if math.isinf(r):
        raise InfiniteHeightError(
            "cannot prerenormalize a pair with infinite height"
        )
    if r == 0:
        raise InvariantViolationError(
            "positive height", "height 0: xi(0) and eta(xi(0)) straddle 0"
        )
    if y_r == 0:
        raise DegeneratePairError(
            f"orbit of xi(0) lands on 0 exactly at step {r}"
        )
    new_eta = compose(power_expr(pair.eta, r), pair.xi)
    qp_eta = qp_xi = None
    if pair.qp_eta is not None and pair.qp_xi is not None:
        qe, pe = pair.qp_eta
        qx, px = pair.qp_xi
        if r * qe + qx > _QP_LIMIT:
            raise ConvergentOverflowError(pair.level + 1)
        qp_eta = (r * qe + qx, r * pe + px)
        qp_xi = (qe, pe)
    return CommutingPair(
        new_eta,
        pair.eta,
        lift=pair.lift,
        qp_eta=qp_eta,
        qp_xi=qp_xi,
        scale=pair.scale,
        level=pair.level + 1,
    )


def normalize(pair):
    """Conjugate by x -> xi(0) * x so the new xi sends 0 to 1.

    The factor keeps its sign: renormalization swaps the sides of 0,
    and the signed division is what folds that flip away so that the
    normalized pair always has eta(0) < 0 < xi(0) = 1.
    """
    s = pair.xi0
    if s == 0:
        raise DegeneratePairError("xi(0) = 0: cannot normalize")
    if s == 1.0:
        return pair
    return CommutingPair(
        conjugate(pair.eta, s),
        conjugate(pair.xi, s),
        lift=pair.lift,
        qp_eta=pair.qp_eta,
        qp_xi=pair.qp_xi,
        scale=pair.scale * s,
        level=pair.level,
    )


def renormalize(pair, cap=10**6):
    """Full renormalization step: prerenormalize, then rescale."""
    return normalize(prerenormalize(pair, cap))


# -- rotation number of a pair --


def pair_rotation_cf(pair, depth, cap=10**6):
    """Heights along the renormalization orbit as partial quotients.

    An infinite height ends the expansion with the terminal infinity
    symbol (the pair's number is rational); so does an exact landing
    of the crossing orbit on 0, in which case the recorded height is
    the last entry.  A truncation at ``depth`` is marked unexhausted.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    if pair.symbolic:
        return _pair_cf_symbolic(pair, depth, cap)
    return _pair_cf_generic(pair, depth, cap)


def _pair_cf_symbolic(pair, depth, cap):
    lift = pair.lift
    qe, pe = pair.qp_eta
    qx, px = pair.qp_xi
    entries = []
    y0 = _kernels.pair_map_reduced(lift.code, lift.theta, float(lift.c), qx, px, 0.0)
    for _ in range(depth):
        if y0 == 0.0:
            return from_entries(entries + [math.inf])
        r, y_r = _height_kernel(lift, qe, pe, y0, cap)
        if math.isinf(r):
            return from_entries(entries + [math.inf])
        if r == 0:
            raise InvariantViolationError(
                "positive height", "height 0 in rotation-number extraction"
            )
        entries.append(r)
        if y_r == 0.0:
            return from_entries(entries + [math.inf])
        if r * qe + qx > _QP_LIMIT:
            raise ConvergentOverflowError(len(entries))
        qe, pe, qx, px = r * qe + qx, r * pe + px, qe, pe
        y0 = _kernels.pair_map_reduced(lift.code, lift.theta, float(lift.c), qx, px, 0.0)
    return ContinuedFraction(tuple(entries), False, False)


def _pair_cf_generic(pair, depth, cap):
    cur = pair
    entries = []
    for _ in range(depth):
        try:
            r, y_r = _height_full(cur, cap)
        except DegeneratePairError:
            return from_entries(entries + [math.inf])
        if math.isinf(r):
            return from_entries(entries + [math.inf])
        if r == 0:
            raise InvariantViolationError(
                "positive height", "height 0 in rotation-number extraction"
            )
        entries.append(r)
        if y_r == 0:
            return from_entries(entries + [math.inf])
        cur = prerenormalize(cur, cap)
    return ContinuedFraction(tuple(entries), False, False)


# -- gluing a pair into a circle map --


class GluedCircleMap:
    """Circle map obtained by identifying the endpoints of the
    fundamental interval [eta(0), xi(eta(0))] via xi.  On the half
    where eta stays inside the interval the map is eta; on the other
    half it is xi o eta.

    The exported [0, 1) coordinate runs from the right endpoint to the
    left, which is the orientation in which the glued map's rotation
    number equals the pair's (in the natural orientation the two add
    to 1: eta moves points downward while heights count up).
    """

    def __init__(self, pair):
        pair.validate()
        e0 = float(pair.eta0)
        if not e0 < 0.0:
            raise DomainError("glue needs a standard-orientation pair; normalize first")
        self.pair = pair
        self.lo = e0
        self.hi = float(pair.xi(pair.eta0))
        if not self.lo < 0.0 < self.hi:
            raise DomainError("glued interval must contain 0 in its interior")

    @property
    def length(self):
        return self.hi - self.lo

    def __call__(self, t):
        t = float(t)
        if not (self.lo <= t < self.hi):
            t = self.lo + (t - self.lo) % self.length
        u = float(self.pair.eta(t))
        if self.lo <= u < self.hi:
            return u
        return float(self.pair.xi(u))

    def circle_step(self, phi):
        """The same map in the reflected coordinate of [0, 1)."""
        t = self.hi - (phi % 1.0) * self.length
        u = self(t)
        return min(max((self.hi - u) / self.length, 0.0), 1.0 - 2.0**-52)


def glue(pair):
    """Build the circle map carried by a validated pair."""
    return GluedCircleMap(pair)


def circle_rotation_estimate(step_fn, n, x0=0.0):
    """Rotation number of a degree-one self-map of [0, 1) by summing
    forward gaps; the displacement bound gives the 2/n enclosure."""
    if n < 1:
        raise DomainError("need at least one step")
    x = float(x0)
    lift = 0.0
    for _ in range(n):
        y = step_fn(x)
        lift += (y - x) % 1.0
        x = y
    return RotationEstimate(lift / n % 1.0, 2.0 / n)


def circle_rotation_cf(step_fn, depth, budget=200000, x0=0.0):
    """Partial quotients of the rotation number of a circle map given
    as a self-map of [0, 1), from closest-return records of x0."""
    if depth < 1:
        raise DomainError("depth must be >= 1")
    x = float(x0)
    lift = 0.0
    times = []
    ints = []
    best = 2.0
    terminated = False
    for k in range(1, int(budget) + 1):
        y = step_fn(x)
        lift += (y - x) % 1.0
        x = y
        near = round(lift)
        d = abs(lift - near)
        if d < best:
            best = d
            times.append(k)
            ints.append(int(near))
            if d == 0.0:
                terminated = True
                break
            if len(times) >= depth + 18:
                break
    cf = cf_from_records(times, ints, terminated)
    if len(cf.quotients) > depth:
        return ContinuedFraction(cf.quotients[:depth], False, False)
    return cf


# -- metrics along renormalization orbits --


def pair_distance(first, second, grid=256):
    """Sup distance between two normalized pairs.

    Larger of the eta-discrepancy on [0, 1] and the xi-discrepancy on
    the common part of the xi sides, plus the mismatch of the eta(0)
    endpoints themselves.
    """
    e1 = float(first.eta0)
    e2 = float(second.eta0)
    for pair in (first, second):
        if abs(float(pair.xi0) - 1.0) > 1e-9:
            raise DomainError("pair_distance needs normalized pairs")
    sup = 0.0
    for t in np.linspace(0.0, 1.0, grid):
        t = float(t)
        sup = max(sup, abs(float(first.eta(t)) - float(second.eta(t))))
    lo = max(e1, e2)
    for t in np.linspace(lo, 0.0, grid):
        t = float(t)
        sup_xi = abs(float(first.xi(t)) - float(second.xi(t)))
        sup = max(sup, sup_xi)
    return sup + abs(e1 - e2)


class EpsteinReport:
    """Side-length commensurability along a renormalization orbit."""

    __slots__ = ("ratios", "ratio_min", "ratio_max", "bound")

    def __init__(self, ratios, skip=3):
        self.ratios = list(ratios)
        self.ratio_min = min(self.ratios) if self.ratios else math.nan
        self.ratio_max = max(self.ratios) if self.ratios else math.nan
        tail = self.ratios[skip:] or self.ratios
        self.bound = max(max(r, 1.0 / r) for r in tail) if tail else math.nan

    def __repr__(self):
        return (
            f"EpsteinReport(levels={len(self.ratios)}, "
            f"min={self.ratio_min:.6g}, max={self.ratio_max:.6g}, "
            f"bound={self.bound:.6g})"
        )


def epstein_metrics(pairs, skip=3):
    """Ratios |I_xi| / |I_eta| = |eta(0)| / |xi(0)| per level, and the
    worst two-sided ratio past the first ``skip`` levels."""
    ratios = [abs(float(p.eta0) / float(p.xi0)) for p in pairs]
    return EpsteinReport(ratios, skip=skip)


# -- renormalization orbits --


class LevelRecord:
    __slots__ = ("level", "height", "len_eta", "len_xi", "ratio", "distance")

    def __init__(self, level, height, len_eta, len_xi, ratio, distance=None):
        self.level = level
        self.height = height
        self.len_eta = len_eta
        self.len_xi = len_xi
        self.ratio = ratio
        self.distance = distance

    def __repr__(self):
        d = "" if self.distance is None else f", distance={self.distance:.3e}"
        return (
            f"LevelRecord(level={self.level}, height={self.height}, "
            f"len_eta={self.len_eta:.6g}, ratio={self.ratio:.6g}{d})"
        )


class OrbitLog:
    __slots__ = ("records", "pairs", "reference_pairs", "parabolic")

    def __init__(self, records, pairs, reference_pairs, parabolic):
        self.records = records
        self.pairs = pairs
        self.reference_pairs = reference_pairs
        self.parabolic = parabolic


def renorm_orbit(pair, n, reference=None, cap=10**6, grid=256):
    """Log ``n`` renormalization steps of a normalized pair.

    Per level: the height, both side lengths in source coordinates,
    their ratio, and (when ``reference`` is given) the sup distance to
    the reference pair's own orbit at the same level.  A confirmed
    infinite height stops the orbit and flags it parabolic.
    """
    cur = normalize(pair)
    ref = normalize(reference) if reference is not None else None
    records = []
    pairs = [cur]
    ref_pairs = [ref] if ref is not None else []
    parabolic = False
    for level in range(n + 1):
        len_eta = abs(float(cur.scale))
        len_xi = abs(float(cur.eta0)) * len_eta
        ratio = abs(float(cur.eta0))
        dist = None
        if ref is not None:
            dist = pair_distance(cur, ref, grid=grid)
        try:
            h, _ = _height_full(cur, cap)
        except DegeneratePairError:
            records.append(LevelRecord(level, 0, len_eta, len_xi, ratio, dist))
            break
        records.append(LevelRecord(level, h, len_eta, len_xi, ratio, dist))
        if math.isinf(h):
            parabolic = True
            break
        if level == n:
            break
        cur = renormalize(cur, cap)
        pairs.append(cur)
        if ref is not None:
            try:
                ref = renormalize(ref, cap)
                ref_pairs.append(ref)
            except (InfiniteHeightError, DegeneratePairError):
                ref = None
    return OrbitLog(records, pairs, ref_pairs, parabolic)
