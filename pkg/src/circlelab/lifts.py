"""Circle-map lifts, rotation numbers, and parameter solvers.

A lift F is a monotone degree-one map of the real line, F(x+1) =
F(x) + 1, projecting to a circle endomorphism.  The built-in families
put their cubic critical point at 0:

    arnold:        F(x) = x + theta - sin(2 pi x) / (2 pi)
    two_harmonic:  F(x) = x + theta - (1+c) sin(2 pi x)/(2 pi)
                                    + c sin(4 pi x)/(4 pi),  0 <= c <= 1/4
    rotation:      F(x) = x + theta   (rigid control family, no critical
                                       point; used as a harness check)

Both parametrized families translate linearly in theta (dF/dtheta = 1),
which the tangency solver relies on.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import mpmath as mp

from . import _kernels
from .cfrac import (
    ContinuedFraction,
    cf_from_real,
    cf_from_records,
    convergents,
    from_entries,
    real_from_cf,
)
from .errors import (
    DegeneratePairError,
    DomainError,
    ParameterError,
    PrecisionLossError,
    SolveError,
)

TWO_PI = 2.0 * math.pi

_FAMILY_CODES = {
    "arnold": _kernels.ARNOLD,
    "two_harmonic": _kernels.TWO_HARMONIC,
    "rotation": _kernels.ROTATION,
}


class Lift:
    """A concrete lift with pointwise evaluation and derivatives.

    prec is the mantissa size in bits: 53 runs on hardware floats,
    larger values switch every evaluation to mpmath at that precision.
    """

    def __init__(self, family, theta, c=0.0, prec=53, funcs=None):
        self.family = family
        self.theta = float(theta) if prec == 53 else theta
        self.c = c
        self.prec = int(prec)
        self.code = _FAMILY_CODES.get(family)
        self._funcs = funcs  # only for family == "custom"
        if self.prec < 53:
            raise ParameterError("prec must be at least 53 bits")

    # -- scalar evaluation --

    def __call__(self, x):
        if self._funcs is not None:
            return self._funcs[0](x)
        if self.prec == 53:
            return _kernels.step(self.code, self.theta, float(self.c), float(x))
        with mp.workprec(self.prec + 10):
            return self._mp_eval(mp.mpf(x) if not isinstance(x, mp.mpf) else x)

    def _mp_eval(self, x):
        th = mp.mpf(self.theta)
        tp = 2 * mp.pi
        if self.family == "arnold":
            return x + th - mp.sin(tp * x) / tp
        if self.family == "two_harmonic":
            c = mp.mpf(self.c)
            return x + th - (1 + c) * mp.sin(tp * x) / tp + c * mp.sin(2 * tp * x) / (2 * tp)
        if self.family == "rotation":
            return x + th
        raise DomainError("extended precision needs a built-in family")

    def deriv(self, x, order=1):
        """Analytic derivative of the given order (custom lifts fall
        back to central differences)."""
        if order < 1:
            raise DomainError("order must be >= 1")
        if self._funcs is not None:
            funcs = self._funcs
            if order < len(funcs) and funcs[order] is not None:
                return funcs[order](x)
            return _fd_deriv(funcs[0], x, order)
        if self.prec == 53:
            return self._deriv_double(float(x), order)
        with mp.workprec(self.prec + 10):
            return self._deriv_mp(mp.mpf(x), order)

    def _deriv_double(self, x, k):
        lead = 1.0 if k == 1 else 0.0
        if self.family == "rotation":
            return lead
        phase = k * math.pi / 2.0
        s1 = -(TWO_PI ** (k - 1)) * math.sin(TWO_PI * x + phase)
        if self.family == "arnold":
            return lead + s1
        c = self.c
        s2 = ((2 * TWO_PI) ** (k - 1)) * math.sin(2 * TWO_PI * x + phase)
        return lead + (1.0 + c) * s1 + c * s2

    def _deriv_mp(self, x, k):
        lead = mp.mpf(1) if k == 1 else mp.mpf(0)
        if self.family == "rotation":
            return lead
        tp = 2 * mp.pi
        phase = k * mp.pi / 2
        s1 = -(tp ** (k - 1)) * mp.sin(tp * x + phase)
        if self.family == "arnold":
            return lead + s1
        c = mp.mpf(self.c)
        s2 = ((2 * tp) ** (k - 1)) * mp.sin(2 * tp * x + phase)
        return lead + (1 + c) * s1 + c * s2

    def complex_eval(self, z):
        if self._funcs is not None:
            return self._funcs[0](z)
        if self.prec == 53:
            z = complex(z)
            th = self.theta
            if self.family == "arnold":
                return z + th - cmath.sin(TWO_PI * z) / TWO_PI
            if self.family == "two_harmonic":
                c = self.c
                return (
                    z
                    + th
                    - (1 + c) * cmath.sin(TWO_PI * z) / TWO_PI
                    + c * cmath.sin(2 * TWO_PI * z) / (2 * TWO_PI)
                )
            return z + th
        with mp.workprec(self.prec + 10):
            return self._mp_eval(mp.mpc(z))

    def complex_deriv(self, z):
        if self.prec == 53 and self._funcs is None:
            z = complex(z)
            if self.family == "arnold":
                return 1.0 - cmath.cos(TWO_PI * z)
            if self.family == "two_harmonic":
                c = self.c
                return 1.0 - (1 + c) * cmath.cos(TWO_PI * z) + c * cmath.cos(2 * TWO_PI * z)
            return 1.0 + 0j
        raise DomainError("complex derivative needs a built-in family at double precision")

    def iterate(self, x, n):
        if self.fast and isinstance(x, float):
            return _kernels.orbit_final(self.code, self.theta, float(self.c), x, n)
        for _ in range(n):
            x = self(x)
        return x

    @property
    def fast(self):
        """True when the numba fast path applies."""
        return self.prec == 53 and self.code is not None

    def with_prec(self, prec):
        if self.family == "custom":
            raise DomainError("custom lifts have no extended-precision form")
        return Lift(self.family, self.theta, self.c, prec)

    def __repr__(self):
        extra = f", c={self.c}" if self.family == "two_harmonic" else ""
        prec = f", prec={self.prec}" if self.prec != 53 else ""
        return f"Lift({self.family}, theta={self.theta}{extra}{prec})"


def arnold_lift(theta, prec=53):
    """Standard family member with critical point at 0."""
    return Lift("arnold", theta, 0.0, prec)


def two_harmonic_lift(theta, c, prec=53):
    """Two-harmonic family member; monotone and cubic-critical for
    c in [0, 1/4]."""
    if not 0.0 <= c <= 0.25:
        raise ParameterError(f"two_harmonic needs c in [0, 1/4], got {c}")
    return Lift("two_harmonic", theta, float(c), prec)


def rotation_lift(theta, prec=53):
    """Rigid rotation x + theta; fails validate_lift by design (no
    critical point) but keeps the full lift interface."""
    return Lift("rotation", theta, 0.0, prec)


def custom_lift(f, df=None, d2f=None, d3f=None, theta=0.0):
    """Wrap raw callables as a lift, mainly to feed the validator."""
    lift = Lift("custom", theta, 0.0, 53, funcs=(f, df, d2f, d3f))
    return lift


def _fd_deriv(f, x, order, h=1e-5):
    if order == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    if order == 2:
        return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h)
    if order == 3:
        h = 1e-4
        return (f(x + 2 * h) - 2 * f(x + h) + 2 * f(x - h) - f(x - 2 * h)) / (2 * h**3)
    raise DomainError("finite differences go up to order 3")


# -- validation --


@dataclass
class LiftDiagnostics:
    period_residual: float
    min_slope: float
    crit_first: float
    crit_second: float
    crit_third: float
    scale: float

    @property
    def passed(self):
        return (
            self.period_residual <= 1e-12 * self.scale
            and self.min_slope >= -1e-12
            and self.crit_third > 0.0
        )


def validate_lift(lift, grid=4096):
    """Check degree one, monotonicity, and the cubic critical point at 0
    on a uniform grid; returns diagnostics, never raises."""
    xs = [i / grid for i in range(grid)]
    period = 0.0
    slope_min = math.inf
    scale = 1.0
    for x in xs:
        fx = float(lift(x))
        period = max(period, abs(float(lift(x + 1.0)) - fx - 1.0))
        slope_min = min(slope_min, float(lift.deriv(x)))
        scale = max(scale, abs(fx))
    return LiftDiagnostics(
        period_residual=period,
        min_slope=slope_min,
        crit_first=abs(float(lift.deriv(0.0))),
        crit_second=abs(float(lift.deriv(0.0, 2))),
        crit_third=float(lift.deriv(0.0, 3)),
        scale=scale,
    )


# -- rotation numbers --


class RotationEstimate(NamedTuple):
    value: float
    bound: float


def rotation_number_real(lift, n, check_precision=True):
    """Estimate the rotation number as F^n(0)/n; the bound 1/n is the
    classical a-priori error for degree-one lifts."""
    if n < 1:
        raise DomainError("n must be >= 1")
    if lift.fast:
        wind, y = _kernels.rho_orbit(lift.code, lift.theta, float(lift.c), n)
        if check_precision:
            h = 2.0**-30
            worst = _kernels.orbit_separation(lift.code, lift.theta, float(lift.c), 0.0, h, n)
            if worst > h * 2.0**26:
                raise PrecisionLossError(
                    f"nearby seeds separated by factor {worst / h:.3g} over {n} steps"
                )
        return RotationEstimate((wind + y) / n, 1.0 / n)
    x = 0.0 if lift.prec == 53 else mp.mpf(0)
    x = lift.iterate(x, n)
    return RotationEstimate(float(x / n), 1.0 / n)


def _has_fixed_point(lift, grid=2048):
    lo, hi = math.inf, -math.inf
    for i in range(grid):
        x = i / grid
        gap = float(lift(x)) - x
        lo = min(lo, gap)
        hi = max(hi, gap)
    return lo <= 0.0 <= hi


def first_quotient(lift):
    """Verified first partial quotient r_0 of the rotation number.

    Bootstraps from a real estimate (n grows with the guess), then
    checks the closest-return bracket F^{r0}(0) <= 1 < F^{r0+1}(0) and
    nudges r0 until it holds.
    """
    est = rotation_number_real(lift, 100_000, check_precision=False)
    if est.value <= 0.0:
        raise DomainError("rotation number is 0; no first quotient")
    guess = max(1, math.floor(1.0 / est.value))
    n = min(max(100_000, 100 * guess * guess), 50_000_000)
    if n > 100_000:
        est = rotation_number_real(lift, n, check_precision=False)
        guess = max(1, math.floor(1.0 / est.value))
    r0 = guess
    for _ in range(64):
        a = _orbit_value(lift, r0)
        b = _orbit_value(lift, r0 + 1)
        if a <= 1.0 and b > 1.0:
            return r0
        if a > 1.0:
            if r0 == 1:
                raise DomainError("rotation number >= 1 on the bracket check")
            r0 -= 1
        else:
            r0 += 1
    raise SolveError("first-quotient bracket did not settle")


def _orbit_value(lift, n):
    return float(lift.iterate(0.0, n))


def rotation_number_cf(lift, depth):
    """Partial quotients of the rotation number.

    r_0 comes from the verified bracket; the remaining quotients are
    the heights along the renormalization orbit of the base pair.  The
    result is cross-checked against cf_from_real of the real estimate
    up to the depth its 1/n bound certifies.
    """
    if depth < 1:
        raise DomainError("depth must be >= 1")
    if _has_fixed_point(lift):
        return from_entries([math.inf])
    try:
        r0 = first_quotient(lift)
        from .pairs import base_pair, pair_rotation_cf

        pair = base_pair(lift, r0)
        tail = pair_rotation_cf(pair, depth - 1)
        quotients = (r0,) + tail.quotients
        out = ContinuedFraction(quotients, tail.inf_terminated, tail.exhausted)
    except DegeneratePairError:
        # critical orbit hits 0 exactly: the rotation number is the
        # rational read off the closest-return records
        out = records_cf(lift, budget=2_000_000, max_records=64)
        if not out.exhausted:
            raise
    _cross_check_cf(lift, out)
    return out


def _cross_check_cf(lift, cf, n=100_000):
    est = rotation_number_real(lift, n, check_precision=False)
    lo, hi = est.value - est.bound, est.value + est.bound
    if not (0.0 < lo and hi < 1.0):
        return
    a = cf_from_real(lo, len(cf.quotients) + 2)
    b = cf_from_real(hi, len(cf.quotients) + 2)
    common = 0
    for x, y in zip(a.quotients, b.quotients):
        if x != y:
            break
        common += 1
    certified = max(0, common - 1)
    got = cf.quotients[:certified]
    want = a.quotients[:certified]
    if got != want[: len(got)]:
        raise SolveError(
            f"height quotients {got} disagree with certified estimate prefix {want}"
        )


# -- closest-return record extraction --


def records_cf(lift, budget, max_records=64, min_records=None):
    """Continued fraction from closest-return records of the orbit of 0.

    Independent of the pair machinery: record times give convergent
    denominators, rounded lift values give numerators, and the
    recurrence is validated in exact integer arithmetic.  A detected
    rational lock or exact landing yields an inf-terminated result;
    running out of budget yields a truncation.
    """
    if not lift.fast:
        raise DomainError("record extraction needs a double-precision family lift")
    times, ints, nrec, status, _ = _kernels.cf_records(
        lift.code, lift.theta, float(lift.c), int(budget), int(max_records)
    )
    return cf_from_records(times[:nrec], ints[:nrec], status in (1, 2))


# -- parameter solver --


def solve_parameter(factory, target, tol, bracket=(0.0, 1.0), max_steps=200):
    """Find theta with |rho(F_theta) - value(target)| <= tol.

    factory: theta -> Lift.  target: ContinuedFraction (a truncation
    stands for any number with that quotient prefix).  Monotonicity of
    rho in theta drives a bisection; each probe is classified against
    the target by comparing partial quotients extracted from
    closest-return records, so deep tolerances do not require orbits
    of length 1/tol.
    """
    if not isinstance(target, ContinuedFraction):
        target = from_entries(target)
    value = real_from_cf(target)
    if not (0.0 < value < 1.0) and not target.inf_terminated:
        raise DomainError("target value must lie in (0, 1)")
    depth_needed = _depth_for_tol(target, tol)
    lo, hi = float(bracket[0]), float(bracket[1])
    budget0 = 200_000
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            raise SolveError("theta interval collapsed below float resolution")
        sign, accepted = _classify_theta(
            factory, mid, target, value, tol, depth_needed, budget0
        )
        if accepted:
            return mid
        if sign < 0:
            lo = mid
        else:
            hi = mid
    raise SolveError(f"no theta within tol={tol} after {max_steps} bisection steps")


def _depth_for_tol(target, tol):
    """Smallest matched depth whose convergent bound certifies tol."""
    if target.exhausted:
        return len(target.quotients)
    c = convergents(target, len(target.quotients))
    for m in range(len(target.quotients) - 1):
        if c.bound(m) <= tol:
            return m + 1
    raise DomainError(
        f"target truncation too short to certify tol={tol}; deepest bound "
        f"{c.bound(len(target.quotients) - 2):.3g}"
    )


def _cf_enclosure(cf):
    """Certified interval containing every real whose expansion starts
    with the given quotients (a point when the expansion is complete)."""
    if cf.exhausted or not cf.quotients:
        v = real_from_cf(cf)
        return (v, v) if cf.exhausted else (0.0, 1.0)
    m = len(cf.quotients)
    c = convergents(cf, m)
    end_a = c.p[m] / c.q[m]
    end_b = (c.p[m] + c.p[m - 1]) / (c.q[m] + c.q[m - 1])
    return (end_a, end_b) if end_a <= end_b else (end_b, end_a)


def _classify_theta(factory, theta, target, value, tol, depth_needed, budget0):
    """Return (sign of rho(theta) - target, accepted within tol).

    The accept decision uses a certified enclosure of rho(theta) built
    from the extracted quotient prefix, so a rational lock inside the
    tolerance window counts as a hit too.
    """
    lift = factory(theta)
    est = rotation_number_real(lift, 4096, check_precision=False)
    if est.value - est.bound > value:
        return 1, False
    if est.value + est.bound < value:
        return -1, False
    budget = budget0
    while True:
        got = records_cf(lift, budget=budget, max_records=depth_needed + 16)
        lo, hi = _cf_enclosure(got)
        if max(abs(lo - value), abs(hi - value)) <= tol:
            return 0, True
        if lo > value:
            return 1, False
        if hi < value:
            return -1, False
        if budget >= 60_000_000:
            raise SolveError("record budget exhausted before deciding a probe")
        budget *= 8


# -- tongue boundaries --


class TangencyResult(NamedTuple):
    theta: float        # boundary parameter, reduced mod 1
    theta_raw: float    # unreduced value the solver converged to
    x: float            # tangency abscissa of the period-q orbit
    multiplier: float   # (F^q)'(x) at the tangency
    residual: float     # |F^q(x) - x - p| at the solution


def _orbit_gap_extrema(lift, p, q, grid=512):
    lo, hi = math.inf, -math.inf
    x_best, g_best = 0.0, math.inf
    for i in range(grid):
        x = i / grid
        g = float(_pair_value(lift, q, p, x)) - x
        lo = min(lo, g)
        hi = max(hi, g)
        if abs(g) < g_best:
            g_best, x_best = abs(g), x
    return lo, hi, x_best


def _pair_value(lift, q, p, x):
    if lift.fast and isinstance(x, float):
        return _kernels.pair_map(lift.code, lift.theta, float(lift.c), q, p, x)
    y = x
    for _ in range(q):
        y = lift(y)
    return y - p


def tongue_boundary(factory, p, q, side, tol):
    """Boundary parameter of the p/q tongue on the requested side.

    Brackets the transition where the period-q orbit of F^q - p is
    gained or lost, then polishes the parabolic tangency with a
    two-dimensional Newton iteration on (orbit equation, unit
    multiplier).  The returned multiplier is checked against 1 to
    within 10*tol.
    """
    if side not in ("left", "right"):
        raise DomainError("side must be 'left' or 'right'")
    if q < 1 or p < 0 or (q > 1 and math.gcd(p, q) != 1) or p > q:
        raise DomainError(f"bad tongue label {p}/{q}")
    center = p / q

    def above(theta):
        lo, _hi, _x = _orbit_gap_extrema(factory(theta), p, q)
        return lo > 0.0

    def below(theta):
        _lo, hi, _x = _orbit_gap_extrema(factory(theta), p, q)
        return hi < 0.0

    pred = above if side == "right" else below
    inner = center
    if pred(inner):
        raise SolveError(f"{p}/{q} tongue does not cover theta = {inner}")
    step_dir = 1.0 if side == "right" else -1.0
    outer = None
    step = 0.02
    for _ in range(32):
        cand = inner + step_dir * step
        if pred(cand):
            outer = cand
            break
        step *= 2.0
    if outer is None:
        raise SolveError("no parameter beyond the tongue found")
    for _ in range(80):
        mid = 0.5 * (inner + outer)
        if pred(mid):
            outer = mid
        else:
            inner = mid
        if abs(outer - inner) < 1e-8:
            break
    _lo, _hi, x_seed = _orbit_gap_extrema(factory(inner), p, q, grid=2048)
    theta_b, x_b = _tangency_newton(factory, p, q, x_seed, 0.5 * (inner + outer))
    lift = factory(theta_b)
    mult = _orbit_deriv(lift, q, x_b)
    resid = abs(float(_pair_value(lift, q, p, x_b)) - x_b)
    if abs(mult - 1.0) > 10.0 * tol:
        raise SolveError(f"tangency multiplier {mult} off 1 by more than 10*tol")
    return TangencyResult(theta_b % 1.0, theta_b, x_b, mult, resid)


def _orbit_deriv(lift, q, x):
    d = 1.0
    y = x
    for _ in range(q):
        d *= float(lift.deriv(y))
        y = float(lift(y))
    return d


def _tangency_newton(factory, p, q, x0, theta0, iters=80):
    """Solve F_theta^q(x) - x - p = 0 together with unit multiplier.

    Parameter derivatives use dF/dtheta = 1, so s_{j+1} = F'(x_j) s_j + 1
    accumulates the theta-sensitivity along the orbit.
    """
    x, theta = float(x0), float(theta0)
    for _ in range(iters):
        lift = factory(theta)
        y = x
        u, w = 1.0, 0.0   # first and second x-derivatives of the orbit
        s, m = 0.0, 0.0   # theta-derivative and mixed derivative
        for _ in range(q):
            f1 = float(lift.deriv(y))
            f2 = float(lift.deriv(y, 2))
            w = f2 * u * u + f1 * w
            m = f2 * s * u + f1 * m
            s = f1 * s + 1.0
            u = f1 * u
            y = float(lift(y))
        g = y - x - p
        gx = u - 1.0
        h = u - 1.0  # multiplier condition shares the value, fresh derivs below
        hx = w
        htheta = m
        gtheta = s
        det = gx * htheta - gtheta * hx
        if det == 0.0:
            raise SolveError("singular Jacobian in tangency Newton")
        dx = (g * htheta - gtheta * h) / det
        dtheta = (gx * h - g * hx) / det
        dx = max(-0.05, min(0.05, dx))
        dtheta = max(-1e-2, min(1e-2, dtheta))
        x -= dx
        theta -= dtheta
        if abs(g) < 1e-14 and abs(h) < 1e-12 and abs(dx) < 1e-13 and abs(dtheta) < 1e-14:
            return theta, x
    if abs(g) < 1e-11 and abs(h) < 1e-9:
        return theta, x
    raise SolveError(f"tangency Newton stalled at residuals {g:.2e}, {h:.2e}")
