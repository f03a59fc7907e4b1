"""Parabolic fixed points, numerical Abel coordinates, transit maps,
and renormalization through a parabolic point.

A germ packages a map with a unit-multiplier fixed point p together
with both Abel coordinates: increasing solutions of Phi(eta(z)) =
Phi(z) + 1 on the attracting and repelling sides.  In the rescaled
variable w = -1/(a(z-p)) the map is w + 1 + O(1/w), and the Abel
coordinate has the asymptotic form

    phi(w) = w - beta*log w + c_1/w + c_2/w^2 + ...

whose coefficients follow from the germ's Taylor series by a
triangular recursion.  Evaluation pushes the argument along the orbit
until |w| is large, applies the series, and subtracts the step count,
which converges much faster than the textbook limit formula and keeps
residuals near roundoff.

The transit machinery glues the two coordinates with a phase offset:
a translation upstairs becomes a return map through the parabolic
gate downstairs, which is how a pair with an infinite height gets
renormalized.
"""

from __future__ import annotations

import cmath
import math
from typing import NamedTuple

import numpy as np
from scipy import optimize

from . import _kernels
from .cfrac import (
    ContinuedFraction,
    cf_from_records,
    convergents,
    from_entries,
    real_from_cf,
)
from .errors import (
    BudgetExceededError,
    DomainError,
    SectorError,
    SolveError,
)
from .pairs import (
    CommutingPair,
    IterateExpr,
    RawExpr,
    height,
    normalize,
)

TWO_PI = 2.0 * math.pi

R0_DEFAULT = 20.0      # petal-entry threshold in the w coordinate
W_CUT = 60.0           # series evaluation threshold
SERIES_ORDER = 12
PUSH_BUDGET = 10**6


def circle_distance(x, y):
    """Distance on R/Z."""
    d = abs(x - y) % 1.0
    return min(d, 1.0 - d)


# -- truncated power-series helpers (coefficient arrays, index = degree) --


def _mul_trunc(a, b, n):
    return np.convolve(a, b)[: n + 1]


def _recip_one_plus(p, n):
    """1/(1 + p(u)) with p(0) = 0, to degree n (geometric series)."""
    acc = np.concatenate(([1.0], np.zeros(n)))
    term = acc.copy()
    for _ in range(n):
        term = -_mul_trunc(term, p, n)
        acc = acc + term
    return acc


def _log_one_plus(g, n):
    """log(1 + g(x)) with g(0) = 0, to degree n."""
    acc = np.zeros(n + 1)
    term = np.concatenate(([1.0], np.zeros(n)))
    for k in range(1, n + 1):
        term = _mul_trunc(term, g, n)
        acc = acc + ((-1.0) ** (k + 1) / k) * term
    return acc


def _compose_trunc(outer, inner, n):
    """outer(inner(u)) to degree n; inner must have zero constant term."""
    acc = np.zeros(n + 1)
    acc[0] = outer[-1]
    for c in outer[-2::-1]:
        acc = _mul_trunc(acc, inner, n)
        acc[0] += c
    return acc


# -- germ Taylor data --


def _taylor_via_lift(host: IterateExpr, p, order):
    """Taylor coefficients of the iterate word at p via per-step
    composition of the family's analytic jets."""
    lift = host.lift
    series = np.zeros(order + 1)
    series[0] = p
    series[1] = 1.0
    x = p
    fact = [math.factorial(k) for k in range(order + 1)]
    for _ in range(host.q):
        jet = np.empty(order + 1)
        jet[0] = float(lift(x))
        for k in range(1, order + 1):
            jet[k] = float(lift.deriv(x, k)) / fact[k]
        delta = series.copy()
        delta[0] = 0.0
        series = _compose_trunc(jet, delta, order)
        x = jet[0]
    series[0] -= host.p
    return series


def _host_taylor(host, p, order):
    """Taylor coefficients of host at p, or None when only pointwise
    evaluation is available."""
    if (
        isinstance(host, IterateExpr)
        and host.lift.code is not None
        and host.lift.prec == 53
    ):
        return _taylor_via_lift(host, p, order)
    try:
        host.deriv(p, 2)
    except TypeError:
        return None
    fact = 1.0
    coeffs = [float(host(p))]
    for k in range(1, order + 1):
        fact *= k
        coeffs.append(float(host.deriv(p, k)) / fact)
    return np.array(coeffs)


def _fd_coefficients(host, p, scale):
    """Quadratic and cubic coefficients by central differences with one
    Richardson step at h = scale * 2^-20."""
    h = scale * 2.0**-20

    def d2(hh):
        return (float(host(p + hh)) - 2.0 * float(host(p)) + float(host(p - hh))) / (
            hh * hh
        )

    def d3(hh):
        return (
            float(host(p + 2 * hh))
            - 2.0 * float(host(p + hh))
            + 2.0 * float(host(p - hh))
            - float(host(p - 2 * hh))
        ) / (2.0 * hh**3)

    a2 = (4.0 * d2(h) - d2(2.0 * h)) / 3.0
    a3 = (4.0 * d3(h) - d3(2.0 * h)) / 3.0
    return a2 / 2.0, a3 / 6.0


def _abel_coefficients(taylor, a, beta, order):
    """Power-tail coefficients c_1..c_order of the Abel series.

    In x = 1/w the rescaled map is W = w (1 + g(x)); matching
    phi(W) = phi(w) + 1 order by order gives a triangular system with
    the c_j as the unknowns (the log term carries beta separately, and
    no higher log powers arise).
    """
    n = order + 2
    # eta(p+u) = p + u(1 + P(u))
    pser = np.zeros(n + 1)
    for k in range(1, n + 1):
        if k + 1 < len(taylor):
            pser[k] = taylor[k + 1]
    inv = _recip_one_plus(pser, n)
    # g(x) = inv(-x/a) - 1
    g = np.array([inv[k] * (-1.0 / a) ** k for k in range(n + 1)])
    g[0] = 0.0
    # A = W - w - 1:  A_m = g_{m+1};  first-order consistency A_1 = beta
    A = np.zeros(n + 1)
    A[1:n] = g[2 : n + 1]
    if abs(A[1] - beta) > 1e-9 * max(1.0, abs(beta)):
        raise SolveError(
            f"series setup inconsistent: leading coefficient {A[1]} vs beta {beta}"
        )
    S = _log_one_plus(g, n)
    T = _mul_trunc(np.concatenate(([0.0, 1.0], np.zeros(n - 1))), _recip_one_plus(g, n), n)
    # powers of T
    tpow = [None, T.copy()]
    for _ in range(2, order + 1):
        tpow.append(_mul_trunc(tpow[-1], T, n))
    known = A - beta * S
    c = np.zeros(order + 1)  # c[j], j >= 1
    for m in range(2, order + 2):
        acc = known[m]
        for j in range(1, m - 1):
            acc += c[j] * tpow[j][m]
        denom = tpow[m - 1][m]  # equals -(m-1)
        c[m - 1] = -acc / denom
    return c[1:]


# -- the germ type --


class ParabolicGerm:
    """A unit-multiplier fixed point with calibrated Abel coordinates.

    Immutable after construction.  a and b are the quadratic and cubic
    Taylor coefficients at p (analytic jets when the host supports
    them, finite differences otherwise; fd_a/fd_b always carry the
    finite-difference values for cross-checks).  The attracting side
    is where the orbit converges to p: u < 0 for a > 0.
    """

    def __init__(self, host, interval, p, taylor, a, b, fd_a, fd_b,
                 r0, wcut, series_order, budget):
        self.host = host
        # kernel-backed lifts reject complex arguments in __call__
        self._ceval = getattr(host, "complex_eval", host)
        cderiv = getattr(host, "complex_deriv", None)
        self._cderiv = cderiv if cderiv is not None else (lambda g: host.deriv(g))
        self.interval = (float(min(interval)), float(max(interval)))
        self.scale = self.interval[1] - self.interval[0]
        self.p = p
        self.taylor = taylor
        self.a = a
        self.b = b
        self.fd_a = fd_a
        self.fd_b = fd_b
        self.beta = 1.0 - b / (a * a)
        self.r0 = float(r0)
        self.wcut = float(wcut)
        self.budget = int(budget)
        self.series_order = 0
        self._poly = np.array([0.0])
        self._dpoly = np.array([0.0])
        if taylor is not None and series_order >= 1:
            c = _abel_coefficients(taylor, a, self.beta, series_order)
            self.series_order = series_order
            # polyval layout: highest degree first, variable x = 1/w
            self._poly = np.concatenate((c[::-1], [0.0]))
            self._dpoly = np.array(
                [-(j) * c[j - 1] for j in range(len(c), 0, -1)] + [0.0]
            )
        side = -1.0 if a > 0 else 1.0
        self.a_pt = p + side * 0.25 * self.scale
        self.r_pt = p - side * 0.25 * self.scale
        self._fast = (
            isinstance(host, IterateExpr)
            and host.lift.fast
            and host.q == 1
            and a > 0.0
        )
        self.series_residual = self._residual_check()
        self._c_att = 0.0
        self._c_rep = 0.0
        self._c_att = self.attracting(self.a_pt)
        self._c_rep = self.repelling(self.r_pt)
        self.transit_constant = self.repelling(self.r_pt) - self.attracting(self.a_pt)

    # -- series --

    def _w(self, z):
        return -1.0 / (self.a * (z - self.p))

    def _z_of_w(self, w):
        return self.p - 1.0 / (self.a * w)

    def _phi(self, w):
        # real branch: log|w| keeps one formula on both sides
        return w - self.beta * math.log(abs(w)) + np.polyval(self._poly, 1.0 / w)

    def _dphi(self, w):
        x = 1.0 / w
        return 1.0 - self.beta * x + np.polyval(self._dpoly, x) * x * x

    def _phi_c(self, w, repelling):
        # principal log of w (attracting) or -w (repelling): continuous
        # across each petal's real trace and matching _phi on it
        arg = -w if repelling else w
        return w - self.beta * cmath.log(arg) + np.polyval(self._poly, 1.0 / w)

    def _residual_check(self):
        if self.taylor is None:
            return math.nan
        worst = 0.0
        for w0 in (self.wcut, 1.7 * self.wcut, 3.1 * self.wcut):
            for sgn in (1.0, -1.0):
                w = sgn * w0
                z = self._z_of_w(w)
                zn = float(self.host(z))
                wn = self._w(zn)
                r = abs(self._phi(wn) - self._phi(w) - 1.0)
                worst = max(worst, r)
        if worst > 1e-8:
            raise SolveError(f"Abel series residual {worst:.3e} too large")
        return worst

    # -- pushes along the orbit --

    def _push_attracting(self, z):
        """Forward orbit until w >= wcut; returns (z, steps)."""
        target = self.p - 1.0 / (self.a * self.wcut)
        if self._fast:
            lift = self.host.lift
            y, n, status = _kernels.forward_steps_until(
                lift.code, lift.theta, float(lift.c), z, target, self.budget
            )
            if status != 0:
                raise BudgetExceededError("attracting push budget exhausted")
            return y, n
        host = self.host
        n = 0
        w = self._w(z)
        while w < self.wcut:
            z = float(host(z))
            n += 1
            if n > self.budget:
                raise BudgetExceededError("attracting push budget exhausted")
            w = self._w(z)
        return z, n

    def _pull_repelling(self, z):
        """Backward orbit until w <= -wcut; returns (z, steps)."""
        target = self.p - 1.0 / (self.a * -self.wcut)
        if self._fast:
            lift = self.host.lift
            y, n, status = _kernels.backward_steps_until(
                lift.code, lift.theta, float(lift.c), z, target, self.p, self.budget
            )
            if status == 3:
                raise SolveError("inverse branch lost its bracket on the pull")
            if status != 0:
                raise BudgetExceededError("repelling pull budget exhausted")
            return y, n
        host = self.host
        n = 0
        w = self._w(z)
        while w > -self.wcut:
            lo, hi = sorted((self.p, z))
            z = float(
                optimize.brentq(
                    lambda g: float(host(g)) - z, lo, hi, xtol=1e-15, rtol=8.9e-16
                )
            )
            n += 1
            if n > self.budget:
                raise BudgetExceededError("repelling pull budget exhausted")
            w = self._w(z)
        return z, n

    # -- Abel coordinates --

    def attracting(self, z):
        """Abel coordinate on the attracting side, 0 at a_pt."""
        if isinstance(z, complex):
            return self._attracting_complex(z)
        u = z - self.p
        if u == 0.0 or u * self.a > 0.0:
            raise SectorError(f"{z} is not on the attracting side of {self.p}")
        z, n = self._push_attracting(z)
        return self._phi(self._w(z)) - n - self._c_att

    def repelling(self, z):
        """Abel coordinate on the repelling side, 0 at r_pt."""
        if isinstance(z, complex):
            return self._repelling_complex(z)
        u = z - self.p
        if u == 0.0 or u * self.a < 0.0:
            raise SectorError(f"{z} is not on the repelling side of {self.p}")
        z, n = self._pull_repelling(z)
        return self._phi(self._w(z)) + n - self._c_rep

    def _attracting_complex(self, z):
        w = complex(self._w(z))
        if w.real <= self.r0:
            raise SectorError(f"Re w = {w.real:.3g} <= {self.r0}: outside the sector")
        n = 0
        while w.real < self.wcut:
            z = self._ceval(complex(z))
            n += 1
            if n > self.budget:
                raise BudgetExceededError("attracting push budget exhausted")
            w = complex(self._w(z))
        return self._phi_c(w, False) - n - self._c_att

    def _repelling_complex(self, z):
        w = complex(self._w(z))
        if w.real >= -self.r0:
            raise SectorError(f"Re w = {w.real:.3g} >= {-self.r0}: outside the sector")
        n = 0
        while w.real > -self.wcut:
            z = self._newton_pull_complex(complex(z))
            n += 1
            if n > self.budget:
                raise BudgetExceededError("repelling pull budget exhausted")
            w = complex(self._w(z))
        return self._phi_c(w, True) + n - self._c_rep

    def _newton_pull_complex(self, target):
        g = target
        for _ in range(60):
            f = self._ceval(g) - target
            if abs(f) < 1e-14 * max(1.0, abs(target)):
                return g
            d = self._cderiv(g)
            g = g - f / d
        raise SolveError("complex inverse step did not converge")

    # -- inverses on the real traces --

    def _phi_inverse(self, v, repelling):
        w = v + math.copysign(self.beta * math.log(abs(v) + 2.0), v)
        if repelling and w > -self.wcut:
            w = -self.wcut - 2.0
        if not repelling and w < self.wcut:
            w = self.wcut + 2.0
        for _ in range(60):
            f = self._phi(w) - v
            if abs(f) < 3e-15 * max(1.0, abs(v)):
                break
            w = w - f / self._dphi(w)
        if repelling and w > -self.wcut + 2.0:
            raise SolveError("repelling series inversion left its branch")
        if not repelling and w < self.wcut - 2.0:
            raise SolveError("attracting series inversion left its branch")
        return w

    def repelling_inverse(self, s):
        """Real point with repelling Abel coordinate s."""
        anchor = self._phi(-self.wcut - 5.0) - self._c_rep
        n = max(0, int(math.ceil(s - anchor)))
        w = self._phi_inverse(s + self._c_rep - n, repelling=True)
        z = self._z_of_w(w)
        if n:
            if self._fast:
                lift = self.host.lift
                z = _kernels.orbit_final(lift.code, lift.theta, float(lift.c), z, n)
            else:
                for _ in range(n):
                    z = float(self.host(z))
        return z

    def attracting_inverse(self, s):
        """Real point with attracting Abel coordinate s."""
        anchor = self._phi(self.wcut + 5.0) - self._c_att
        n = max(0, int(math.ceil(anchor - s)))
        w = self._phi_inverse(s + self._c_att + n, repelling=False)
        z = self._z_of_w(w)
        lo = self.interval[0] - 0.75 * self.scale
        hi = self.interval[1] + 0.75 * self.scale
        side = -1.0 if self.a > 0 else 1.0  # direction away from p
        for _ in range(n):
            # one inverse step on the attracting side: bracket by walking
            # outward until the image overshoots, stay inside the basin
            zt = z
            g = zt + side * 0.1 * self.scale
            tries = 0
            while (float(self.host(g)) - zt) * side < 0.0:
                g += side * 0.1 * self.scale
                tries += 1
                if tries > 64 or not (lo <= g <= hi):
                    raise SectorError("attracting inverse left the petal's real trace")
            a_b, b_b = sorted((g, zt))
            z = float(
                optimize.brentq(
                    lambda x: float(self.host(x)) - zt, a_b, b_b,
                    xtol=1e-15, rtol=8.9e-16,
                )
            )
        return z

    def __repr__(self):
        return (
            f"ParabolicGerm(p={self.p:.12g}, a={self.a:.6g}, b={self.b:.6g}, "
            f"beta={self.beta:.6g}, order={self.series_order})"
        )


# -- construction --


def find_parabolic_point(host, interval, series_order=SERIES_ORDER,
                         r0=R0_DEFAULT, wcut=W_CUT, budget=PUSH_BUDGET):
    """Locate the unit-multiplier fixed point of host inside interval
    and build the germ around it.

    The tangency is a double root of host(x) - x, found as the root of
    the derivative condition host'(x) = 1 that also annihilates the
    displacement.  A transverse fixed point or no fixed point at all
    raises DomainError; a vanishing quadratic term (multiplicity above
    two) is unsupported.
    """
    lo, hi = (float(min(interval)), float(max(interval)))
    scale = hi - lo
    if scale <= 0.0:
        raise DomainError("empty interval")
    xs = np.linspace(lo, hi, 4097)
    gap = np.array([float(host(float(x))) - float(x) for x in xs])
    dm1 = np.array([float(host.deriv(float(x))) - 1.0 for x in xs])
    candidates = []
    for i in range(len(xs) - 1):
        if dm1[i] == 0.0 or dm1[i] * dm1[i + 1] < 0.0:
            root = float(
                optimize.brentq(
                    lambda x: float(host.deriv(float(x))) - 1.0,
                    float(xs[i]), float(xs[i + 1]),
                    xtol=1e-15, rtol=8.9e-16,
                )
            )
            candidates.append((abs(float(host(root)) - root), root))
    if not candidates:
        raise DomainError("no tangency: host'(x) = 1 has no root in the interval")
    resid, p = min(candidates)
    if resid > 1e-10 * scale:
        if np.min(gap) < 0.0 < np.max(gap):
            raise DomainError(
                f"no tangency: transverse fixed point present (residual {resid:.3e})"
            )
        raise DomainError(
            f"no tangency: nearest double-root candidate misses by {resid:.3e}"
        )
    taylor = _host_taylor(host, p, series_order + 3)
    fd_a, fd_b = _fd_coefficients(host, p, scale)
    if taylor is not None:
        if abs(taylor[0] - p) > 1e-9 * scale:
            raise SolveError(f"fixed-point residual {taylor[0] - p:.3e} in the jet")
        if abs(taylor[1] - 1.0) > 1e-10:
            raise SolveError(f"multiplier {taylor[1]} is not 1 at the tangency")
        a, b = float(taylor[2]), float(taylor[3])
    else:
        a, b = fd_a, fd_b
    if abs(a) < 1e-8:
        raise DomainError(
            "vanishing quadratic term: multiplicity above two is unsupported"
        )
    return ParabolicGerm(
        host, (lo, hi), p, taylor, a, b, fd_a, fd_b, r0, wcut,
        series_order if taylor is not None else 0, budget,
    )


# -- spec'd operation aliases on germs --


def fatou_attracting(germ, z):
    """Attracting Abel coordinate of z (normalized to 0 at a_pt)."""
    return germ.attracting(z)


def fatou_repelling(germ, z):
    """Repelling Abel coordinate of z (normalized to 0 at r_pt)."""
    return germ.repelling(z)


def transit_map(germ, theta, x):
    """Cross the parabolic gate: repelling point whose Abel coordinate
    is the attracting coordinate of x advanced by theta."""
    if not 0.0 <= theta < 1.0:
        raise DomainError(f"transit phase must lie in [0, 1), got {theta}")
    s = germ.attracting(x) + theta + germ.transit_constant
    return germ.repelling_inverse(s)


def abel_residual(germ, side="attracting", count=100, seed=0):
    """Worst Abel-equation residual over a reproducible sample of the
    petal: half real-trace points, half complex sector points."""
    rng = np.random.default_rng(seed)
    half = count // 2
    pts = []
    sgn = -1.0 if germ.a > 0 else 1.0
    if side == "attracting":
        sgn_u = sgn
    elif side == "repelling":
        sgn_u = -sgn
    else:
        raise DomainError("side must be 'attracting' or 'repelling'")
    u_lo = 1.0 / (abs(germ.a) * 2.0 * germ.wcut)
    u_hi = 0.25 * germ.scale
    for t in rng.uniform(math.log(u_lo), math.log(u_hi), half):
        pts.append(germ.p + sgn_u * math.exp(float(t)))
    re = rng.uniform(germ.r0 + 1.0, 6.0 * germ.r0, count - half)
    im = rng.uniform(-3.0 * germ.r0, 3.0 * germ.r0, count - half)
    for wr, wi in zip(re, im):
        w = complex(float(wr), float(wi))
        if side == "repelling":
            w = -w
        pts.append(complex(germ.p - 1.0 / (germ.a * w)))
    worst = 0.0
    coord = germ.attracting if side == "attracting" else germ.repelling
    for z in pts:
        fz = germ._ceval(z) if isinstance(z, complex) else germ.host(z)
        r = abs(coord(fz) - coord(z) - 1.0)
        worst = max(worst, float(r))
    return worst


# -- tongue-closure pairs: equator dynamics and renormalization --


class _GatePlumbing:
    """Shared geometry for routing a tongue-closure pair's dynamics
    through its parabolic gate."""

    def __init__(self, pair, r0, series_order, cap):
        eta0 = float(pair.eta0)
        xi0 = float(pair.xi0)
        if not (xi0 < 0.0 < eta0):
            raise DomainError(
                "gate plumbing needs a tongue-closure pair with xi(0) < 0 < eta(0)"
            )
        h = height(pair, cap=cap)
        if not math.isinf(h):
            raise DomainError(f"pair is not parabolic: finite height {h}")
        self.pair = pair
        germ = find_parabolic_point(pair.eta, (xi0, 0.0), series_order=series_order, r0=r0)
        if germ.a <= 0.0:
            raise DomainError(
                "gate orientation unsupported: attracting side must face xi(0)"
            )
        self.germ = germ
        self.hi = eta0
        self.gate = germ.p - 1.0 / (germ.a * germ.r0)
        if not xi0 < self.gate < germ.p:
            raise DomainError("petal gate does not fit inside the pair interval")
        # seam translation is available when xi = T^-1 eta in the lift
        self.fast = (
            pair.symbolic
            and pair.qp_xi == (pair.qp_eta[0], pair.qp_eta[1] + 1)
            and germ._fast
        )
        z, n = self._to_petal(xi0)
        self.entry_steps = n
        self.entry_point = z
        self.entry_coord = germ.attracting(z)
        self.anchor_v = germ._phi(-germ.wcut - 5.0) - germ._c_rep
        # pin the integer branch of equator-orbit increments: the map at
        # phase theta is the phase-zero map precomposed with a rotation
        # by theta, so one sampled displacement range covers all phases
        self.lift_lo = None
        em0 = EquatorMap(self, 0.0)
        us = np.linspace(0.0, 1.0, 97)[:-1]
        fr = np.sort(np.array([(em0(float(u)) - u) % 1.0 for u in us]))
        gaps = np.diff(np.concatenate((fr, [fr[0] + 1.0])))
        k = int(np.argmax(gaps))
        if k == len(fr) - 1:
            r_lo, r_hi = float(fr[0]), float(fr[-1])
        else:
            r_lo, r_hi = float(fr[k + 1]), float(fr[k]) + 1.0
        if r_hi - r_lo > 0.9:
            raise SolveError(
                f"equator displacement range {r_hi - r_lo:.3f} too wide to "
                "pin a lift branch"
            )
        self.lift_lo = r_lo - 0.02

    def _to_petal(self, z):
        """Forward eta-steps until the attracting gate (no seam)."""
        if self.fast:
            lift = self.pair.lift
            y, n, status = _kernels.forward_steps_until(
                lift.code, lift.theta, float(lift.c), z, self.gate, self.germ.budget
            )
            if status != 0:
                raise BudgetExceededError("petal entry budget exhausted")
            return y, n
        eta = self.pair.eta
        n = 0
        while z < self.gate:
            z = float(eta(z))
            n += 1
            if n > self.germ.budget:
                raise BudgetExceededError("petal entry budget exhausted")
        return z, n

    def glued_return(self, z):
        """Glued flow from the repelling side back into the gate."""
        if self.fast:
            lift = self.pair.lift
            y, n, status = _kernels.petal_return(
                lift.code, lift.theta, float(lift.c), z,
                self.germ.p, self.gate, self.hi, self.germ.budget,
            )
            if status != 0:
                raise BudgetExceededError("gate return budget exhausted")
            return y
        eta, xi = self.pair.eta, self.pair.xi
        y = z
        for _ in range(self.germ.budget):
            if self.gate <= y < self.germ.p:
                return y
            y = float(eta(y))
            if y >= self.hi:
                y = float(xi(y))
        raise BudgetExceededError("gate return budget exhausted")


class EquatorMap:
    """Circle map induced on the attracting Abel circle by one transit
    through the gate followed by the glued return."""

    def __init__(self, plumbing, theta):
        if not 0.0 <= theta < 1.0:
            raise DomainError(f"transit phase must lie in [0, 1), got {theta}")
        self.plumbing = plumbing
        self.germ = plumbing.germ
        self.theta = float(theta)
        base = getattr(plumbing, "lift_lo", None)
        self._lift_base = 0.0 if base is None else base + self.theta

    def __call__(self, t):
        germ = self.germ
        s = (float(t) % 1.0) + self.theta + germ.transit_constant
        z = germ.repelling_inverse(s)
        y = self.plumbing.glued_return(z)
        return germ.attracting(y) % 1.0

    def orbit(self, x0, n):
        """n steps from x0; returns (end point, accumulated lift)."""
        pl = self.plumbing
        g = self.germ
        if pl.fast:
            lift = pl.pair.lift
            x, acc, status = _kernels.equator_orbit(
                lift.code, lift.theta, float(lift.c), float(x0) % 1.0, int(n),
                self.theta + g.transit_constant, g._c_att, g._c_rep,
                g.beta, g._poly, g._dpoly, g.p, g.a, pl.gate, pl.hi,
                g.wcut, pl.anchor_v, self._lift_base, g.budget,
            )
            if status == 4:
                raise SolveError("series inversion left its branch")
            if status != 0:
                raise BudgetExceededError("equator orbit budget exhausted")
            return x, acc
        x = float(x0) % 1.0
        acc = 0.0
        b = self._lift_base
        for _ in range(int(n)):
            y = self(x)
            acc += ((y - x) - b) % 1.0 + b
            x = y
        return x, acc


def equator_circle_map(pair, theta, r0=R0_DEFAULT, series_order=SERIES_ORDER,
                       cap=200_000):
    """Equator circle map of a parabolic pair at transit phase theta."""
    return EquatorMap(_GatePlumbing(pair, r0, series_order, cap), theta)


def _rational_cf(p, q):
    """Continued fraction of p/q in [0, 1] by the Euclid loop."""
    g = math.gcd(p, q)
    num, den = p // g, q // g
    entries = []
    while num:
        a, r = divmod(den, num)
        entries.append(a)
        den, num = num, r
    entries.append(math.inf)
    return from_entries(entries)


def _circle_records_cf(step_fn, budget):
    """Closest-return continued fraction of a [0,1) self-map's orbit,
    untruncated (enclosure-grade).

    Inside a locked plateau the orbit converges to a cycle and the
    records stall; replaying one period from the final state certifies
    the exact rational in that case."""
    x = 0.0
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
            if len(times) >= 40:
                break
    if times and not terminated and times[-1] <= budget // 2:
        q = times[-1]
        y = x
        for _ in range(q):
            y = step_fn(y)
        if circle_distance(y, x) == 0.0:
            return _rational_cf(ints[-1], q)
    return cf_from_records(times, ints, terminated)


def equator_rotation_profile(pair, thetas, n=2000, r0=R0_DEFAULT,
                             series_order=SERIES_ORDER):
    """Lifted rotation-number estimates of the equator map over a phase
    grid (estimate error at most 2/n), sharing one gate setup."""
    plumbing = _GatePlumbing(pair, r0, series_order, 200_000)
    out = np.empty(len(thetas))
    for i, th in enumerate(thetas):
        _x, acc = EquatorMap(plumbing, float(th)).orbit(0.0, n)
        out[i] = acc / n
    return out


def _transit_witnesses(target, value, m, tol):
    """Displacement witnesses (numerator, denominator, is_above) from
    the target's convergents, lifted by m whole turns.

    A probe's rotation number compares to p/q through the sign of its
    lifted q-step displacement minus p, at any starting point; the
    witness list pins the value to within tol when no witness decides.
    """
    if target.inf_terminated:
        cv = convergents(target, len(target.quotients))
        p, q = cv.p[-1], cv.q[-1]
        return [(p + m * q, q, None)]
    cv = convergents(target, len(target.quotients))
    out = []
    for k in range(1, len(cv.q)):
        p, q = cv.p[k], cv.q[k]
        out.append((p + m * q, q, p / q > value))
        if k >= 2 and 1.0 / (cv.q[k] * cv.q[k - 1]) <= tol:
            return out
    raise SolveError(
        f"target expansion too short to certify a rotation number to {tol}"
    )


def _classify_transit_probe(em, witnesses, rational, burn=2000):
    """-1 when the probe's rotation number is below the target, +1
    when above, 0 on a hit (pinned within tol, or locked for rational
    targets)."""
    x = 0.0
    if rational:
        # settle toward the attractor so a locked plateau shows a
        # near-zero period displacement
        x, _ = em.orbit(x, burn)
        pw, qw, _ = witnesses[0]
        _x, dl = em.orbit(x, qw)
        disp = dl - pw
        if abs(disp) <= 1e-11:
            return 0
        return -1 if disp < 0.0 else 1
    for pw, qw, above in witnesses:
        x, dl = em.orbit(x, qw)
        disp = dl - pw
        if above:
            if disp >= 0.0:
                return 1
        elif disp <= 0.0:
            return -1
    return 0


def solve_transit(pair, target, tol, side=None, r0=R0_DEFAULT,
                  series_order=SERIES_ORDER, max_steps=200):
    """Transit phase theta whose equator map has the target rotation
    number.

    The phase-to-rotation-number response is nondecreasing of degree
    one, so the search bisects against displacement witnesses built
    from the target's convergents.  An exactly rational target selects
    a plateau of phases; the side flag ('low' or 'high') picks which
    edge to return, resolved to about 1e-9 in phase (closer to the
    edge a locked plateau is not numerically separable from the
    near-tangent channel outside it).
    """
    if not isinstance(target, ContinuedFraction):
        target = from_entries(target)
    value = real_from_cf(target) % 1.0
    rational = target.inf_terminated
    if rational and side not in ("low", "high"):
        raise DomainError("a rational target needs side='low' or side='high'")
    plumbing = _GatePlumbing(pair, r0, series_order, 200_000)
    _x, acc = EquatorMap(plumbing, 0.0).orbit(0.0, 4000)
    base = acc / 4000.0
    m = int(math.ceil(base - value))
    lifted_target = value + m
    if min(lifted_target - base, base + 1.0 - lifted_target) < 3e-3:
        raise SolveError(
            "target sits on the phase response seam; shift the target by a turn"
        )
    witnesses = _transit_witnesses(target, value, m, tol)
    lo, hi = 0.0, 1.0
    locked = None
    for _ in range(max_steps):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            if locked is not None:
                return locked
            raise SolveError("phase interval collapsed below float resolution")
        cls = _classify_transit_probe(EquatorMap(plumbing, mid), witnesses, rational)
        if cls == 0:
            if not rational:
                return mid
            locked = mid
            if side == "low":
                hi = mid
            else:
                lo = mid
            if hi - lo < 1e-12:
                return locked
        elif cls < 0:
            lo = mid
        else:
            hi = mid
    if locked is not None:
        return locked
    raise SolveError(f"no phase within tol={tol} after {max_steps} bisection steps")


def _inverse_step(germ, y):
    """One inverse branch step on the repelling side."""
    lo, hi = sorted((germ.p, y))
    return float(
        optimize.brentq(
            lambda g: float(germ.host(g)) - y, lo, hi, xtol=1e-15, rtol=8.9e-16
        )
    )


def parabolic_renormalize(pair, theta, r0=R0_DEFAULT, series_order=SERIES_ORDER,
                          comm_tol=1e-8):
    """Renormalize a parabolic pair through its gate at phase theta.

    The new eta routes xi's image into the attracting petal, transits
    with phase theta, and runs back up to just below 0; the new xi is
    the old eta.  Output is a normalized commuting pair.
    """
    plumbing = _GatePlumbing(pair, r0, series_order, 200_000)
    germ = plumbing.germ
    if not 0.0 <= theta < 1.0:
        raise DomainError(f"transit phase must lie in [0, 1), got {theta}")
    eta, xi = pair.eta, pair.xi
    offset = theta + germ.transit_constant

    def through_gate(x):
        # the petal-entry eta-word is absorbed exactly by the Abel
        # coordinate, so the gate crossing needs no explicit push
        return germ.repelling_inverse(germ.attracting(float(xi(x))) + offset)

    # choose the eta-word exponent so the new eta sends 0 into
    # (eta^-1(0), 0]: climb when the gate exit is low, pull when high
    z_star = through_gate(0.0)
    m = 0
    y = z_star
    while float(eta(y)) <= 0.0:
        y = float(eta(y))
        m += 1
        if m > 10_000:
            raise BudgetExceededError("climb to 0 exhausted its budget")
    while y > 0.0:
        y = _inverse_step(germ, y)
        m -= 1
        if m < -10_000:
            raise BudgetExceededError("pull to 0 exhausted its budget")

    def gamma(x, _m=m):
        y = through_gate(x)
        if _m >= 0:
            if plumbing.fast:
                lift = pair.lift
                return _kernels.orbit_final(lift.code, lift.theta, float(lift.c), y, _m)
            for _ in range(_m):
                y = float(eta(y))
            return y
        for _ in range(-_m):
            y = _inverse_step(germ, y)
        return y

    raw = CommutingPair(
        RawExpr(gamma, None, "gate-transit"),
        eta,
        lift=None,
        scale=pair.scale,
        level=0,
    )
    raw.validate(comm_tol=comm_tol)
    return normalize(raw)


# -- perturbed germs past the boundary --


class PerturbedGermData(NamedTuple):
    fixed_point: complex
    multiplier: complex
    alpha: complex
    theta_pred: float


def multiplier_data(host, germ, newton_tol=1e-13):
    """Complex fixed-point data of a map just past the parabolic
    boundary, measured against the reference germ.

    The upper-half fixed point is found by Newton from the square-root
    seed; the transit-phase prediction is the fractional part of
    Re(1/alpha) with the multiplier written as exp(2 pi i alpha).
    """
    eps = float(host(germ.p)) - germ.p
    if not eps > 0.0:
        raise DomainError(
            f"host displacement {eps:.3e} at p is not past the boundary"
        )
    ceval = getattr(host, "complex_eval", host)
    cderiv = getattr(host, "complex_deriv", None)
    if cderiv is None:
        cderiv = lambda w: host.deriv(w)
    z = complex(germ.p, math.sqrt(eps / abs(germ.a)))
    ok = False
    for _ in range(80):
        f = ceval(z) - z
        if abs(f) < newton_tol * max(1.0, germ.scale):
            ok = True
            break
        d = cderiv(z) - 1.0
        if d == 0:
            break
        z = z - f / d
    if not ok:
        raise SolveError("complex Newton did not reach the perturbed fixed point")
    if z.imag < 0.0:
        z = z.conjugate()
    lam = cderiv(z)
    alpha = cmath.log(lam) / (2j * math.pi)
    if abs(cmath.phase(alpha)) >= math.pi / 4.0:
        raise DomainError(
            f"arg alpha = {cmath.phase(alpha):.3f} outside the admissible sector"
        )
    theta_pred = (1.0 / alpha).real % 1.0
    return PerturbedGermData(z, lam, alpha, theta_pred)


def measured_transit_phase(host, germ, budget=PUSH_BUDGET):
    """Observed transit phase of a perturbed map: iterate the germ's
    attracting base point through the former gate and read the phase
    deficit in the attracting Abel chart continued across the gate.

    The continuation is realized through the repelling evaluator, which
    shares the raw series chart up to its own calibration constant, so
    the continued value is repelling(x) + c_rep - c_att.  On the rigid
    Moebius germ the deficit equals frac(Re(1/alpha)) up to O(sqrt(eps))
    exactly, which is the regime the multiplier prediction lives in.
    """
    x = float(germ.a_pt)
    n = 0
    while x < germ.r_pt:
        x = float(host(x))
        n += 1
        if n > budget:
            raise BudgetExceededError("transit passage budget exhausted")
    continued = germ.repelling(x) + germ._c_rep - germ._c_att
    return (n - continued) % 1.0
