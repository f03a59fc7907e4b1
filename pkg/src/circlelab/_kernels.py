"""Hot orbit kernels for the double-precision family fast path.

Everything here works on the built-in families only, dispatched by an
integer code; arbitrary evaluators go through the generic pure-Python
paths in the calling modules.  Kernels are kept free of fastmath so a
rerun reproduces results bit for bit.
"""

import math

import numpy as np
from numba import njit

ARNOLD = 0
TWO_HARMONIC = 1
ROTATION = 2

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def step(code, theta, c, x):
    if code == 0:  # arnold
        return x + theta - math.sin(TWO_PI * x) / TWO_PI
    elif code == 1:  # two harmonic
        return (
            x
            + theta
            - (1.0 + c) * math.sin(TWO_PI * x) / TWO_PI
            + c * math.sin(2.0 * TWO_PI * x) / (2.0 * TWO_PI)
        )
    else:  # rigid rotation
        return x + theta


@njit(cache=True)
def dstep(code, theta, c, x):
    if code == 0:
        return 1.0 - math.cos(TWO_PI * x)
    elif code == 1:
        return 1.0 - (1.0 + c) * math.cos(TWO_PI * x) + c * math.cos(2.0 * TWO_PI * x)
    else:
        return 1.0


@njit(cache=True)
def orbit_final(code, theta, c, x0, n):
    x = x0
    for _ in range(n):
        x = step(code, theta, c, x)
    return x


@njit(cache=True)
def pair_map(code, theta, c, q, p, x):
    """T^-p composed with the q-th iterate of the lift."""
    for _ in range(q):
        x = step(code, theta, c, x)
    return x - p


@njit(cache=True)
def pair_map_reduced(code, theta, c, q, p, x):
    """Same value as pair_map but iterated in reduced coordinates, so
    deep iterates do not spend mantissa on the winding number."""
    base = math.floor(x)
    y = x - base
    wind = np.int64(base)
    for _ in range(q):
        y = step(code, theta, c, y)
        while y >= 1.0:
            y -= 1.0
            wind += 1
        while y < 0.0:
            y += 1.0
            wind -= 1
    return y + (wind - p)


@njit(cache=True)
def pair_map_deriv(code, theta, c, q, x):
    d = 1.0
    for _ in range(q):
        d *= dstep(code, theta, c, x)
        x = step(code, theta, c, x)
    return d


@njit(cache=True)
def pair_deriv_reduced(code, theta, c, q, x):
    """Derivative of the q-th iterate, evaluated along the reduced
    orbit (the integrand is 1-periodic, so reduction is exact)."""
    y = x - math.floor(x)
    d = 1.0
    for _ in range(q):
        d *= dstep(code, theta, c, y)
        y = step(code, theta, c, y)
        while y >= 1.0:
            y -= 1.0
        while y < 0.0:
            y += 1.0
    return d


@njit(cache=True)
def height_orbit(code, theta, c, q, p, y0, cap, stall_eps):
    """Strict-crossing height of the eta-orbit of y0.

    Returns (r, status, y_r, y_next) where status 0 means the orbit
    crossed 0 at step r (y_r on the starting side, y_next strictly
    beyond), status 1 means the step size stalled below stall_eps for
    50 consecutive steps (candidate infinite height), status 2 means
    the budget ran out.
    """
    s = 1.0 if y0 > 0.0 else -1.0
    y = y0
    stalled = 0
    for r in range(cap):
        y_next = pair_map_reduced(code, theta, c, q, p, y)
        if s * y_next < 0.0:
            return r, 0, y, y_next
        if abs(y_next - y) < stall_eps:
            stalled += 1
            if stalled >= 50:
                return r, 1, y, y_next
        else:
            stalled = 0
        y = y_next
    return cap, 2, y, y


@njit(cache=True)
def rho_orbit(code, theta, c, n):
    """n-step orbit of 0 kept in reduced coordinates.

    Returns (winding, fractional part) of the endpoint; the lift value
    is their sum.  Reduction keeps every map evaluation at arguments
    of size one, so no mantissa is wasted on the integer part.
    """
    y = 0.0
    wind = 0
    for _ in range(n):
        y = step(code, theta, c, y)
        while y >= 1.0:
            y -= 1.0
            wind += 1
        while y < 0.0:
            y += 1.0
            wind -= 1
    return wind, y


@njit(cache=True)
def cf_records(code, theta, c, budget, max_records):
    """Closest-return records of the orbit of 0 on the circle.

    Walks the orbit of 0 in reduced coordinates and records every k
    whose point is strictly closer to 0 (cyclic distance) than all
    previous points.  Record times are the convergent denominators
    q_m; the matching rounded lift values give p_m.  Returns (times,
    ints, count, status, steps_done): status 0 = budget exhausted
    while still improving, 1 = no improvement for the stall window
    (rational lock suspect), 2 = exact landing on 0.
    """
    times = np.zeros(max_records, dtype=np.int64)
    ints = np.zeros(max_records, dtype=np.int64)
    nrec = 0
    best = 2.0
    y = 0.0
    wind = 0
    last_t = 0
    for k in range(1, budget + 1):
        y = step(code, theta, c, y)
        while y >= 1.0:
            y -= 1.0
            wind += 1
        while y < 0.0:
            y += 1.0
            wind -= 1
        d = y if y <= 0.5 else 1.0 - y
        if d < best:
            best = d
            if nrec < max_records:
                times[nrec] = k
                ints[nrec] = wind + 1 if y > 0.5 else wind
                nrec += 1
            last_t = k
            if d == 0.0:
                return times, ints, nrec, 2, k
            if nrec >= max_records:
                return times, ints, nrec, 0, k
        else:
            stall_cap = 1000 if last_t < 50 else 24 * last_t
            if k - last_t > stall_cap:
                return times, ints, nrec, 1, k
    return times, ints, nrec, 0, budget


@njit(cache=True)
def orbit_separation(code, theta, c, x0, h, n):
    """Largest separation of two orbits started h apart; precision probe."""
    a = x0
    b = x0 + h
    worst = abs(h)
    for _ in range(n):
        a = step(code, theta, c, a)
        b = step(code, theta, c, b)
        gap = abs(b - a)
        if gap > worst:
            worst = gap
    return worst


@njit(cache=True)
def forward_steps_until(code, theta, c, x, target, budget):
    """Iterate until y >= target; returns (y, steps, status).

    status 0 reached, 2 budget exhausted.  Meant for monotone approach
    segments (attracting petal entry), where each step moves right.
    """
    y = x
    for n in range(budget):
        if y >= target:
            return y, n, 0
        y = step(code, theta, c, y)
    if y >= target:
        return y, budget, 0
    return y, budget, 2


@njit(cache=True)
def backward_steps_until(code, theta, c, x, target, lo, budget):
    """Pull back with the inverse branch until y <= target.

    The inverse of one step is solved by safeguarded Newton on the
    monotone bracket [lo, y]; lo is a known lower bound for every
    preimage along the way (the parabolic point for repelling-side
    pulls).  Returns (y, steps, status): 0 reached, 2 budget, 3 the
    bracket failed to contain a preimage.
    """
    y = x
    for n in range(budget):
        if y <= target:
            return y, n, 0
        a = lo
        b = y
        if step(code, theta, c, a) - y > 0.0:
            return y, n, 3
        g = 0.5 * (a + b)
        for _ in range(200):
            fg = step(code, theta, c, g) - y
            if fg == 0.0:
                break
            if fg > 0.0:
                b = g
            else:
                a = g
            if b - a < 2e-16 * max(1.0, abs(y)):
                g = 0.5 * (a + b)
                break
            d = dstep(code, theta, c, g)
            gn = 0.5 * (a + b)
            if d > 1e-12:
                t = g - fg / d
                if a < t < b:
                    gn = t
            g = gn
        y = g
    if y <= target:
        return y, budget, 0
    return y, budget, 2


@njit(cache=True)
def petal_return(code, theta, c, x, p, gate_lo, hi, budget):
    """Glued flow of a tongue-closure pair until attracting entry.

    One step is the pair's eta; crossing the seam at hi applies the
    unit translation that realizes xi o eta there.  Stops on the
    attracting side inside [gate_lo, p).  Returns (y, steps, status).
    """
    y = x
    for n in range(budget):
        if gate_lo <= y < p:
            return y, n, 0
        y = step(code, theta, c, y)
        if y >= hi:
            y -= 1.0
    if gate_lo <= y < p:
        return y, budget, 0
    return y, budget, 2

@njit(cache=True)
def _horner(coeffs, x):
    acc = 0.0
    for cc in coeffs:
        acc = acc * x + cc
    return acc


@njit(cache=True)
def equator_orbit(code, theta, c, x0, nsteps, phase_off, c_att, c_rep,
                  beta, poly, dpoly, p, a, gate, hi, wcut, anchor_v,
                  lift_base, budget):
    """Orbit of the equator circle map with its accumulated lift.

    One step: invert the repelling Abel coordinate at s = x + phase_off,
    run the glued flow back into the attracting gate, and read the
    attracting Abel coordinate mod 1.  lift_base pins the integer
    branch of each increment (the true per-step displacement lies in
    [lift_base, lift_base + 1)).  Returns (x_end, lift, status);
    status 0 ok, 2 a flow budget was exhausted, 4 the series inversion
    left its branch.
    """
    x = x0
    lift = 0.0
    att_target = p - 1.0 / (a * wcut)
    for _ in range(nsteps):
        s = x + phase_off
        n = int(math.ceil(s - anchor_v))
        if n < 0:
            n = 0
        v = s + c_rep - n
        w = v - beta * math.log(abs(v) + 2.0)
        if w > -wcut:
            w = -wcut - 2.0
        for _k in range(60):
            xi1 = 1.0 / w
            f = w - beta * math.log(-w) + _horner(poly, xi1) - v
            if abs(f) < 3e-15 * max(1.0, abs(v)):
                break
            dphi = 1.0 - beta * xi1 + _horner(dpoly, xi1) * xi1 * xi1
            w = w - f / dphi
        if w > -wcut + 2.0:
            return x, lift, 4
        z = p - 1.0 / (a * w)
        for _k in range(n):
            z = step(code, theta, c, z)
        ok = False
        for _k in range(budget):
            if gate <= z < p:
                ok = True
                break
            z = step(code, theta, c, z)
            if z >= hi:
                z -= 1.0
        if not ok:
            return x, lift, 2
        m = 0
        while z < att_target:
            z = step(code, theta, c, z)
            m += 1
            if m > budget:
                return x, lift, 2
        w2 = -1.0 / (a * (z - p))
        x2 = 1.0 / w2
        val = w2 - beta * math.log(w2) + _horner(poly, x2) - m - c_att
        y = val % 1.0
        lift += ((y - x) - lift_base) % 1.0 + lift_base
        x = y
    return x, lift, 0
