"""Complex-plane dynamics of circle-map lifts.

Preimage curves of the real axis, escape-time grids on the cylinder,
domain grids for holomorphic pair extensions with containment margins,
derivative norms in the hyperbolic metric of the doubly slit plane, and
the critical-scaling exponent experiment.
"""
import colorsys
import math
from typing import NamedTuple

import numpy as np
from scipy import ndimage, optimize, stats

from .cfrac import cf_from_real, convergents, from_entries
from .errors import DomainError, SolveError
from .lifts import arnold_lift

TWO_PI = 2.0 * math.pi

# |Im| beyond this grows monotonically under every lift in the family;
# past it an orbit cannot return, so iteration short-circuits
OVERFLOW_IM = 50.0
ESCAPE_IM_DEFAULT = 4.0

LABEL_BOUNDED = -1
LABEL_DOMAIN_U = -2
LABEL_DOMAIN_V = -3
LABEL_DOMAIN_BOTH = -4
LABEL_OUTSIDE = -5

_U_COLOR = (70, 130, 220)
_V_COLOR = (235, 170, 50)
_BOTH_COLOR = (225, 70, 180)
_OUTSIDE_COLOR = (250, 250, 250)
_HUE_CYCLE = 48


class ComplexWindow(NamedTuple):
    """Square-pixel sampling window: resolution points per axis."""
    center: complex
    width: float
    height: float
    resolution: int


class LabeledGrid(NamedTuple):
    """Per-pixel classification over a window.

    labels[i, j] is the pixel at window_axes(window)[1][i] (ascending
    imaginary part) and [0][j]: iteration of escape when >= 0, else one
    of the LABEL_* codes.
    """
    window: ComplexWindow
    labels: np.ndarray
    budget: int
    escape_im: float


class ComplexIterate(NamedTuple):
    value: complex
    escaped: bool


class DomainGridResult(NamedTuple):
    grid: LabeledGrid
    margin: float


class ExponentFit(NamedTuple):
    slope: float
    intercept: float
    offset: float
    residuals: np.ndarray


def _check_window(window):
    if not (window.width > 0.0 and window.height > 0.0):
        raise DomainError("window extents must be positive")
    if window.resolution < 2:
        raise DomainError("window resolution must be at least 2")


def window_axes(window):
    """Pixel-center coordinates (xs ascending, ys ascending)."""
    _check_window(window)
    res = window.resolution
    xs = window.center.real + ((np.arange(res) + 0.5) / res - 0.5) * window.width
    ys = window.center.imag + ((np.arange(res) + 0.5) / res - 0.5) * window.height
    return xs, ys


def _symmetric_axes(window):
    # exact index reflection i <-> res-1-i requires ys built as +-offsets
    if window.center.imag != 0.0:
        raise DomainError("domain grids need a window centered on the real axis")
    if window.resolution % 2 != 0:
        raise DomainError("domain grids need an even resolution")
    res = window.resolution
    xs = window.center.real + ((np.arange(res) + 0.5) / res - 0.5) * window.width
    half = (np.arange(res // 2) + 0.5) * (window.height / res)
    ys = np.concatenate((-half[::-1], half))
    return xs, ys


def _complex_eval(host):
    return getattr(host, "complex_eval", host)


def _complex_deriv(host):
    cd = getattr(host, "complex_deriv", None)
    if cd is not None:
        return cd
    return lambda z: host.deriv(z)


def complex_iterate(lift, q, p, z):
    """T^-p composed with the q-th iterate of the lift at a complex
    point.  Once |Im| exceeds OVERFLOW_IM it can only grow, so the
    remaining steps are skipped and the result is tagged escaped."""
    if q < 1:
        raise DomainError(f"iterate count must be >= 1, got {q}")
    ev = _complex_eval(lift)
    w = complex(z)
    escaped = False
    for _ in range(int(q)):
        if abs(w.imag) > OVERFLOW_IM:
            escaped = True
            break
        w = complex(ev(w))
    if abs(w.imag) > OVERFLOW_IM:
        escaped = True
    return ComplexIterate(w - int(p), escaped)


def gamma_curve(lift, k, sign, im_values):
    """Branch of the preimage of the real axis attached to the critical
    point at k, on the side of the asymptote Re = k + sign/4.

    Roots of Im(lift(x + iy)) are bracketed in (k, k + sign/2) for each
    requested height; rows are (y, x) with y ascending.  Beyond y of
    about 2.6 the defining-equation residual at the returned abscissa is
    limited by double spacing (the curve hugs its asymptote to below one
    ulp) while the asymptote gap stays exact to plotting accuracy.
    """
    ys = np.asarray(im_values, dtype=float)
    if ys.size == 0:
        raise DomainError("im_values must be nonempty")
    if not np.all(ys > 0.0):
        raise DomainError("im_values must be positive")
    if ys.size > 1 and not np.all(np.diff(ys) > 0.0):
        raise DomainError("im_values must be strictly ascending")
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    ev = _complex_eval(lift)
    out = np.empty((ys.size, 2))
    lo, hi = (float(k), k + 0.5) if sign == 1 else (k - 0.5, float(k))
    for i, y in enumerate(ys):
        f = lambda x: complex(ev(complex(x, y))).imag
        fa, fb = f(lo), f(hi)
        if fa == 0.0:
            root = lo
        elif fb == 0.0:
            root = hi
        elif fa * fb > 0.0:
            raise SolveError(
                f"no bracketed axis-preimage root at height {y} near {k}"
            )
        else:
            root = float(
                optimize.brentq(f, lo, hi, xtol=1e-15, rtol=8.9e-16, maxiter=200)
            )
        out[i, 0] = y
        out[i, 1] = root
    return out


def _arnold_step_grid(z, theta):
    return z + theta - np.sin(TWO_PI * z) / TWO_PI


def julia_grid(theta, window, budget, escape_im=ESCAPE_IM_DEFAULT):
    """Escape-time classification of the cylinder map at theta.

    A pixel is escaped at iteration k when |Im| first exceeds escape_im
    after k steps (k = 0 checks the pixel itself); otherwise it is
    bounded within the budget.
    """
    if budget < 1:
        raise DomainError(f"budget must be >= 1, got {budget}")
    if not escape_im > 0.0:
        raise DomainError(f"escape threshold must be positive, got {escape_im}")
    xs, ys = window_axes(window)
    z = (xs[None, :] + 1j * ys[:, None]).astype(complex)
    labels = np.full(z.shape, LABEL_BOUNDED, dtype=np.int32)
    active = np.ones(z.shape, dtype=bool)
    for it in range(int(budget) + 1):
        esc = active & (np.abs(z.imag) > escape_im)
        labels[esc] = it
        active &= ~esc
        if it == budget or not active.any():
            break
        z[active] = np.mod(z[active].real, 1.0) + 1j * z[active].imag
        z[active] = _arnold_step_grid(z[active], theta)
    return LabeledGrid(window, labels, int(budget), float(escape_im))


def _lift_orbit_grids(z, theta, q_lo, q_hi):
    """Iterate the lift on a complex grid; returns the q_lo-th and
    q_hi-th iterates (plane lift, no cylinder reduction).  Pixels whose
    imaginary part passes the overflow bound freeze in place; they are
    already outside every disc gate used downstream."""
    w = z.copy()
    w_lo = None
    for i in range(q_hi):
        if i == q_lo:
            w_lo = w.copy()
        live = np.abs(w.imag) <= OVERFLOW_IM
        w[live] = _arnold_step_grid(w[live], theta)
    if q_lo == q_hi:
        w_lo = w
    return w_lo, w


def _estimate_quotients(theta, depth):
    x = 0.0
    n = 8000
    lift = arnold_lift(theta)
    for _ in range(n):
        x = lift(x)
    return list(cf_from_real((x / n) % 1.0, depth).quotients)


def _flood_component(mask, seed_ix, seed_iy):
    """Connected component of mask at the seed (4-connectivity), with a
    short scan upward and sideways so an axis-adjacent seed lands."""
    lab, _count = ndimage.label(mask)
    res = mask.shape[0]
    tag = 0
    for dy in range(0, 7):
        for dx in (0, 1, -1, 2, -2, 3, -3):
            iy = min(seed_iy + dy, res - 1)
            ix = min(max(seed_ix + dx, 0), res - 1)
            if lab[iy, ix] != 0:
                tag = lab[iy, ix]
                break
        if tag != 0:
            break
    if tag == 0:
        raise DomainError(
            "marked boundary point is not adjacent to a positive-sign "
            "region on this grid"
        )
    return lab == tag


def _attached_component(signs, gate, seed_ix, name):
    """Connected piece of a gated sign region seeded just above the
    axis, reflected across it.

    The sign regions pinch at critical points on the axis through a
    negative wedge of width about 1.15*Im(z); the first two pixel rows
    cannot resolve it, so the flood runs from row axis+2 upward and
    the bottom rows are rebuilt by vertical adjacency only."""
    res = signs.shape[0]
    base = res // 2
    row_ok = np.zeros((res, 1), dtype=bool)
    row_ok[base + 2:, 0] = True
    gated = signs & gate
    comp = _flood_component(gated & row_ok, seed_ix, base + 2)
    for r in (base + 1, base):
        comp[r, :] = gated[r, :] & comp[r + 1, :]
    if (comp[-1, :].any() or comp[:, 0].any() or comp[:, -1].any()):
        raise SolveError(
            f"domain component {name} touches the window edge; "
            "enlarge the window or refine the resolution"
        )
    return comp | comp[::-1, :]


def domain_grid(theta, level, radius, window=None, resolution=800,
                quotients=None):
    """Holomorphic-pair domain grid at a renormalization level.

    The level-n pair is (eta, xi) = (T^-p' A^q', T^-p A^q) with p/q and
    p'/q' the level and next convergents of the rotation number.  The
    upper U component carries the sign region Im A^q > 0 attached to
    the marked point eta(0); V carries Im A^q' > 0 attached to xi(0).
    Each is cut to the respective pair element's preimage of the disc
    of the given radius, then reflected across the axis.  The margin is
    the labeled set's clearance inside that disc, as a fraction of the
    radius.
    """
    if quotients is None:
        quotients = _estimate_quotients(theta, level + 2)
    if len(quotients) < level + 2:
        raise DomainError(
            f"need at least {level + 2} quotients for level {level}"
        )
    if not radius > 0.0:
        raise DomainError("radius must be positive")
    cv = convergents(from_entries(quotients), level + 1)
    p_lo, q_lo = int(cv.p[level]), int(cv.q[level])
    p_hi, q_hi = int(cv.p[level + 1]), int(cv.q[level + 1])
    if window is None:
        window = ComplexWindow(0.0 + 0.0j, 2.6 * radius, 2.6 * radius,
                               int(resolution))
    xs, ys = _symmetric_axes(window)
    res = window.resolution
    z = xs[None, :] + 1j * ys[:, None]
    w_lo, w_hi = _lift_orbit_grids(z, theta, q_lo, q_hi)
    eta_vals = w_hi - p_hi
    xi_vals = w_lo - p_lo

    lift = arnold_lift(theta)
    mark_u = float(lift.iterate(0.0, q_hi)) - p_hi
    mark_v = float(lift.iterate(0.0, q_lo)) - p_lo

    masks = {}
    for name, signs, mark, gate in (
        ("U", w_lo.imag > 0.0, mark_u, np.abs(eta_vals) <= radius),
        ("V", w_hi.imag > 0.0, mark_v, np.abs(xi_vals) <= radius),
    ):
        if not xs[0] <= mark <= xs[-1]:
            raise DomainError(
                f"marked boundary point {mark:.6g} lies outside the window"
            )
        seed_ix = int(np.argmin(np.abs(xs - mark)))
        masks[name] = _attached_component(signs, gate, seed_ix, name)

    labels = np.full((res, res), LABEL_OUTSIDE, dtype=np.int32)
    labels[masks["U"]] = LABEL_DOMAIN_U
    labels[masks["V"]] = LABEL_DOMAIN_V
    labels[masks["U"] & masks["V"]] = LABEL_DOMAIN_BOTH
    any_mask = masks["U"] | masks["V"]
    if not any_mask.any():
        raise SolveError("no labeled pixels inside the disc at this radius")
    reach = float(np.abs(z[any_mask]).max())
    margin = (radius - reach) / radius
    return DomainGridResult(
        LabeledGrid(window, labels, 0, 0.0), margin
    )


def hyperbolic_norm(host, z):
    """Derivative norm at z in the hyperbolic metric of the plane with
    the real axis removed (density 1/|Im|; any constant cancels)."""
    w = complex(z)
    if w.imag == 0.0:
        raise DomainError("hyperbolic norm needs an off-axis point")
    fz = complex(_complex_eval(host)(w))
    if fz.imag == 0.0:
        raise DomainError("image landed on the real axis")
    d = complex(_complex_deriv(host)(w))
    return abs(d) * abs(w.imag) / abs(fz.imag)


def fit_scaling_exponent(t, y):
    """Fit the shifted power law y + offset = scale * t**slope by least
    squares on log y.

    Minimizing residuals of log(y + d) directly is ill posed: growing d
    shrinks every such residual toward zero, so the objective rewards
    arbitrarily large offsets on any data.  Writing the same model as
    log y - log(scale * t**slope - d) keeps the error on the measured
    response, and the offset only absorbs genuine curvature.  A
    positive offset is capped at half the smallest response so the
    model stays positive; a negative offset (an additive floor) is
    capped at the largest response.  The offset is kept only when it
    improves the fit significantly against the nested pure power law
    (F-test at the 1% level); otherwise the pure power law is returned
    with offset 0.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size != y.size or t.size < 8:
        raise DomainError("need at least 8 paired samples")
    if not (np.all(t > 0.0) and np.all(y > 0.0)):
        raise DomainError("samples must have t > 0 and y > 0")
    lt = np.log(t)
    ly = np.log(y)
    ab = np.vstack([lt, np.ones_like(lt)]).T
    (s0, c0), rss0, _, _ = np.linalg.lstsq(ab, ly, rcond=None)
    rss0 = float(rss0[0]) if rss0.size else float(
        np.sum((ly - ab @ [s0, c0]) ** 2))
    d_max = 0.5 * float(np.min(y))

    def resid(params):
        s, c, d = params
        model = np.exp(c) * t**s - d
        return ly - np.log(np.maximum(model, 1e-300))

    sol = optimize.least_squares(
        resid, x0=[float(s0), float(c0), 0.0],
        bounds=([-10.0, -60.0, -float(np.max(y))], [10.0, 60.0, d_max]),
    )
    rss1 = float(2.0 * sol.cost)
    dof = t.size - 3
    fstat = (rss0 - rss1) / max(rss1 / dof, 1e-300)
    if fstat > stats.f.ppf(0.99, 1, dof):
        return ExponentFit(float(sol.x[0]), float(sol.x[1]),
                           float(sol.x[2]), resid(sol.x))
    base = ly - ab @ [s0, c0]
    return ExponentFit(float(s0), float(c0), 0.0, base)


def _nearest_return_fold(lift, steps, window):
    """Distance from 0 to the nearest other critical point of the
    composed lift, searched on [-window, window].

    A point is critical for the composition when some partial orbit
    lands on a critical point of the lift, i.e. on an integer; each
    partial iterate is strictly increasing, so the integer crossings
    bracket cleanly."""
    best = window
    for k in range(1, steps):
        lo = float(lift.iterate(-window, k))
        hi = float(lift.iterate(window, k))
        for m in range(int(np.ceil(lo)), int(np.floor(hi)) + 1):
            root = optimize.brentq(
                lambda x: float(lift.iterate(x, k)) - m, -window, window
            )
            if 1e-12 < abs(root) < best:
                best = abs(root)
    return best


def cubic_estimate_fit(theta, level, sample_count, quotients=None,
                       radius=None, resolution=600, seed=0):
    """Scaling exponent of the upper return map at the critical point.

    Samples the labeled domain of the level's upper return at relative
    source distances t = |z|/|I| in [0.5, 5] capped at the fold scale,
    evaluates the return in the frame centered on the image of the
    critical point and scaled by the image of the base interval, and
    fits log(y + offset) against log t.  The fold scale is the
    distance from the critical point to the return's nearest other
    critical point: there the response derivative vanishes again and
    the local cubic regime gives way to the fold, so samples beyond
    carry the fold geometry rather than the local exponent.
    """
    if sample_count < 8:
        raise DomainError("sample_count must be at least 8")
    if quotients is None:
        quotients = _estimate_quotients(theta, level + 2)
    if len(quotients) < level + 2:
        raise DomainError(
            f"need at least {level + 2} quotients for level {level}"
        )
    cv = convergents(from_entries(quotients), level + 1)
    p_lo, q_lo = int(cv.p[level]), int(cv.q[level])
    q_hi = int(cv.q[level + 1])
    lift = arnold_lift(theta)
    x_end = float(lift.iterate(0.0, q_lo)) - p_lo
    seg = abs(x_end)
    if not seg > 0.0:
        raise DomainError("degenerate renormalization interval")
    if radius is None:
        radius = 2.5 * seg

    fold = _nearest_return_fold(lift, q_hi, 4.0 * seg)
    t_cap = min(5.0, 0.8 * fold / seg)
    if t_cap <= 0.55:
        raise SolveError(
            "fold scale leaves no sample window at this level"
        )

    dg = domain_grid(theta, level, radius, resolution=resolution,
                     quotients=quotients)
    xs, ys = _symmetric_axes(dg.grid.window)
    z = xs[None, :] + 1j * ys[:, None]
    # only the eta-side labels gate the upper return's image
    labeled = ((dg.grid.labels == LABEL_DOMAIN_U)
               | (dg.grid.labels == LABEL_DOMAIN_BOTH))
    t_all = np.abs(z) / seg
    pick = labeled & (t_all >= 0.5) & (t_all <= t_cap)
    cand = z[pick]
    if cand.size < sample_count:
        raise SolveError(
            f"only {cand.size} in-range domain samples available; "
            "need sample_count"
        )
    rng = np.random.default_rng(seed)
    # grid pixels pile up at large radius; 1/t^2 weights make the draw
    # close to uniform in log t, the usual design for exponent fits
    t_cand = np.abs(cand) / seg
    weights = t_cand**-2.0
    weights /= weights.sum()
    zs = rng.choice(cand, size=sample_count, replace=False, p=weights)
    w = zs.copy()
    for _ in range(q_hi):
        live = np.abs(w.imag) <= OVERFLOW_IM
        w[live] = _arnold_step_grid(w[live], theta)
    center = float(lift.iterate(0.0, q_hi))
    img = abs(float(lift.iterate(x_end, q_hi)) - center)
    y = np.abs(w - center) / img
    return fit_scaling_exponent(np.abs(zs) / seg, y)


# -- serialization --


def _escape_color(k):
    h = (k % _HUE_CYCLE) / _HUE_CYCLE
    r, g, b = colorsys.hsv_to_rgb(h, 0.85, 0.95)
    return int(r * 255), int(g * 255), int(b * 255)


def grid_ppm_bytes(grid):
    """Binary P6 image of a labeled grid, top row = largest Im."""
    labels = grid.labels
    res_y, res_x = labels.shape
    fixed = {
        LABEL_BOUNDED: (0, 0, 0),
        LABEL_DOMAIN_U: _U_COLOR,
        LABEL_DOMAIN_V: _V_COLOR,
        LABEL_DOMAIN_BOTH: _BOTH_COLOR,
        LABEL_OUTSIDE: _OUTSIDE_COLOR,
    }
    img = np.empty((res_y, res_x, 3), dtype=np.uint8)
    for code, color in fixed.items():
        img[labels == code] = color
    esc = labels >= 0
    if esc.any():
        ks = np.unique(labels[esc])
        for k in ks:
            img[labels == k] = _escape_color(int(k))
    header = f"P6\n{res_x} {res_y}\n255\n".encode("ascii")
    return header + img[::-1, :, :].tobytes()


def polyline_csv_text(vertices, columns=("im", "re")):
    """CSV text for an (n, 2) vertex array, 17 significant digits."""
    arr = np.asarray(vertices, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != len(columns):
        raise DomainError("vertex array shape does not match the columns")
    lines = [",".join(columns)]
    for row in arr:
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"
