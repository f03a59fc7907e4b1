import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from circlelab.cfrac import convergents, from_entries
from circlelab.complexplane import (
    ComplexWindow,
    LABEL_BOUNDED,
    LABEL_DOMAIN_BOTH,
    LABEL_DOMAIN_U,
    LABEL_DOMAIN_V,
    LABEL_OUTSIDE,
    complex_iterate,
    cubic_estimate_fit,
    domain_grid,
    fit_scaling_exponent,
    gamma_curve,
    grid_ppm_bytes,
    hyperbolic_norm,
    julia_grid,
    polyline_csv_text,
    window_axes,
)
from circlelab.errors import DomainError, SolveError
from circlelab.lifts import arnold_lift, rotation_lift, solve_parameter
from circlelab.pairs import IterateExpr, RawExpr

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@pytest.fixture(scope="module")
def golden_theta():
    return solve_parameter(arnold_lift, from_entries([1] * 40), 1e-9)


@pytest.fixture(scope="module")
def golden_lift(golden_theta):
    return arnold_lift(golden_theta)


@pytest.fixture(scope="module")
def domain4(golden_theta):
    # level-4 pair domain, gate at four Fibonacci-interval lengths
    lift = arnold_lift(golden_theta)
    seg = abs(float(lift.iterate(0.0, 5)) - 3)
    return domain_grid(golden_theta, 4, 4.0 * seg, resolution=400,
                       quotients=[1] * 10), 4.0 * seg


# -- complex_iterate --


def test_complex_iterate_matches_real_orbit(golden_lift):
    for q, p, x in ((5, 3, 0.0), (13, 8, 0.21), (8, 5, -0.4)):
        ci = complex_iterate(golden_lift, q, p, complex(x, 0.0))
        assert not ci.escaped
        assert ci.value.imag == 0.0
        assert ci.value.real == pytest.approx(
            float(golden_lift.iterate(x, q)) - p, abs=1e-12)


def test_complex_iterate_conjugation_symmetry(golden_lift):
    for z in (0.3 + 0.2j, -0.1 + 0.05j, 0.6 + 0.8j):
        a = complex_iterate(golden_lift, 8, 5, z).value
        b = complex_iterate(golden_lift, 8, 5, z.conjugate()).value
        assert abs(a - b.conjugate()) <= 1e-12 * max(1.0, abs(a))


def test_complex_iterate_flags_overflow(golden_lift):
    ci = complex_iterate(golden_lift, 3, 0, 0.1 + 80.0j)
    assert ci.escaped
    assert np.isfinite(ci.value.real) and np.isfinite(ci.value.imag)


def test_complex_iterate_rejects_bad_count(golden_lift):
    with pytest.raises(DomainError):
        complex_iterate(golden_lift, 0, 0, 0.1 + 0.1j)


# -- gamma_curve --


def test_gamma_residuals_below_tolerance(golden_lift):
    ys = np.linspace(0.05, 2.5, 60)
    for k, sign in ((0, 1), (0, -1), (3, 1), (-2, -1)):
        verts = gamma_curve(golden_lift, k, sign, ys)
        for y, x in verts:
            val = golden_lift.complex_eval(complex(x, y))
            assert abs(val.imag) < 1e-9


def test_gamma_vertices_ordered_and_in_strip(golden_lift):
    ys = np.linspace(0.1, 2.0, 40)
    verts = gamma_curve(golden_lift, 1, 1, ys)
    assert np.all(np.diff(verts[:, 0]) > 0.0)
    assert np.all(verts[:, 1] > 1.0) and np.all(verts[:, 1] < 1.5)


def test_gamma_asymptote_offset(golden_lift):
    # at height 3 each branch hugs Re = k +- 1/4
    for k, sign in ((0, 1), (0, -1), (2, 1)):
        verts = gamma_curve(golden_lift, k, sign, np.array([3.0]))
        assert abs(verts[0, 1] - (k + sign * 0.25)) < 5e-3


def test_gamma_validation(golden_lift):
    with pytest.raises(DomainError):
        gamma_curve(golden_lift, 0, 1, np.array([]))
    with pytest.raises(DomainError):
        gamma_curve(golden_lift, 0, 1, np.array([-0.5, 1.0]))
    with pytest.raises(DomainError):
        gamma_curve(golden_lift, 0, 1, np.array([1.0, 0.5]))
    with pytest.raises(DomainError):
        gamma_curve(golden_lift, 0, 2, np.array([1.0]))


# -- julia_grid --


def test_julia_grid_deterministic(golden_theta):
    win = ComplexWindow(0.5 + 0.0j, 1.0, 2.0, 160)
    g1 = julia_grid(golden_theta, win, 40)
    g2 = julia_grid(golden_theta, win, 40)
    assert np.array_equal(g1.labels, g2.labels)
    assert grid_ppm_bytes(g1) == grid_ppm_bytes(g2)


def test_julia_real_axis_row_is_bounded(golden_theta):
    win = ComplexWindow(0.5 + 0.0j, 1.0, 0.5, 81)
    g = julia_grid(golden_theta, win, 60)
    mid = 40  # ys[40] = 0 for odd resolution centered on the axis
    xs, ys = window_axes(win)
    assert ys[mid] == pytest.approx(0.0, abs=1e-15)
    assert np.all(g.labels[mid, :] == LABEL_BOUNDED)


def test_julia_far_pixels_escape_immediately(golden_theta):
    win = ComplexWindow(0.5 + 6.0j, 1.0, 1.0, 16)
    g = julia_grid(golden_theta, win, 10)
    assert np.all(g.labels == 0)


def test_julia_labels_stable_under_resolution_doubling(golden_theta):
    win = ComplexWindow(0.5 + 0.0j, 1.2, 2.4, 120)
    coarse = julia_grid(golden_theta, win, 30).labels
    fine = julia_grid(
        golden_theta, ComplexWindow(win.center, win.width, win.height, 240),
        30).labels
    agree = np.zeros_like(coarse, dtype=bool)
    for dy in (0, 1):
        for dx in (0, 1):
            agree |= fine[dy::2, dx::2] == coarse
    edge = np.zeros_like(coarse, dtype=bool)
    edge[:, 1:] |= coarse[:, 1:] != coarse[:, :-1]
    edge[:, :-1] |= coarse[:, 1:] != coarse[:, :-1]
    edge[1:, :] |= coarse[1:, :] != coarse[:-1, :]
    edge[:-1, :] |= coarse[1:, :] != coarse[:-1, :]
    near_edge = ndimage.binary_dilation(edge, iterations=2)
    assert np.all(agree | near_edge)


def test_julia_validation(golden_theta):
    win = ComplexWindow(0.0 + 0.0j, 1.0, 1.0, 8)
    with pytest.raises(DomainError):
        julia_grid(golden_theta, win, 0)
    with pytest.raises(DomainError):
        julia_grid(golden_theta, win, 10, escape_im=0.0)
    with pytest.raises(DomainError):
        julia_grid(golden_theta, ComplexWindow(0.0 + 0.0j, -1.0, 1.0, 8), 10)


# -- domain_grid --


def test_domain_margin_positive_and_monotone(golden_theta, domain4):
    dg, r0 = domain4
    assert dg.margin > 0.0
    bigger = domain_grid(golden_theta, 4, 2.0 * r0, resolution=400,
                         quotients=[1] * 10)
    assert bigger.margin > dg.margin


def test_domain_labels_conjugation_symmetric(domain4):
    labels = domain4[0].grid.labels
    assert np.array_equal(labels, labels[::-1, :])


def test_domain_label_codes_consistent(domain4):
    labels = domain4[0].grid.labels
    used = set(np.unique(labels))
    assert used <= {LABEL_DOMAIN_U, LABEL_DOMAIN_V, LABEL_DOMAIN_BOTH,
                    LABEL_OUTSIDE}
    assert LABEL_DOMAIN_U in used and LABEL_DOMAIN_V in used
    # the two half components sit on opposite sides of 0 at this gate
    assert LABEL_DOMAIN_BOTH not in used


def test_domain_components_contain_their_marks(golden_theta, domain4):
    dg, _r0 = domain4
    lift = arnold_lift(golden_theta)
    mark_u = float(lift.iterate(0.0, 8)) - 5
    mark_v = float(lift.iterate(0.0, 5)) - 3
    xs = np.linspace(dg.grid.window.center.real - dg.grid.window.width / 2,
                     dg.grid.window.center.real + dg.grid.window.width / 2,
                     dg.grid.window.resolution)
    res = dg.grid.window.resolution
    iu = int(np.argmin(np.abs(xs - mark_u)))
    iv = int(np.argmin(np.abs(xs - mark_v)))
    row = res // 2  # first row above the axis
    assert dg.grid.labels[row, iu] in (LABEL_DOMAIN_U, LABEL_DOMAIN_BOTH)
    assert dg.grid.labels[row, iv] in (LABEL_DOMAIN_V, LABEL_DOMAIN_BOTH)


def test_domain_rejects_mark_outside_window(golden_theta):
    win = ComplexWindow(0.5 + 0.0j, 0.2, 0.2, 64)
    with pytest.raises(DomainError):
        domain_grid(golden_theta, 4, 0.5, window=win, quotients=[1] * 10)


def test_domain_rejects_component_touching_edge(golden_theta):
    win = ComplexWindow(0.0 + 0.0j, 0.75, 0.1, 150)
    with pytest.raises(SolveError):
        domain_grid(golden_theta, 4, 0.7, window=win, quotients=[1] * 10)


def test_domain_validation(golden_theta):
    with pytest.raises(DomainError):
        domain_grid(golden_theta, 4, -1.0, quotients=[1] * 10)
    with pytest.raises(DomainError):
        domain_grid(golden_theta, 4, 0.7, quotients=[1] * 3)
    with pytest.raises(DomainError):
        domain_grid(golden_theta, 4, 0.7, resolution=401,
                    quotients=[1] * 10)
    off = ComplexWindow(0.0 + 0.1j, 1.0, 1.0, 64)
    with pytest.raises(DomainError):
        domain_grid(golden_theta, 4, 0.7, window=off, quotients=[1] * 10)


# -- hyperbolic_norm --


def test_norm_identity_is_one():
    ident = RawExpr(lambda x: x, lambda x: 1.0, "id")
    assert hyperbolic_norm(ident, 0.3 + 0.4j) == pytest.approx(1.0)


def test_norm_of_scaling_is_one():
    # z -> 2z is an isometry of the slit-plane metric
    twice = RawExpr(lambda x: 2.0 * x, lambda x: 2.0, "double")
    assert hyperbolic_norm(twice, -0.7 + 0.25j) == pytest.approx(1.0)


def test_norm_of_square_map_known_value():
    sq = RawExpr(lambda x: x * x, lambda x: 2.0 * x, "square")
    z = 0.5 + 0.5j
    # |2z| * Im(z) / Im(z^2) = sqrt(2) * 0.5 / 0.5
    assert hyperbolic_norm(sq, z) == pytest.approx(math.sqrt(2.0), rel=1e-12)


def test_norm_chain_rule_along_orbit(golden_lift):
    elem = IterateExpr(golden_lift, 8, 5)
    for z in (0.05 + 0.08j, -0.1 + 0.03j, 0.12 - 0.06j):
        whole = hyperbolic_norm(elem, z)
        prod = 1.0
        w = complex(z)
        for _ in range(8):
            prod *= hyperbolic_norm(golden_lift, w)
            w = golden_lift.complex_eval(w)
        assert whole == pytest.approx(prod, rel=1e-10)


def test_norm_rejects_axis_points(golden_lift):
    with pytest.raises(DomainError):
        hyperbolic_norm(golden_lift, 0.25 + 0.0j)
    drop = RawExpr(lambda x: x - 0.3j, lambda x: 1.0, "drop")
    with pytest.raises(DomainError):
        hyperbolic_norm(drop, 0.1 + 0.3j)


def test_forward_pair_norms_exceed_one(golden_theta, domain4):
    # the pair elements expand the slit-plane metric on their domains
    dg, _r0 = domain4
    lift = arnold_lift(golden_theta)
    eta = IterateExpr(lift, 8, 5)
    xi = IterateExpr(lift, 5, 3)
    win = dg.grid.window
    res = win.resolution
    xs = win.center.real + ((np.arange(res) + 0.5) / res - 0.5) * win.width
    half = (np.arange(res // 2) + 0.5) * (win.height / res)
    ys = np.concatenate((-half[::-1], half))
    z = xs[None, :] + 1j * ys[:, None]
    rng = np.random.default_rng(5)
    for elem, codes in (
        (eta, (LABEL_DOMAIN_U, LABEL_DOMAIN_BOTH)),
        (xi, (LABEL_DOMAIN_V, LABEL_DOMAIN_BOTH)),
    ):
        pts = z[np.isin(dg.grid.labels, codes) & (np.abs(z.imag) > 1e-6)]
        sample = rng.choice(pts, size=120, replace=False)
        norms = np.array([hyperbolic_norm(elem, p) for p in sample])
        assert np.all(norms > 1.0)


# -- fit_scaling_exponent --


def test_fit_recovers_linear_control():
    t = np.linspace(0.3, 4.0, 64)
    fit = fit_scaling_exponent(t, 0.37 * t)
    assert fit.slope == pytest.approx(1.0, abs=1e-6)
    assert fit.offset == 0.0


def test_fit_recovers_cubic_control():
    t = np.linspace(0.3, 4.0, 64)
    fit = fit_scaling_exponent(t, 2.0 * t**3)
    assert fit.slope == pytest.approx(3.0, abs=1e-6)
    assert fit.offset == 0.0


def test_fit_recovers_additive_floor():
    t = np.linspace(0.3, 4.0, 64)
    fit = fit_scaling_exponent(t, 2.0 * t**3 + 0.4)
    assert fit.slope == pytest.approx(3.0, abs=1e-3)
    assert fit.offset == pytest.approx(-0.4, abs=1e-3)


def test_fit_drops_offset_on_noisy_power_law():
    rng = np.random.default_rng(11)
    t = rng.uniform(0.3, 4.0, 300)
    y = 2.0 * t**3 * np.exp(rng.normal(0.0, 0.2, t.size))
    fit = fit_scaling_exponent(t, y)
    assert fit.slope == pytest.approx(3.0, abs=0.1)
    assert fit.offset == 0.0


@settings(max_examples=25, deadline=None)
@given(
    slope=st.floats(min_value=-2.0, max_value=4.0),
    scale=st.floats(min_value=0.1, max_value=10.0),
)
def test_fit_recovers_exact_power_laws(slope, scale):
    t = np.geomspace(0.2, 5.0, 40)
    fit = fit_scaling_exponent(t, scale * t**slope)
    assert fit.slope == pytest.approx(slope, abs=1e-6)


def test_fit_validation():
    t = np.linspace(1.0, 2.0, 16)
    with pytest.raises(DomainError):
        fit_scaling_exponent(t, t[:8])
    with pytest.raises(DomainError):
        fit_scaling_exponent(t[:4], t[:4])
    with pytest.raises(DomainError):
        fit_scaling_exponent(t - 1.0, t)
    with pytest.raises(DomainError):
        fit_scaling_exponent(t, 0.0 * t)


# -- cubic_estimate_fit --


def test_cubic_slope_at_golden_level_six(golden_theta):
    fit = cubic_estimate_fit(golden_theta, 6, 200, quotients=[1] * 12,
                             resolution=400)
    assert 2.7 <= fit.slope <= 3.3


def test_cubic_fit_deterministic_per_seed(golden_theta):
    a = cubic_estimate_fit(golden_theta, 6, 100, quotients=[1] * 12,
                           resolution=400, seed=3)
    b = cubic_estimate_fit(golden_theta, 6, 100, quotients=[1] * 12,
                           resolution=400, seed=3)
    assert a.slope == b.slope and a.offset == b.offset


def test_rotation_return_control_slope_is_one(golden_theta):
    # rigid rotation through the same response pipeline: y = t exactly
    rot = rotation_lift(GOLDEN)
    seg = abs(float(rot.iterate(0.0, 13)) - 8)
    rng = np.random.default_rng(2)
    t = rng.uniform(0.5, 4.0, 64)
    zs = t * seg * np.exp(1j * rng.uniform(0.2, math.pi - 0.2, 64))
    base = complex_iterate(rot, 13, 8, 0.0 + 0.0j).value
    ys = np.array([abs(complex_iterate(rot, 13, 8, z).value - base)
                   for z in zs]) / seg
    fit = fit_scaling_exponent(t, ys)
    assert fit.slope == pytest.approx(1.0, abs=1e-8)


def test_cubic_fit_validation(golden_theta):
    with pytest.raises(DomainError):
        cubic_estimate_fit(golden_theta, 6, 4, quotients=[1] * 12)
    with pytest.raises(DomainError):
        cubic_estimate_fit(golden_theta, 6, 100, quotients=[1] * 4)


# -- serialization --


def test_ppm_header_and_size(golden_theta):
    win = ComplexWindow(0.5 + 0.0j, 1.0, 1.0, 32)
    g = julia_grid(golden_theta, win, 12)
    raw = grid_ppm_bytes(g)
    header = f"P6\n32 32\n255\n".encode("ascii")
    assert raw.startswith(header)
    assert len(raw) == len(header) + 32 * 32 * 3


def test_ppm_domain_colors_distinct(domain4):
    raw = grid_ppm_bytes(domain4[0].grid)
    body = raw.split(b"\n", 3)[3]
    pixels = {tuple(body[i:i + 3]) for i in range(0, len(body), 3)}
    # outside plus at least the three domain colors
    assert len(pixels) >= 4


def test_csv_round_trip_precision():
    verts = np.array([[0.1, 1.0 / 3.0], [2.5, math.pi]])
    text = polyline_csv_text(verts)
    lines = text.split("\n")
    assert lines[0] == "im,re"
    assert text.endswith("\n")
    parsed = [[float(v) for v in ln.split(",")] for ln in lines[1:3]]
    assert parsed[0][1] == 1.0 / 3.0 and parsed[1][1] == math.pi


def test_csv_shape_validation():
    with pytest.raises(DomainError):
        polyline_csv_text(np.zeros((3, 3)))


def test_window_axes_validation():
    with pytest.raises(DomainError):
        window_axes(ComplexWindow(0.0 + 0.0j, 0.0, 1.0, 8))
    with pytest.raises(DomainError):
        window_axes(ComplexWindow(0.0 + 0.0j, 1.0, 1.0, 1))
    xs, ys = window_axes(ComplexWindow(0.25 + 0.5j, 1.0, 2.0, 10))
    assert xs[0] == pytest.approx(0.25 - 0.45)
    assert ys[-1] == pytest.approx(0.5 + 0.9)
    assert np.all(np.diff(xs) > 0) and np.all(np.diff(ys) > 0)
