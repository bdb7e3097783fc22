import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ellipe

from cmcsolve import Ball, Ellipse
from cmcsolve.domains import SublevelDomain, domain_from_dict
from cmcsolve.errors import DegenerateSublevel, NotOnBoundary


class TestBallDefining:
    def test_center_values(self):
        ball = Ball((0, 0), 1.0)
        h, dh, d2h = ball.defining(np.zeros(2))
        assert h == pytest.approx(0.5, abs=1e-15)
        assert np.allclose(dh, 0.0)
        assert np.allclose(d2h, -np.eye(2))

    def test_boundary_point(self):
        ball = Ball((0, 0), 1.0)
        h, dh, _ = ball.defining(np.array([1.0, 0.0]))
        assert abs(h) < 1e-15
        assert np.allclose(dh, [-1.0, 0.0])
        assert np.linalg.norm(dh) == pytest.approx(1.0, abs=1e-12)

    def test_boundary_gradient_unit(self):
        ball = Ball((0.3, -0.2), 0.7)
        phi = np.linspace(0, 2 * np.pi, 40, endpoint=False)
        x = ball.peak + 0.7 * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        _, dh, _ = ball.defining(x)
        assert np.allclose(np.linalg.norm(dh, axis=-1), 1.0, atol=1e-12)

    def test_sign_pattern(self):
        ball = Ball((0, 0), 1.0)
        h_in, _, _ = ball.defining(np.array([0.5, 0.3]))
        h_out, _, _ = ball.defining(np.array([1.5, 0.3]))
        assert h_in > 0 and h_out < 0


class TestEllipseDefining:
    def test_boundary_point_and_direction(self):
        ell = Ellipse((0, 0), (1.0, 0.8))
        h, dh, _ = ell.defining(np.array([1.0, 0.0]))
        assert abs(h) < 1e-14
        n = dh / np.linalg.norm(dh)
        assert np.allclose(n, [-1.0, 0.0], atol=1e-14)

    def test_gradient_band(self):
        ell = Ellipse((0, 0), (1.0, 0.8))
        delta = ell.grad_bound_delta
        assert delta > 0.5
        t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        x = np.stack([np.cos(t), 0.8 * np.sin(t)], axis=-1)
        _, dh, _ = ell.defining(x)
        g = np.linalg.norm(dh, axis=-1)
        assert np.all(g >= delta - 1e-12)
        assert np.all(g <= 1.0 / delta + 1e-12)

    def test_concavity_constant(self):
        ell = Ellipse((0, 0), (1.0, 0.8))
        rng = np.random.default_rng(0)
        pts = rng.uniform(-0.7, 0.7, (100, 2))
        _, _, d2h = ell.defining(pts)
        eigs = np.linalg.eigvalsh(d2h)
        assert np.all(eigs <= -ell.theta + 1e-12)


class TestInwardNormal:
    @pytest.mark.parametrize("x, expected", [
        ((1.0, 0.0), (-1.0, 0.0)),
        ((0.0, -1.0), (0.0, 1.0)),
    ])
    def test_ball(self, x, expected):
        assert np.allclose(Ball((0, 0), 1.0).inward_normal(np.array(x)),
                           expected, atol=1e-12)

    def test_ellipse_minor_axis(self):
        ell = Ellipse((0, 0), (1.0, 0.8))
        nu = ell.inward_normal(np.array([0.0, 0.8]))
        assert np.allclose(nu, [0.0, -1.0], atol=1e-12)

    def test_not_on_boundary(self):
        with pytest.raises(NotOnBoundary):
            Ball((0, 0), 1.0).inward_normal(np.array([0.5, 0.0]))


class TestSublevel:
    def test_identity_at_one(self):
        ball = Ball((0, 0), 1.0)
        assert ball.sublevel(1.0) is ball

    def test_ball_half_level(self):
        # level = h_max/2 = 0.25 at t = 0.5; the set {h >= 0.25} is the
        # ball of radius 1/sqrt(2) (solve (1 - r^2)/2 = 0.25)
        sub = Ball((0, 0), 1.0).sublevel(0.5)
        r = sub.boundary_radius(np.linspace(0, 2 * np.pi, 16, endpoint=False))
        assert np.allclose(r, 1.0 / np.sqrt(2.0), atol=1e-12)

    def test_area_increasing_in_t(self):
        ell = Ellipse((0, 0), (1.0, 0.8))
        areas = [ell.sublevel(t).measures()[0] for t in (0.3, 0.5, 0.7, 0.9)]
        assert all(a < b for a, b in zip(areas, areas[1:]))

    def test_degenerate(self):
        with pytest.raises(DegenerateSublevel):
            Ball((0, 0), 1.0).sublevel(1e-5)

    def test_nested_flattening(self):
        ball = Ball((0, 0), 1.0)
        sub2 = ball.sublevel(0.6).sublevel(0.5)
        assert isinstance(sub2, SublevelDomain)
        assert sub2.base is ball

    def test_level_curve_shape_near_peak(self):
        # second-order Taylor at the peak: the level curves approach the
        # ellipse of the defining-function Hessian, whose axis ratio here
        # equals a/b (the Hessian is -s diag(1/a^2, 1/b^2)); they do not
        # become round for this analytic defining function
        ell = Ellipse((0, 0), (1.0, 0.8))
        sub = ell.sublevel(0.05)
        phi = np.linspace(0, 2 * np.pi, 128, endpoint=False)
        r = np.atleast_1d(sub.boundary_radius(phi))
        ratio = np.max(r) / np.min(r)
        assert ratio == pytest.approx(1.0 / 0.8, rel=1e-3)


class TestMeasures:
    @pytest.mark.parametrize("radius, area, perim", [
        (1.0, np.pi, 2 * np.pi),
        (0.5, np.pi / 4, np.pi),
    ])
    def test_ball(self, radius, area, perim):
        a, p = Ball((0, 0), radius).measures()
        assert a == pytest.approx(area, rel=1e-14)
        assert p == pytest.approx(perim, rel=1e-14)

    def test_ellipse_against_elliptic_integral(self):
        a, b = 1.0, 0.8
        area, perim = Ellipse((0, 0), (a, b)).measures()
        assert area == pytest.approx(np.pi * a * b, rel=1e-14)
        exact = 4 * a * ellipe(1 - (b / a) ** 2)
        assert perim == pytest.approx(exact, rel=1e-9)
        assert perim == pytest.approx(5.672333577794897, rel=1e-9)


class TestRoundTrip:
    @pytest.mark.parametrize("dom", [
        Ball((0.1, -0.2), 0.8),
        Ellipse((0, 0.3), (1.2, 0.5)),
        Ball((0, 0), 1.0).sublevel(0.4),
    ])
    def test_dict_round_trip(self, dom):
        back = domain_from_dict(dom.to_dict())
        assert back == dom


@settings(max_examples=50, deadline=None)
@given(cx=st.floats(-1, 1), cy=st.floats(-1, 1),
       a=st.floats(0.3, 2.0), b=st.floats(0.3, 2.0))
def test_ellipse_properties(cx, cy, a, b):
    ell = Ellipse((cx, cy), (a, b))
    h_peak, dh_peak, _ = ell.defining(ell.peak)
    assert h_peak == pytest.approx(ell.h_max, rel=1e-12)
    assert np.allclose(dh_peak, 0.0, atol=1e-12)
    phi = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    r = np.atleast_1d(ell.boundary_radius(phi))
    assert np.all(r > 0)
    x = ell.peak + r[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    h, _, _ = ell.defining(x)
    assert np.max(np.abs(h)) < 1e-10 * ell.diameter()
