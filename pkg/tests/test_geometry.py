import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohortgeom.errors import DegenerateCurveError, NumericError, StructureError
from cohortgeom.geometry import (curvature_field, curvature_vector, discrete_parameters,
                                 estimate_normal, grid_curvature, neighborhood_curves,
                                 normal_curvature, tangent_endpoint, tangent_mid,
                                 write_field_csv)

from .oracles import brute_force_normal
from .synth import make_surface


def paraboloid_grid(h, half_width=1.0):
    n = int(round(half_width / h))
    t = np.arange(-n, n + 1) * h
    return t, t.copy(), (t[:, None] ** 2 + t[None, :] ** 2) / 2.0, n


def paraboloid_nc_exact(t, x, direction):
    """Normal curvature of z = (t^2 + x^2)/2 at (t, x) along a parameter-plane
    direction: II(w,w)/I(w,w) with f_t=t, f_x=x, f_tt=f_xx=1, f_tx=0."""
    a, b = direction
    w = math.sqrt(1 + t * t + x * x)
    return ((a * a + b * b) / w) / (a * a + b * b + (t * a + x * b) ** 2)


class TestCurvePrimitives:
    def test_parameters(self):
        s = discrete_parameters(([0, 0, 0], [1, 0, 0], [3, 0, 0]))
        assert s[0] == 0 and s[2] == 1
        assert s[1] == pytest.approx(1 / 3, abs=1e-15)
        assert discrete_parameters(([0, 0, 0], [1, 1, 0], [2, 2, 0]))[1] == pytest.approx(0.5)

    def test_degenerate_curve(self):
        with pytest.raises(DegenerateCurveError):
            discrete_parameters(([0, 0, 0], [0, 0, 0], [1, 0, 0]))
        with pytest.raises(DegenerateCurveError):
            curvature_vector(([0, 0, 0], [1, 0, 0], [1, 0, 0]))

    def test_tangent_collinear(self):
        t = tangent_mid(([0, 0, 0], [1, 1, 0], [2, 2, 0]))
        np.testing.assert_allclose(t, [2, 2, 0], atol=1e-15)
        np.testing.assert_allclose(t / np.linalg.norm(t), [2 ** -0.5, 2 ** -0.5, 0], atol=1e-15)

    def test_tangent_symmetric_bump(self):
        np.testing.assert_allclose(tangent_mid(([0, 0, 0], [1, 0, 1], [2, 0, 0])), [2, 0, 0],
                                   atol=1e-15)

    def test_tangent_paraboloid_sample(self):
        # Hand evaluation, h = 0.1: s1 = 1/2, T_t = ((-1/2)(-h) + (1/2)(h)) / (1/2) = 2h,
        # T_z = ((-1/2)(h^2/2) + (1/2)(h^2/2)) / (1/2) = 0.
        h = 0.1
        t = tangent_mid(([-h, 0, h * h / 2], [0, 0, 0], [h, 0, h * h / 2]))
        np.testing.assert_allclose(t, [0.2, 0, 0], atol=1e-15)

    def test_endpoint_tangents(self):
        c = ([0, 0, 0], [1, 0, 0], [3, 0, 0])
        np.testing.assert_allclose(tangent_endpoint(c, "start"), [3, 0, 0], atol=1e-14)
        np.testing.assert_allclose(tangent_endpoint(c, "end"), [3, 0, 0], atol=1e-14)
        with pytest.raises(ValueError):
            tangent_endpoint(c, "middle")

    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=3),
           st.lists(st.floats(-10, 10), min_size=3, max_size=3),
           st.floats(0.1, 5), st.floats(0.1, 5))
    @settings(max_examples=100, deadline=None)
    def test_collinear_curves(self, origin, direction, a, b):
        d = np.array(direction)
        if np.linalg.norm(d) < 1e-3:
            return
        p1 = np.array(origin)
        c = (p1 - a * d, p1, p1 + b * d)
        u = [v / np.linalg.norm(v) for v in (tangent_endpoint(c, "start"), tangent_mid(c),
                                             tangent_endpoint(c, "end"))]
        np.testing.assert_allclose(u[0], u[1], atol=1e-12)
        np.testing.assert_allclose(u[2], u[1], atol=1e-12)
        assert np.abs(curvature_vector(c)).max() <= 1e-12

    def test_circle_arc(self):
        # Equal chords, s1 = 1/2.  Unit chord tangents (+-sin .05, cos .05) sit at
        # s = 1/4 and 3/4, so dV/ds = 2 (V_end - V_start) = (-4 sin .05, 0) and
        # |l'| = 2 sin .1; CV_t = -2 sin(.05)/sin(.1) = -1/cos(.05).
        th = np.array([-0.1, 0.0, 0.1])
        pts = np.stack([np.cos(th), np.sin(th), np.zeros(3)], axis=1)
        cv = curvature_vector(pts)
        np.testing.assert_allclose(cv, [-1 / math.cos(0.05), 0, 0], atol=1e-12)
        fine = np.array([-0.001, 0.0, 0.001])
        cv_fine = curvature_vector(np.stack([np.cos(fine), np.sin(fine), np.zeros(3)], axis=1))
        assert abs(np.linalg.norm(cv_fine) - 1) < abs(np.linalg.norm(cv) - 1)
        assert abs(np.linalg.norm(cv_fine) - 1) < 1e-6

    @pytest.mark.parametrize("h", [0.2, 0.1, 0.01])
    def test_parabola_transect(self, h):
        # Chord tangents (1, -+h/2)/sqrt(1 + h^2/4); |l'| = 2h  =>  CV = (0, 0, 1/sqrt(1 + h^2/4)).
        cv = curvature_vector(([-h, 0, h * h / 2], [0, 0, 0], [h, 0, h * h / 2]))
        np.testing.assert_allclose(cv, [0, 0, 1 / math.sqrt(1 + h * h / 4)], atol=1e-12)


class TestNormal:
    def test_flat(self):
        v = [[1, 0, 0], [0, 1, 0], [2 ** -0.5, 2 ** -0.5, 0], [2 ** -0.5, -2 ** -0.5, 0]]
        est = estimate_normal(v)
        np.testing.assert_allclose(est.normal, [0, 0, 1], atol=1e-15)
        assert est.residual == pytest.approx(0, abs=1e-15)
        assert not est.degenerate

    def test_tilted_plane(self):
        s = make_surface(np.add.outer(np.arange(3.0), np.zeros(3)))  # z = t
        curves = neighborhood_curves(s, 1, 1)
        tangents = [tangent_mid(c) / np.linalg.norm(tangent_mid(c)) for c in curves]
        est = estimate_normal(tangents)
        oracle, lam = brute_force_normal(tangents)
        np.testing.assert_allclose(est.normal, np.array([-1, 0, 1]) / math.sqrt(2), atol=1e-12)
        np.testing.assert_allclose(np.abs(est.normal), np.abs(oracle), atol=1e-8)
        assert est.residual == pytest.approx(0, abs=1e-12)

    def test_rank_one(self):
        est = estimate_normal([[1, 0, 0]] * 4)
        assert abs(est.normal[0]) < 1e-12
        assert est.residual == pytest.approx(0, abs=1e-15)
        assert est.degenerate
        assert np.linalg.norm(est.normal) == pytest.approx(1, abs=1e-12)

    def test_non_finite(self):
        with pytest.raises(NumericError):
            estimate_normal([[np.nan, 0, 0]] + [[1, 0, 0]] * 3)

    def test_sign_convention(self, rng):
        v = rng.normal(size=(200, 4, 3))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        n = estimate_normal(v).normal
        assert np.all(n[:, 2] >= 0)

    def test_against_brute_force_and_probes(self, rng):
        v = rng.normal(size=(300, 4, 3))
        v /= np.linalg.norm(v, axis=-1, keepdims=True)
        est = estimate_normal(v)
        probes = rng.normal(size=(200, 3))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        for k in range(len(v)):
            f_n = np.sum((v[k] @ est.normal[k]) ** 2)
            assert f_n == pytest.approx(est.residual[k], abs=1e-12)
            assert np.all(f_n <= np.sum((probes @ v[k].T) ** 2, axis=1) + 1e-10)
            if not est.degenerate[k]:
                oracle, _ = brute_force_normal(v[k])
                if oracle @ est.normal[k] < 0:
                    oracle = -oracle
                np.testing.assert_allclose(est.normal[k], oracle, atol=1e-8)


class TestNormalCurvature:
    def test_dot(self):
        assert normal_curvature([0, 0, 1], [0, 0, 0]) == 0
        assert normal_curvature([0, 0, 1], [0, 0, 1]) == 1

    def test_paraboloid_origin(self):
        t, x, z, n = paraboloid_grid(0.05)
        res = grid_curvature(t, x, z, padding="none")
        nc3 = res["nc"][2, n - 1, n - 1]
        assert abs(nc3 - 1) < 0.05
        # Along the grid axes the transect analysis gives 1/sqrt(1 + h^2/4).
        assert nc3 == pytest.approx(1 / math.sqrt(1 + 0.05 ** 2 / 4), abs=1e-12)


class TestNeighborhood:
    def test_center_of_3x3(self):
        z = np.arange(9.0).reshape(3, 3)
        s = make_surface(z)
        l1, l2, l3, l4 = neighborhood_curves(s, 1, 1)
        np.testing.assert_array_equal(l1.p0, [1950, 0, 0])
        np.testing.assert_array_equal(l1.p2, [1952, 2, 8])
        np.testing.assert_array_equal(l2.p0, [1950, 2, 2])
        np.testing.assert_array_equal(l2.p2, [1952, 0, 6])
        np.testing.assert_array_equal(l3.p0, [1950, 1, 1])
        np.testing.assert_array_equal(l4.p2, [1951, 2, 5])
        for c in (l1, l2, l3, l4):
            np.testing.assert_array_equal(c.p1, [1951, 1, 4])
        used = {tuple(p) for c in (l1, l2, l3, l4) for p in c}
        assert len(used) == 9

    def test_corner_with_padding(self):
        s = make_surface(np.full((3, 3), -5.0))
        l1, l2, l3, l4 = neighborhood_curves(s, 0, 0, padding=True)
        np.testing.assert_array_equal(l1.p0, [1949, -1, 0])
        np.testing.assert_array_equal(l4.p0, [1950, -1, 0])
        np.testing.assert_array_equal(l1.p2, [1951, 1, -5])

    def test_corner_without_padding(self):
        s = make_surface(np.zeros((3, 3)))
        with pytest.raises(IndexError):
            neighborhood_curves(s, 0, 0)

    def test_skewed_l4(self):
        s = make_surface(np.arange(9.0).reshape(3, 3))
        l4 = neighborhood_curves(s, 1, 1, skewed_l4=True)[3]
        np.testing.assert_array_equal(l4.p0, [1951, 2, 5])
        np.testing.assert_array_equal(l4.p2, [1952, 0, 6])


class TestField:
    def test_flat(self):
        f = curvature_field(make_surface(np.full((5, 6), -4.0)), padding="none")
        assert f.nc.shape == (4, 3, 4)
        assert np.all(f.nc == 0)

    def test_zero_padding_covers_grid(self):
        s = make_surface(np.full((5, 6), -4.0))
        f = curvature_field(s, padding="zero")
        assert f.nc.shape == (4, 5, 6)
        np.testing.assert_array_equal(f.years, s.years)
        assert np.all(np.isfinite(f.nc))
        # ghost cells at z = 0 bend the boundary, interior stays flat
        assert np.all(f.nc[:, 1:-1, 1:-1] == 0)
        assert np.abs(f.nc[:, 0, :]).max() > 0.1

    def test_too_small(self):
        with pytest.raises(StructureError):
            curvature_field(make_surface(np.zeros((2, 5))))

    @given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-10, 10))
    @settings(max_examples=30, deadline=None)
    def test_plane_annihilation(self, a, b, c):
        t = np.arange(12.0)
        x = np.arange(10.0)
        z = a * t[:, None] + b * x[None, :] + c
        res = grid_curvature(t, x, z, padding="none")
        assert np.abs(res["nc"]).max() <= 1e-10

    def test_unit_norms_and_residual(self, rng):
        s = make_surface(rng.normal(-5, 0.3, size=(8, 9)))
        f = curvature_field(s, padding="zero")
        np.testing.assert_allclose(np.linalg.norm(f.tangents, axis=-1), 1, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(f.normals, axis=-1), 1, atol=1e-12)
        assert np.all(f.residual >= 0)

    def test_convergence(self):
        errors = []
        points = [(0.0, 0.0), (0.4, -0.2), (-0.2, 0.6)]
        for h in (0.2, 0.1, 0.05):
            t, x, z, n = paraboloid_grid(h)
            res = grid_curvature(t, x, z, padding="none")
            err = 0.0
            for (pt, px) in points:
                i, j = int(round(pt / h)) + n - 1, int(round(px / h)) + n - 1
                err = max(err, abs(res["nc"][2, i, j] - paraboloid_nc_exact(pt, px, (1, 0))),
                          abs(res["nc"][3, i, j] - paraboloid_nc_exact(pt, px, (0, 1))))
            errors.append(err)
        assert errors[0] > errors[1] > errors[2]

    def test_diagonal_curvatures_near_origin(self):
        t, x, z, n = paraboloid_grid(0.05)
        res = grid_curvature(t, x, z, padding="none")
        for k in range(4):
            assert res["nc"][k, n - 1, n - 1] == pytest.approx(1, abs=2e-3)

    def test_reflection_symmetry(self, rng):
        z = rng.normal(-5, 0.5, size=(9, 11)) + np.add.outer(np.arange(9) * 0.1, np.arange(11) * 0.05)
        f = curvature_field(make_surface(z), padding="none")
        g = curvature_field(make_surface(z[:, ::-1]), padding="none")
        np.testing.assert_allclose(g.nc[0], f.nc[1][:, ::-1], atol=1e-10)
        np.testing.assert_allclose(g.nc[1], f.nc[0][:, ::-1], atol=1e-10)
        np.testing.assert_allclose(g.nc[2], f.nc[2][:, ::-1], atol=1e-10)

    def test_pointwise_equals_field(self, rng):
        s = make_surface(rng.normal(-5, 0.5, size=(5, 5)))
        f = curvature_field(s, padding="zero")
        curves = neighborhood_curves(s, 0, 3, padding=True)
        tangents = [tangent_mid(c) / np.linalg.norm(tangent_mid(c)) for c in curves]
        n = estimate_normal(tangents).normal
        for k, c in enumerate(curves):
            assert normal_curvature(n, curvature_vector(c)) == pytest.approx(f.nc[k, 0, 3],
                                                                               abs=1e-12)

    def test_axis_scale(self):
        h = 0.1
        t, x, z, n = paraboloid_grid(h)
        s = make_surface(z, first_year=0, first_age=0)
        f = curvature_field(s, padding="none", scale=(h, h, 1.0))
        res = grid_curvature(t, x, z, padding="none")
        np.testing.assert_allclose(f.nc, res["nc"], atol=1e-9)

    def test_export(self):
        f = curvature_field(make_surface(np.full((3, 3), -4.0)), padding="zero")
        lines = write_field_csv(f).splitlines()
        assert lines[0] == "year,age,nc1,nc2,nc3,nc4,residual,degenerate_flag"
        assert len(lines) == 10
        assert lines[5].startswith("1951,1,0.0,0.0,0.0,0.0,")
