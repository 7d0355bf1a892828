import numpy as np
import pytest

from topoflock.domain import (
    DensityAccumulator,
    lens_area,
    make_domain_shape,
    offset_masses,
    omega_mass,
    topo_distance,
)
from topoflock.errors import DegeneratePairError, VacuumError
from topoflock.grid import Field, Grid
from topoflock.operator import make_stencil


class TestDomainShape:
    def test_interval(self):
        s = make_domain_shape(1)
        assert s.reference_area == 2.0
        assert s.quadrature_area == pytest.approx(2.0, rel=1e-14)

    def test_lens_area_closed_form(self):
        s = make_domain_shape(2, np.pi / 4)
        # two circular segments of radius sqrt(2) subtending a right angle
        seg = 0.5 * 2 * (np.pi / 2 - 1)
        assert s.reference_area == pytest.approx(2 * seg, rel=1e-14)
        assert s.quadrature_area == pytest.approx(np.pi - 2, rel=1e-6)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_negation_symmetric(self, dim):
        s = make_domain_shape(dim)
        order = np.lexsort(s.nodes.T)
        neg = np.lexsort((-s.nodes).T)
        assert np.allclose(s.nodes[order], -s.nodes[neg], atol=1e-15)
        assert np.allclose(s.weights[order], s.weights[neg], rtol=1e-14)

    def test_inside_unit_ball_and_tips(self):
        s = make_domain_shape(2)
        assert np.all(np.linalg.norm(s.nodes, axis=1) <= 1 + 1e-14)
        assert np.allclose(s.boundary_point(0.0), [1, 0])
        assert np.allclose(s.boundary_point(np.pi), [-1, 0])

    def test_rejects_coarse_rule(self):
        with pytest.raises(ValueError):
            make_domain_shape(2, quad_points=8)

    def test_lens_area_formula(self):
        assert lens_area(np.pi / 4) == pytest.approx(np.pi - 2, rel=1e-15)


class TestOmegaMass:
    def test_uniform_1d(self):
        g = Grid(1, 64)
        acc = DensityAccumulator(Field.constant(g, 1.0))
        assert omega_mass(acc, make_domain_shape(1), 0.0, 0.5) == pytest.approx(0.5, rel=1e-14)

    def test_uniform_2d(self):
        g = Grid(2, 32)
        s = make_domain_shape(2)
        acc = DensityAccumulator(Field.constant(g, 1.0))
        x, y = np.array([0.3, 0.2]), np.array([0.9, -0.1])
        r = np.linalg.norm(y - x)
        assert omega_mass(acc, s, x, y) == pytest.approx(s.reference_area * (r / 2) ** 2, rel=1e-6)

    def test_cosine_density_1d(self):
        g = Grid(1, 1024)
        acc = DensityAccumulator(Field.from_function(g, lambda x: 1 + 0.5 * np.cos(x)))
        got = omega_mass(acc, make_domain_shape(1), 0.0, np.pi / 2)
        # piecewise-constant cells integrate to second order in h
        assert got == pytest.approx(np.pi / 2 + 0.5, abs=5 * g.spacing**2)

    def test_cell_aligned_arc_exact(self, rng):
        g = Grid(1, 32)
        vals = 1 + rng.random(g.shape)
        acc = DensityAccumulator(Field(g, vals))
        h = g.spacing
        got = omega_mass(acc, make_domain_shape(1), 3 * h, 9 * h)
        want = h * (0.5 * vals[3] + vals[4:9].sum() + 0.5 * vals[9])
        assert got == pytest.approx(want, rel=1e-14)

    def test_periodic_minimal_image(self):
        g = Grid(1, 64)
        acc = DensityAccumulator(Field.constant(g, 1.0))
        assert omega_mass(acc, make_domain_shape(1), 0.1, 2 * np.pi - 0.1) == pytest.approx(0.2, rel=1e-12)

    def test_symmetric(self, rng):
        g = Grid(2, 16)
        acc = DensityAccumulator(Field(g, 1 + rng.random(g.shape)))
        s = make_domain_shape(2)
        x, y = np.array([0.4, 1.0]), np.array([1.1, 0.5])
        assert omega_mass(acc, s, x, y) == omega_mass(acc, s, y, x)

    def test_degenerate(self):
        acc = DensityAccumulator(Field.constant(Grid(1, 16), 1.0))
        with pytest.raises(DegeneratePairError):
            omega_mass(acc, make_domain_shape(1), 0.3, 0.3)

    def test_vacuum(self):
        g = Grid(1, 16)
        with pytest.raises(VacuumError):
            DensityAccumulator(Field(g, 1 + np.cos(g.coords[0])))

    def test_bilinear_reproduces_nodes(self, rng):
        g = Grid(2, 16)
        vals = 1 + rng.random(g.shape)
        acc = DensityAccumulator(Field(g, vals))
        pts = np.stack([c.ravel() for c in g.coords], axis=1)
        assert np.allclose(acc.sample(pts), vals.ravel(), rtol=1e-14)


class TestTopoDistance:
    def test_uniform_1d(self):
        acc = DensityAccumulator(Field.constant(Grid(1, 64), 1.0))
        assert topo_distance(acc, make_domain_shape(1), 0.2, 0.7) == pytest.approx(0.5, rel=1e-13)

    def test_density_two(self):
        acc = DensityAccumulator(Field.constant(Grid(1, 64), 2.0))
        assert topo_distance(acc, make_domain_shape(1), 0.0, 0.5) == pytest.approx(1.0, rel=1e-13)

    def test_uniform_2d(self):
        s = make_domain_shape(2)
        acc = DensityAccumulator(Field.constant(Grid(2, 32), 1.0))
        x, y = np.zeros(2), np.array([0.3, 0.4])
        assert topo_distance(acc, s, x, y) == pytest.approx(0.25 * np.sqrt(s.reference_area), rel=1e-6)


class TestOffsetMasses:
    @pytest.mark.parametrize("dim,n", [(1, 32), (2, 16)])
    def test_match_pointwise_queries(self, dim, n, rng):
        g = Grid(dim, n)
        s = make_domain_shape(dim)
        vals = 1 + 0.5 * rng.random(g.shape)
        st = make_stencil(g, np.pi / 4, s)
        half = st.offsets[: st.n_pairs]
        masses = offset_masses(vals, g, s, half, st.mass_stencils)
        acc = DensityAccumulator(Field(g, vals))
        idx = np.indices(g.shape).reshape(dim, -1).T
        for _ in range(20):
            j = rng.integers(len(half))
            i = idx[rng.integers(len(idx))]
            x = i * g.spacing
            want = omega_mass(acc, s, x, x + half[j] * g.spacing)
            assert masses[(j, *i)] == pytest.approx(want, rel=1e-12)
