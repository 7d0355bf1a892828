import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoflock.grid import (
    Field,
    Grid,
    fractional_laplacian,
    heat_semigroup,
    inverse,
    read_snapshot,
    shift_values,
    sobolev_seminorm,
    spectral_derivative,
    transform,
    write_snapshot,
)

from conftest import random_trig


class TestGrid:
    @pytest.mark.parametrize("n", [4, 12, 100])
    def test_rejects_bad_sizes(self, n):
        with pytest.raises(ValueError):
            Grid(1, n)

    def test_rejects_dimension(self):
        with pytest.raises(ValueError):
            Grid(3, 8)

    @given(st.integers(3, 10), st.floats(0.1, 100.0))
    def test_spacing_times_n_is_period(self, p, period):
        g = Grid(1, 2**p, period)
        assert g.spacing * g.n_points == pytest.approx(period, rel=1e-15)


class TestField:
    def test_rejects_nonfinite(self, grid1):
        vals = np.zeros(grid1.shape)
        vals[3] = np.nan
        with pytest.raises(ValueError):
            Field(grid1, vals)

    def test_scalar_shape_promoted(self, grid2):
        f = Field(grid2, np.ones(grid2.shape))
        assert f.components == 1

    def test_round_trip_and_hermitian(self, grid2, rng):
        vals = rng.normal(size=(2,) + grid2.shape)
        f = Field(grid2, vals)
        c = transform(f)
        back = inverse(c)
        assert np.max(np.abs(back.values - vals)) <= 1e-12 * np.max(np.abs(vals))
        neg = np.roll(np.flip(c.modes, axis=(1, 2)), 1, axis=(1, 2))
        assert np.allclose(neg, np.conj(c.modes), atol=1e-14)


class TestSpectralDerivative:
    def test_single_mode(self):
        g = Grid(1, 64)
        f = Field.from_function(g, lambda x: np.sin(3 * x))
        d = spectral_derivative(f, 0, 1)
        assert np.max(np.abs(d.values[0] - 3 * np.cos(3 * g.coords[0]))) <= 1e-10

    @pytest.mark.parametrize("order", [1, 2, 3])
    def test_constant(self, grid2, order):
        d = spectral_derivative(Field.constant(grid2, 4.2), 1, order)
        assert np.max(np.abs(d.values)) <= 1e-12

    def test_random_polynomial_term_by_term(self, rng):
        g = Grid(2, 32)
        vals, terms = random_trig(g, rng, g.n_points // 4 - 4)
        f = Field(g, vals)
        for axis in range(2):
            got = spectral_derivative(f, axis, 1).values[0]
            want = np.zeros(g.shape)
            for _, kv, a, b in terms:
                phase = kv[0] * g.coords[0] + kv[1] * g.coords[1]
                want += kv[axis] * (-a * np.sin(phase) + b * np.cos(phase))
            assert np.max(np.abs(got - want)) <= 1e-10 * np.max(np.abs(want))

    def test_nyquist_dropped_for_odd_orders(self):
        g = Grid(1, 16)
        f = Field(g, np.cos(8 * g.coords[0]))
        assert np.max(np.abs(spectral_derivative(f, 0, 1).values)) < 1e-12
        assert np.max(np.abs(spectral_derivative(f, 0, 2).values + 64 * f.values)) < 1e-9

    def test_bad_axis(self, grid1):
        with pytest.raises(ValueError):
            spectral_derivative(Field.constant(grid1), 1, 1)


class TestSobolev:
    def test_single_mode(self):
        g = Grid(1, 64)
        f = Field.from_function(g, lambda x: np.sin(3 * x))
        assert sobolev_seminorm(f, 2) == pytest.approx(9 / np.sqrt(2), rel=1e-12)

    def test_constant(self, grid2):
        assert sobolev_seminorm(Field.constant(grid2, 3.0), 1.5) == 0.0

    def test_two_modes(self):
        g = Grid(1, 64)
        f = Field.from_function(g, lambda x: np.sin(x) + np.sin(4 * x))
        assert sobolev_seminorm(f, 1) == pytest.approx(np.sqrt(0.5 + 16 * 0.5), rel=1e-12)


class TestFractionalLaplacian:
    def test_constant(self, grid1):
        out = fractional_laplacian(Field.constant(grid1, 2.0), 1.3)
        assert np.max(np.abs(out.values)) <= 1e-14

    def test_single_mode(self):
        g = Grid(1, 32)
        f = Field.from_function(g, lambda x: np.cos(2 * x))
        assert np.allclose(fractional_laplacian(f, 1.0).values, -2 * f.values, atol=1e-13)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.1, 1.9), st.integers(0, 2**32 - 1))
    def test_energy_identity(self, alpha, seed):
        g = Grid(1, 32)
        f = Field(g, np.random.default_rng(seed).normal(size=g.shape))
        # ||Lambda^(alpha/2) f||^2 summed mode by mode
        modes = np.fft.fft(f.values[0]) / g.n_points
        lhs = float(np.sum(np.abs(modes) ** 2 * np.abs(np.fft.fftfreq(32, 1 / 32)) ** alpha))
        assert lhs == pytest.approx(sobolev_seminorm(f, alpha / 2) ** 2, rel=1e-12)


class TestHeat:
    def test_zero_viscosity_identity(self, grid1, rng):
        f = Field(grid1, rng.normal(size=grid1.shape))
        assert heat_semigroup(f, 0.0, 1.0) is f

    def test_single_mode(self):
        g = Grid(1, 32)
        f = Field.from_function(g, np.sin)
        assert np.allclose(heat_semigroup(f, 1.0, 1.0).values, np.exp(-1) * f.values, atol=1e-14)

    @given(st.floats(0.0, 5.0), st.floats(0.0, 5.0))
    def test_mass_preserved(self, nu, dt):
        g = Grid(1, 16)
        f = Field.from_function(g, lambda x: 2 + np.cos(x) + np.sin(5 * x))
        assert heat_semigroup(f, nu, dt).mean() == pytest.approx(f.mean(), rel=1e-14)


class TestShiftAndSnapshots:
    def test_shift_exact_on_trig(self, grid2):
        f = np.cos(grid2.coords[0] + 2 * grid2.coords[1])
        got = shift_values(f, grid2, (0.3, -0.1))
        want = np.cos(grid2.coords[0] + 0.3 + 2 * (grid2.coords[1] - 0.1))
        assert np.max(np.abs(got - want)) < 1e-13

    def test_snapshot_round_trip(self, tmp_path, grid2, rng):
        f = Field(grid2, rng.normal(size=(2,) + grid2.shape))
        path = write_snapshot(f, tmp_path / "u.field")
        head = path.read_bytes().split(b"\n", 1)[0].decode()
        assert head == "TOPOFLOCK-FIELD v1; dim=2; N=16; L=6.283185307179586; components=2"
        back = read_snapshot(path)
        assert back.grid == grid2
        assert np.array_equal(back.values, f.values)

    def test_snapshot_component_fastest(self, tmp_path, grid1):
        vals = np.stack([np.arange(64.0), -np.arange(64.0)])
        path = write_snapshot(Field(grid1, vals), tmp_path / "v.field")
        body = np.frombuffer(path.read_bytes().split(b"\n", 1)[1], dtype="<f8")
        assert list(body[:4]) == [0.0, -0.0, 1.0, -1.0]
