import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pspam import equalization as eq
from pspam.errors import BoundaryError, ConfigError, ShapeError, SingularSystemError

from planted import planted_block


@pytest.fixture(scope="module")
def planted():
    return planted_block(24_000, seed=1, kernel_seed=2)


class TestConfig:
    def test_coefficient_counts(self):
        assert eq.ffe().n_coefficients == 31
        assert eq.vnle().n_coefficients == 31 + 28 + 165
        assert eq.ffe().label == "FFE" and eq.vnle().label == "VNLE"
        assert eq.vnle(name="x").label == "x"

    def test_short_training_warns(self):
        with pytest.warns(UserWarning, match="below 4x"):
            eq.vnle(training_len=500)

    @pytest.mark.parametrize("kw", [dict(linear_taps=30), dict(linear_taps=0), dict(v2_memory=-1),
                                    dict(ridge_lambda=-1.0), dict(training_len=0), dict(input_sps=1)])
    def test_rejects(self, kw):
        with pytest.raises(ConfigError):
            eq.EqualizerConfig(**kw)

    def test_linearized(self):
        lin = eq.vnle().linearized()
        assert lin.is_linear and lin.linear_taps == 31


class TestFeatures:
    def test_layout_against_loop(self, rng):
        cfg = eq.vnle(5, 3, 3)
        x = rng.standard_normal(40)
        n = 10
        s2 = [x[2 * (n + j - 1)] for j in range(3)]
        expect = [x[2 * n + t] for t in range(-2, 3)]
        expect += [s2[a] * s2[b] for a, b in itertools.combinations_with_replacement(range(3), 2)]
        expect += [s2[a] * s2[b] * s2[c] for a, b, c in itertools.combinations_with_replacement(range(3), 3)]
        np.testing.assert_array_equal(eq.build_feature_row(x, n, cfg), expect)

    def test_even_memory_window(self, rng):
        cfg = eq.vnle(1, 4, 0)
        x = rng.standard_normal(40)
        row = eq.build_feature_row(x, 10, cfg)
        s = x[2 * np.arange(9, 13)]  # offsets -1..2
        assert row[1] == s[0] ** 2 and row[-1] == s[3] ** 2

    def test_boundary(self, rng):
        x = rng.standard_normal(100)
        cfg = eq.ffe()
        with pytest.raises(BoundaryError):
            eq.build_feature_row(x, 3, cfg)
        with pytest.raises(BoundaryError):
            eq.build_feature_row(x, 48, cfg)
        eq.build_feature_row(x, 8, cfg)
        valid = eq.valid_symbols(50, cfg)
        # 2n - 15 >= 0 and 2n + 15 <= 99 leaves symbols 8..42
        assert valid.sum() == 35 and valid[8] and not valid[7] and valid[42] and not valid[43]

    def test_odd_length_rejected(self):
        with pytest.raises(ShapeError):
            eq.apply(eq.VolterraKernels.unit_impulse(), np.zeros(11))


class TestTraining:
    def test_planted_recovery(self, planted):
        x, sym, kernel = planted
        fit = eq.fit(x, sym / 7, eq.vnle(ridge_lambda=0.0))
        assert fit.mse < 1e-20
        np.testing.assert_allclose(fit.kernels.vector, np.concatenate(kernel), atol=1e-10)

    def test_ffe_cannot_invert_nonlinear_channel(self, planted):
        x, sym, _ = planted
        lin = eq.fit(x, sym / 7, eq.ffe(ridge_lambda=0.0))
        assert lin.mse > 1e-6

    def test_linearized_vnle_is_ffe(self, planted):
        x, sym, _ = planted
        a = eq.apply(eq.train(x, sym, eq.ffe()), x).values
        b = eq.apply(eq.train(x, sym, eq.EqualizerConfig(31, 0, 0)), x).values
        np.testing.assert_array_equal(a, b)

    def test_ffe_output_is_a_convolution(self, planted):
        x, sym, _ = planted
        k = eq.train(x, sym, eq.ffe())
        y = eq.apply(k, x)
        ref = np.convolve(x, k.h1[::-1], mode="same")[::2]
        np.testing.assert_allclose(y.values[y.valid], ref[y.valid], atol=1e-9)

    def test_identity_channel_singular_without_ridge(self, rng):
        sym = rng.choice(np.arange(-7.0, 8.0, 2.0), 30_000)
        x = np.zeros(2 * sym.size)
        x[::2] = sym / 7
        with pytest.raises(SingularSystemError):
            eq.fit(x, sym, eq.ffe(ridge_lambda=0.0))
        k = eq.train(x, sym, eq.ffe(ridge_lambda=1e-9))
        assert k.h1[15] == pytest.approx(7.0, rel=1e-6)
        np.testing.assert_allclose(np.delete(k.h1, 15), 0.0, atol=1e-6)

    def test_too_few_rows(self):
        with pytest.raises(SingularSystemError):
            eq._solve(np.ones((3, 5)), np.ones(3), 0.0)

    def test_ridge_shrinks(self, rng):
        a = rng.standard_normal((200, 10))
        t = a @ rng.standard_normal(10)
        w0 = eq._solve(a, t, 0.0)
        w1 = eq._solve(a, t, 10.0)
        assert np.linalg.norm(w1) < np.linalg.norm(w0)
        ref = np.linalg.solve(a.T @ a + 10.0 * np.eye(10), a.T @ t)
        np.testing.assert_allclose(w1, ref, rtol=1e-9)

    def test_short_block(self):
        with pytest.raises(ShapeError):
            eq.fit(np.zeros(200), np.zeros(100), eq.ffe(training_len=20000))

    def test_mismatched_kernels(self):
        with pytest.raises(ShapeError):
            eq.apply(eq.VolterraKernels.unit_impulse(), np.zeros(64), eq.vnle())


class TestKernels:
    def test_csv_roundtrip(self, tmp_path, rng):
        cfg = eq.vnle(7, 3, 4)
        k = eq.VolterraKernels.from_vector(rng.standard_normal(cfg.n_coefficients), cfg)
        back = eq.VolterraKernels.from_csv(k.to_csv(tmp_path / "k.csv"))
        np.testing.assert_array_equal(back.vector, k.vector)
        assert (back.v2_memory, back.v3_memory) == (3, 4)

    def test_shape_checks(self):
        with pytest.raises(ShapeError):
            eq.VolterraKernels(np.ones(4), np.zeros(0), np.zeros(0))
        with pytest.raises(ShapeError):
            eq.VolterraKernels(np.ones(3), np.ones(2), np.zeros(0), v2_memory=2)
        with pytest.raises(ShapeError):
            eq.VolterraKernels(np.array([np.nan]), np.zeros(0), np.zeros(0))

    def test_unit_impulse_passes_symbols(self, rng):
        x = rng.standard_normal(64)
        np.testing.assert_array_equal(eq.apply(eq.VolterraKernels.unit_impulse(), x).values, x[::2])


class TestDecision:
    def test_thresholds(self):
        y = np.array([-9.0, -6.0, -5.9, -0.1, 0.0, 0.1, 1.99, 2.0, 5.99, 6.0, 100.0])
        np.testing.assert_array_equal(eq.hard_decide(y), [-7, -7, -5, -1, 1, 1, 1, 3, 5, 7, 7])

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-20, 20, allow_nan=False))
    def test_nearest_level(self, v):
        d = eq.hard_decide(np.array([v]))[0]
        levels = np.arange(-7.0, 8.0, 2.0)
        assert abs(v - d) <= np.min(np.abs(v - levels)) + 1e-12

    def test_other_orders(self):
        np.testing.assert_array_equal(eq.hard_decide(np.array([-5.0, 0.5, 2.5]), 2), [-3, 1, 3])
