import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvqtok.numerics import (Adam, AdamState, adam_step, cross_entropy,
                             finite_difference_check, make_rng, softmax)

finite_floats = st.floats(min_value=-50, max_value=50, allow_nan=False)


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)

    def test_stability_limit(self):
        out = softmax([1000.0, 0.0])
        assert np.all(np.isfinite(out))
        assert out[0] == pytest.approx(1.0, abs=1e-12)
        assert out[1] == pytest.approx(0.0, abs=1e-12)

    def test_reference_values(self):
        # exp-normalisation evaluated independently at 40 decimal digits
        expected = [0.090030573170380457, 0.244728471054797652, 0.665240955774821889]
        np.testing.assert_allclose(softmax([1.0, 2.0, 3.0]), expected, atol=1e-12, rtol=0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            softmax([np.inf, 0.0])
        with pytest.raises(ValueError):
            softmax([np.nan, 0.0])

    @given(st.lists(finite_floats, min_size=1, max_size=12), finite_floats)
    def test_normalised_and_shift_invariant(self, logits, shift):
        out = softmax(logits)
        assert abs(out.sum() - 1.0) <= 1e-12
        assert np.all(out > 0) and np.all(out <= 1)
        shifted = softmax(np.asarray(logits) + shift)
        np.testing.assert_allclose(shifted, out, atol=1e-9)


class TestCrossEntropy:
    def test_uniform_case(self):
        loss, grad = cross_entropy(np.array([0.0, 0.0]), 0)
        assert loss == pytest.approx(np.log(2.0), abs=1e-15)
        np.testing.assert_allclose(grad, [-0.5, 0.5], atol=1e-15)

    def test_confident_correct_limit(self):
        loss, _ = cross_entropy(np.array([50.0, 0.0]), 0)
        assert 0.0 <= loss < 1e-20

    def test_target_out_of_range(self):
        with pytest.raises(IndexError):
            cross_entropy(np.array([0.0, 1.0]), 2)
        with pytest.raises(IndexError):
            cross_entropy(np.array([0.0, 1.0]), -1)

    def test_gradient_matches_finite_differences(self):
        logits = make_rng(3).normal(size=5)
        _, grad = cross_entropy(logits, 2)
        err = finite_difference_check(lambda v: cross_entropy(v, 2)[0],
                                      logits.copy(), grad, epsilon=1e-6)
        assert err < 1e-6

    @given(st.lists(finite_floats, min_size=2, max_size=8), st.data())
    def test_gradient_sums_to_zero(self, logits, data):
        target = data.draw(st.integers(min_value=0, max_value=len(logits) - 1))
        _, grad = cross_entropy(np.asarray(logits), target)
        assert abs(grad.sum()) < 1e-12


class TestAdam:
    def test_zero_grad_is_fixed_point(self):
        p = np.array([1.0, -2.0])
        st8 = AdamState.for_param(p)
        adam_step(p, np.zeros(2), st8)
        np.testing.assert_array_equal(p, [1.0, -2.0])
        assert st8.step == 1

    def test_first_step_moves_by_learning_rate(self):
        p = np.array([0.0])
        st8 = AdamState.for_param(p, learning_rate=1e-3)
        adam_step(p, np.array([7.0]), st8)
        assert p[0] == pytest.approx(-1e-3, rel=1e-6)

    def test_three_step_trace_matches_scripted_oracle(self):
        # f(w) = w^2 from w=1, lr=0.1; oracle run independently at 40 digits
        expected = [0.9000000004999999975, 0.8004122286917921452, 0.7015862729460295452]
        p = np.array([1.0])
        st8 = AdamState.for_param(p, learning_rate=0.1)
        for want in expected:
            adam_step(p, 2.0 * p.copy(), st8)
            assert p[0] == pytest.approx(want, abs=1e-10)

    def test_shape_mismatch(self):
        p = np.zeros(3)
        with pytest.raises(ValueError):
            adam_step(p, np.zeros(4), AdamState.for_param(p))

    def test_dict_optimizer_updates_in_place(self):
        params = {"a": np.ones(2), "b": np.zeros((2, 2))}
        opt = Adam(params, learning_rate=0.5)
        opt.step({"a": np.ones(2), "b": np.ones((2, 2))})
        assert params["a"][0] != 1.0
        assert params["b"][0, 0] != 0.0


class TestFiniteDifferenceCheck:
    def test_quadratic(self):
        x = np.array([3.0])
        err = finite_difference_check(lambda v: float(v[0] ** 2), x, np.array([6.0]),
                                      epsilon=1e-5)
        assert err < 1e-8

    def test_detects_wrong_gradient(self):
        x = np.array([3.0])
        err = finite_difference_check(lambda v: float(v[0] ** 2), x, np.array([12.0]),
                                      epsilon=1e-5)
        assert err == pytest.approx(1.0 / 3.0, abs=1e-6)


class TestRng:
    def test_same_seed_same_stream(self):
        a = make_rng(7).random(100)
        b = make_rng(7).random(100)
        np.testing.assert_array_equal(a, b)

    def test_streams_differ(self):
        a = make_rng(7, stream=0).random(10)
        b = make_rng(7, stream=1).random(10)
        assert not np.array_equal(a, b)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            make_rng(-1)
