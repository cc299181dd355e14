import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imugest.errors import ContractViolationError
from imugest.numerics import (AdamState, Rng, adam_update, cross_entropy,
                              dropout_mask, finite_diff_gradient, relu,
                              sigmoid, softmax, tanh_act)


class TestSigmoid:
    def test_zero_is_half(self):
        assert sigmoid(np.array(0.0)) == 0.5

    def test_saturates(self):
        assert sigmoid(np.array(100.0)) == pytest.approx(1.0, abs=1e-12)
        assert sigmoid(np.array(-100.0)) == pytest.approx(0.0, abs=1e-12)

    def test_reference_value(self):
        # 1/(1+e^-1) evaluated independently at high precision
        assert sigmoid(np.array(1.0)) == pytest.approx(0.7310585786300049,
                                                       abs=1e-12)

    @given(st.floats(min_value=-50, max_value=50))
    def test_symmetry(self, x):
        arr = np.array([x])
        assert abs(sigmoid(arr)[0] + sigmoid(-arr)[0] - 1.0) <= 1e-12

    def test_no_overflow_on_extremes(self):
        out = sigmoid(np.array([-1e4, 1e4]))
        assert np.all(np.isfinite(out))


class TestTanh:
    def test_zero(self):
        assert tanh_act(np.array(0.0)) == 0.0

    def test_reference_value(self):
        assert tanh_act(np.array(1.0)) == pytest.approx(0.7615941559557649,
                                                        abs=1e-12)

    @given(st.floats(min_value=-30, max_value=30))
    def test_odd(self, x):
        arr = np.array([x])
        assert tanh_act(-arr)[0] == -tanh_act(arr)[0]

    def test_open_interval(self):
        # float64 tanh only reaches +-1.0 beyond |x| ~ 19
        out = tanh_act(np.linspace(-18, 18, 101))
        assert np.all(out > -1.0) and np.all(out < 1.0)


class TestRelu:
    def test_definition(self):
        np.testing.assert_array_equal(relu(np.array([-1.0, 0.0, 2.0])),
                                      [0.0, 0.0, 2.0])

    def test_all_negative(self):
        np.testing.assert_array_equal(relu(np.array([-5.0, -0.1])), [0.0, 0.0])

    def test_identity_on_nonnegative(self):
        x = np.array([0.0, 0.5, 3.0])
        np.testing.assert_array_equal(relu(x), x)


class TestSoftmax:
    def test_uniform(self):
        out = softmax(np.zeros(10))
        np.testing.assert_allclose(out, 0.1, atol=1e-15)

    def test_shift_invariance_exact(self):
        logits = np.array([1.0, 2.0, 3.0, -4.0])
        np.testing.assert_array_equal(softmax(logits), softmax(logits + 7.0))

    def test_closed_form(self):
        logits = np.log(np.array([1.0, 2.0, 3.0]))
        np.testing.assert_allclose(softmax(logits), [1 / 6, 2 / 6, 3 / 6],
                                   atol=1e-15)

    @settings(max_examples=200)
    @given(st.lists(st.floats(min_value=-700, max_value=700), min_size=1,
                    max_size=20))
    def test_sums_to_one(self, logits):
        out = softmax(np.array(logits))
        assert abs(out.sum() - 1.0) <= 1e-12
        assert np.all(out >= 0.0)

    def test_large_spread_no_overflow(self):
        out = softmax(np.array([1e6, 0.0, -1e6]))
        assert np.isfinite(out).all() and abs(out.sum() - 1.0) <= 1e-12


class TestCrossEntropy:
    def test_perfect_prediction(self):
        pred = np.zeros(10)
        pred[4] = 1.0
        assert cross_entropy(pred, 4) == 0.0

    def test_uniform(self):
        assert cross_entropy(np.full(10, 0.1), 3) == pytest.approx(
            2.302585092994046, abs=1e-12)

    def test_clamp(self):
        pred = np.zeros(10)
        pred[0] = 1.0
        # clamp rule: -ln(1e-12) for a zero probability
        assert cross_entropy(pred, 5) == pytest.approx(27.631021115928547,
                                                       abs=1e-9)

    def test_out_of_range_target(self):
        with pytest.raises(ContractViolationError):
            cross_entropy(np.full(10, 0.1), 10)
        with pytest.raises(ContractViolationError):
            cross_entropy(np.full(10, 0.1), -1)

    @given(st.integers(min_value=0, max_value=9))
    def test_nonnegative_with_equality_iff_certain(self, target):
        pred = np.full(10, 0.1)
        assert cross_entropy(pred, target) > 0.0
        certain = np.zeros(10)
        certain[target] = 1.0
        assert cross_entropy(certain, target) == 0.0


class TestDropoutMask:
    def test_rate_zero_all_ones(self):
        mask = dropout_mask(Rng(1), (100,), 0.0)
        np.testing.assert_array_equal(mask, np.ones(100))

    def test_seeding_reproducible(self):
        a = dropout_mask(Rng(7), (50, 50), 0.5)
        b = dropout_mask(Rng(7), (50, 50), 0.5)
        np.testing.assert_array_equal(a, b)

    def test_values_are_zero_or_scaled(self):
        mask = dropout_mask(Rng(3), (1000,), 0.25)
        assert set(np.unique(mask)) <= {0.0, 1.0 / 0.75}

    def test_zero_fraction_large_sample(self):
        mask = dropout_mask(Rng(11), (10 ** 6,), 0.5)
        zero_frac = float(np.mean(mask == 0.0))
        assert abs(zero_frac - 0.5) <= 0.002

    def test_mean_near_one(self):
        # inverted scaling keeps the expectation at 1 (3-sigma binomial bound)
        n, rate = 10 ** 6, 0.3
        mask = dropout_mask(Rng(13), (n,), rate)
        sigma = np.sqrt(rate * (1 - rate) / n) / (1 - rate)
        assert abs(mask.mean() - 1.0) <= 3 * sigma

    def test_rate_one_rejected(self):
        with pytest.raises(ContractViolationError):
            dropout_mask(Rng(1), (10,), 1.0)


class TestAdam:
    def test_zero_gradient_leaves_params_bit_identical(self):
        param = np.array([1.5, -2.25, 0.125])
        state = AdamState.for_param(param, learning_rate=0.025)
        new_param, new_state = adam_update(param, np.zeros(3), state)
        assert new_state.t == 1
        np.testing.assert_array_equal(new_param, param)

    def test_first_step_unit_gradient(self):
        param = np.zeros(4)
        state = AdamState.for_param(param, learning_rate=0.025)
        new_param, _ = adam_update(param, np.ones(4), state)
        expected = -0.025 / (1.0 + 1e-8)  # m_hat = v_hat = 1 on step one
        np.testing.assert_allclose(new_param, expected, atol=1e-10)

    def test_equal_gradients_equal_updates(self):
        param = np.array([3.0, 3.0])
        state = AdamState.for_param(param, learning_rate=0.01)
        new_param, _ = adam_update(param, np.array([0.7, 0.7]), state)
        assert new_param[0] == new_param[1]

    def test_shape_mismatch(self):
        state = AdamState.for_param(np.zeros(3), learning_rate=0.01)
        with pytest.raises(ContractViolationError):
            adam_update(np.zeros(3), np.zeros(4), state)

    def test_state_advances(self):
        param = np.zeros(2)
        state = AdamState.for_param(param, learning_rate=0.1)
        for expected_t in (1, 2, 3):
            param, state = adam_update(param, np.ones(2), state)
            assert state.t == expected_t
        assert np.all(state.v >= 0.0)


class TestFiniteDiff:
    def test_quadratic(self):
        grad = finite_diff_gradient(lambda p: float(p[0] ** 2),
                                    np.array([3.0]), h=1e-5)
        assert grad[0] == pytest.approx(6.0, abs=1e-6)

    def test_constant(self):
        grad = finite_diff_gradient(lambda p: 42.0, np.array([1.0, 2.0]))
        np.testing.assert_array_equal(grad, [0.0, 0.0])

    def test_sin_at_zero(self):
        grad = finite_diff_gradient(lambda p: float(np.sin(p[0])),
                                    np.array([0.0]), h=1e-5)
        assert grad[0] == pytest.approx(1.0, abs=1e-9)

    def test_multivariate(self):
        # L = x*y: dL/dx = y, dL/dy = x
        grad = finite_diff_gradient(lambda p: float(p[0] * p[1]),
                                    np.array([2.0, 5.0]), h=1e-5)
        np.testing.assert_allclose(grad, [5.0, 2.0], atol=1e-7)

    def test_does_not_mutate_input(self):
        params = np.array([1.0, 2.0])
        finite_diff_gradient(lambda p: float(p.sum()), params)
        np.testing.assert_array_equal(params, [1.0, 2.0])

    def test_nonpositive_h_rejected(self):
        with pytest.raises(ContractViolationError):
            finite_diff_gradient(lambda p: 0.0, np.zeros(1), h=0.0)


class TestRng:
    def test_same_seed_same_sequence(self):
        a = Rng(123).normal(0, 1, 100)
        b = Rng(123).normal(0, 1, 100)
        np.testing.assert_array_equal(a, b)

    def test_derive_is_deterministic(self):
        a = Rng(5).derive("dropout").random(10)
        b = Rng(5).derive("dropout").random(10)
        np.testing.assert_array_equal(a, b)

    def test_derived_streams_differ(self):
        base = Rng(5)
        a = base.derive("init").random(10)
        b = base.derive("shuffle").random(10)
        assert not np.array_equal(a, b)

    def test_derive_does_not_consume_parent(self):
        parent = Rng(9)
        parent.derive("child")
        after = parent.random(5)
        np.testing.assert_array_equal(after, Rng(9).random(5))

    def test_permutation_range(self):
        perm = Rng(2).permutation(10)
        assert sorted(perm.tolist()) == list(range(10))
