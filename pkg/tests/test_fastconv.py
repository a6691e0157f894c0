import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from fracint.core import TimeGrid, make_order
from fracint.errors import PreconditionError
from fracint.expsum import ExpSumKernel, TruncationBudget, kernel_for_budget
from fracint.fastconv import (
    HistoryState,
    OpCounter,
    StreamingConvolution,
    direct_convolution,
    expsum_direct_convolution,
    fast_convolution,
    local_weight,
    step_history,
    write_results,
)

HALF = make_order(0.5)


def _single(w=1.0, beta=1.0, order=HALF, delta=None):
    return ExpSumKernel(
        np.array([w]), np.array([beta]), h=1.0, M=0, N=0, order=order, delta=delta
    )


def _random_grid(rng, P, delta):
    steps = delta * (1.0 + rng.uniform(0.0, 4.0, P))
    return TimeGrid(np.concatenate([[0.0], np.cumsum(steps)]))


@pytest.fixture(scope="module")
def kernel6():
    return kernel_for_budget(HALF, TruncationBudget(1e-6, 1e-3))


class TestDirect:
    def test_local_weight(self):
        assert local_weight(HALF, 0.1) == pytest.approx(0.3568248232305542, rel=1e-14)

    def test_constant_is_exact(self):
        g = TimeGrid.uniform(0.0, 1.0, 10)
        out = direct_convolution(HALF, g, lambda t: 1.0)
        assert out[-1] == pytest.approx(1.1283791670955126, rel=1e-13)
        np.testing.assert_allclose(out, g.points[1:] ** 0.5 / math.gamma(1.5), rtol=1e-13)

    def test_constant_exact_on_nonuniform_grid(self):
        g = _random_grid(np.random.default_rng(3), 50, 0.01)
        out = direct_convolution(make_order(0.3), g, np.ones(51))
        np.testing.assert_allclose(out, g.points[1:] ** 0.3 / math.gamma(1.3), rtol=1e-12)

    def test_zero(self):
        g = TimeGrid.uniform(0.0, 1.0, 5)
        assert np.all(direct_convolution(HALF, g, np.zeros(6)) == 0.0)

    def test_misaligned_samples(self):
        g = TimeGrid.uniform(0.0, 1.0, 5)
        with pytest.raises(PreconditionError):
            direct_convolution(HALF, g, np.zeros(5))

    def test_weights_against_power_formula(self):
        # oracle: z_nj from the unguarded power difference
        g = _random_grid(np.random.default_rng(0), 8, 0.1)
        t = g.points
        alpha = 0.4
        F = np.random.default_rng(1).normal(size=9)
        expected = [
            sum(
                ((t[n] - t[j - 1]) ** alpha - (t[n] - t[j]) ** alpha) * F[j]
                for j in range(1, n + 1)
            )
            / math.gamma(alpha + 1)
            for n in range(1, 9)
        ]
        np.testing.assert_allclose(
            direct_convolution(make_order(alpha), g, F), expected, rtol=1e-12
        )


class TestExpsumDirect:
    def test_one_history_interval(self):
        h, w, beta = 0.1, 0.7, 3.0
        g = TimeGrid(np.array([0.0, h, 2 * h]))
        k = _single(w, beta)
        out = expsum_direct_convolution(k, HALF, g, [0.0, 1.0, 0.0])
        expected = HALF.c_alpha * w * (math.exp(-beta * h) - math.exp(-2 * beta * h)) / beta
        assert out[1] == pytest.approx(expected, rel=1e-14)
        assert out[0] == pytest.approx(local_weight(HALF, h), rel=1e-15)

    def test_zero(self, kernel6):
        g = TimeGrid.uniform(0.0, 1.0, 20)
        assert np.all(expsum_direct_convolution(kernel6, HALF, g, np.zeros(21)) == 0.0)

    def test_step_below_delta(self, kernel6):
        g = TimeGrid(np.array([0.0, 0.01, 0.0105, 0.02]))
        with pytest.raises(PreconditionError, match="step 2"):
            expsum_direct_convolution(kernel6, HALF, g, np.ones(4))
        with pytest.raises(PreconditionError, match="step 2"):
            fast_convolution(kernel6, HALF, g, np.ones(4))


class TestStepHistory:
    def test_zero_stays_zero(self):
        s = step_history(HistoryState(np.zeros(1)), _single(), HALF, 0.0, 0.3)
        assert s.phi.tolist() == [0.0]
        assert s.last_index == 1

    def test_pure_decay(self):
        s = step_history(HistoryState(np.ones(1)), _single(beta=2.0), HALF, 0.0, 0.3)
        assert s.phi[0] == pytest.approx(math.exp(-0.6), rel=1e-15)

    def test_absorb_interval(self):
        s = step_history(HistoryState(np.zeros(1)), _single(), HALF, 1.0, 1.0)
        assert s.phi[0] == pytest.approx(0.20121022313515236, rel=1e-15)
        # c_alpha * int_0^1 exp(-(1 - tau)) dtau
        ref, _ = quad(lambda tau: math.exp(-(1.0 - tau)) / math.pi, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)
        assert s.phi[0] == pytest.approx(ref, rel=1e-14)

    def test_in_place(self):
        state = HistoryState(np.ones(1))
        out = step_history(state, _single(), HALF, 1.0, 1.0, out=state)
        assert out is state
        assert state.phi[0] == pytest.approx(math.exp(-1) + 0.20121022313515236, rel=1e-15)

    def test_delta_enforced(self):
        with pytest.raises(PreconditionError):
            step_history(HistoryState(np.zeros(1)), _single(delta=0.5), HALF, 1.0, 0.1)

    def test_tiny_rate_uses_expm1(self):
        s = step_history(HistoryState(np.zeros(1)), _single(beta=1e-20), HALF, 1.0, 1.0)
        assert s.phi[0] == pytest.approx(HALF.c_alpha, rel=1e-15)


class TestFast:
    def test_single_step(self, kernel6):
        g = TimeGrid(np.array([0.0, 0.25]))
        out = fast_convolution(kernel6, HALF, g, [5.0, 2.0])
        assert out.tolist() == [pytest.approx(2.0 * local_weight(HALF, 0.25), rel=1e-15)]

    def test_constant(self, kernel6):
        g = TimeGrid.uniform(0.0, 1.0, 1000)
        out = fast_convolution(kernel6, HALF, g, lambda t: 1.0)
        assert abs(out[-1] - 1.1283791670955126) <= 1e-4

    def test_linear(self, kernel6):
        g = TimeGrid.uniform(0.0, 1.0, 1000)
        out = fast_convolution(kernel6, HALF, g, lambda t: t)
        assert abs(out[-1] - 0.752252778063675) <= 2e-3

    def test_matches_summation(self, kernel6):
        rng = np.random.default_rng(7)
        g = _random_grid(rng, 200, 1e-3)
        F = rng.uniform(-1, 1, 201)
        fast = fast_convolution(kernel6, HALF, g, F)
        ref = expsum_direct_convolution(kernel6, HALF, g, F)
        np.testing.assert_allclose(fast, ref, rtol=1e-12, atol=1e-12 * np.abs(ref).max())

    def test_converges_to_exact_kernel(self):
        order = make_order(0.5)
        k = kernel_for_budget(order, TruncationBudget(1e-10, 1e-2))
        g = TimeGrid.uniform(0.0, 1.0, 100)
        fast = fast_convolution(k, order, g, np.ones(101))
        exact = direct_convolution(order, g, np.ones(101))
        np.testing.assert_allclose(fast, exact, rtol=1e-8)

    @settings(max_examples=25, deadline=None)
    @given(
        st.floats(-3, 3),
        st.floats(-3, 3),
        st.integers(0, 2**32 - 1),
    )
    def test_linearity(self, kernel6, a, b, seed):
        rng = np.random.default_rng(seed)
        g = _random_grid(rng, 40, 1e-3)
        f1, f2 = rng.normal(size=41), rng.normal(size=41)
        lhs = fast_convolution(kernel6, HALF, g, a * f1 + b * f2)
        rhs = a * fast_convolution(kernel6, HALF, g, f1) + b * fast_convolution(kernel6, HALF, g, f2)
        scale = (abs(a) + abs(b) + 1) * np.abs(fast_convolution(kernel6, HALF, g, np.ones(41))).max()
        np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-13 * scale * 10)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_positivity(self, kernel6, seed):
        rng = np.random.default_rng(seed)
        g = _random_grid(rng, 60, 1e-3)
        F = rng.uniform(0, 1, 61) * (rng.uniform(size=61) > 0.5)
        assert np.all(fast_convolution(kernel6, HALF, g, F) >= 0)

    def test_operation_count_linear(self, kernel6):
        counts = []
        for P in (100, 200, 400):
            c = OpCounter()
            fast_convolution(kernel6, HALF, TimeGrid.uniform(0, 1, P), np.ones(P + 1), counter=c)
            counts.append(c.count)
        assert counts == [100 * kernel6.n_terms, 200 * kernel6.n_terms, 400 * kernel6.n_terms]


class TestStreaming:
    def test_matches_batch(self, kernel6):
        rng = np.random.default_rng(11)
        g = _random_grid(rng, 50, 1e-3)
        F = rng.normal(size=51)
        stream = StreamingConvolution(kernel6, HALF, g.a)
        values = [stream.push(t, f) for t, f in zip(g.points[1:], F[1:])]
        assert values == fast_convolution(kernel6, HALF, g, F).tolist()
        assert stream.live_state_size == kernel6.n_terms
        assert stream.state.last_index == 50

    def test_rejects_backward_time(self, kernel6):
        stream = StreamingConvolution(kernel6, HALF, 0.0)
        stream.push(0.1, 1.0)
        with pytest.raises(PreconditionError):
            stream.push(0.05, 1.0)


def test_write_results_round_trip():
    t = np.array([0.1, 1 / 3])
    v = np.array([math.pi, 1e-300])
    buf = io.StringIO()
    write_results(t, v, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,value"
    parsed = [tuple(map(float, line.split(","))) for line in lines[1:]]
    assert parsed == list(zip(t.tolist(), v.tolist()))
