import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from starmem import AbstractMemory, sa_init, sa_update


class TestInit:
    def test_single_token_seed(self):
        v = np.array([1.0, 2.0])
        mem = sa_init(1, [v])
        np.testing.assert_array_equal(mem.tokens, [v])
        assert mem.mass.tolist() == [1.0]

    def test_cycling_when_fewer_inputs(self):
        a, b = np.array([1.0]), np.array([2.0])
        mem = sa_init(3, [a, b])
        np.testing.assert_array_equal(mem.tokens[:, 0], [1.0, 2.0, 1.0])
        assert mem.mass.tolist() == [1.0, 1.0, 1.0]

    def test_direct_seed_when_enough_inputs(self, rng):
        inputs = [rng.normal(size=4) for _ in range(30)]
        mem = sa_init(25, inputs)
        np.testing.assert_array_equal(mem.tokens, np.stack(inputs[:25]))

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            sa_init(3, [])

    def test_degenerate_temperature_falls_back(self):
        mem = sa_init(4, [np.zeros(3)])
        assert mem.temperature == 1.0


class TestUpdate:
    def test_empty_update_is_identity(self, rng):
        mem = sa_init(3, [rng.normal(size=2)])
        out = sa_update(mem, [])
        assert out is mem

    def test_saturated_softmax_targets_nearest_token(self):
        # other token is >> 100 temperatures away, so attention saturates
        mem = AbstractMemory(
            tokens=np.array([[0.0], [50.0]]),
            mass=np.array([1.0, 1.0]),
            temperature=0.1,
        )
        out = sa_update(mem, [np.array([0.0])])
        # all attention lands on the identical token, which stays put
        assert out.mass[0] == pytest.approx(2.0, abs=1e-6)
        assert out.mass[1] == pytest.approx(1.0, abs=1e-6)
        assert out.tokens[0, 0] == pytest.approx(0.0, abs=1e-9)

    def test_single_token_is_running_mean(self, rng):
        seed = rng.normal(size=3)
        inputs = [rng.normal(size=3) for _ in range(10)]
        mem = sa_init(1, [seed])
        for x in inputs:
            mem = sa_update(mem, [x])
        expected = np.mean([seed] + inputs, axis=0)
        np.testing.assert_allclose(mem.tokens[0], expected, rtol=1e-9)
        assert mem.total_mass == pytest.approx(11.0, abs=1e-9)

    def test_mass_conservation_over_stream(self, rng):
        mem = sa_init(4, [rng.normal(size=5) for _ in range(4)])
        for i in range(50):
            mem = sa_update(mem, [rng.normal(size=5)])
        assert mem.total_mass == pytest.approx(4 + 50, abs=1e-9)

    def test_mass_conservation_batched(self, rng):
        mem = sa_init(3, [rng.normal(size=2) for _ in range(3)])
        mem = sa_update(mem, [rng.normal(size=2) for _ in range(7)])
        assert mem.total_mass == pytest.approx(3 + 7, abs=1e-9)

    def test_mass_nondecreasing(self, rng):
        mem = sa_init(3, [rng.normal(size=2) for _ in range(3)])
        for _ in range(20):
            prev = mem.mass.copy()
            mem = sa_update(mem, [rng.normal(size=2)])
            assert np.all(mem.mass >= prev)

    def test_tokens_stay_in_seen_range(self, rng):
        inputs = [rng.uniform(-3, 3, size=4) for _ in range(30)]
        mem = sa_init(5, inputs[:5])
        lo = np.min(inputs[:5], axis=0)
        hi = np.max(inputs[:5], axis=0)
        for x in inputs[5:]:
            lo = np.minimum(lo, x)
            hi = np.maximum(hi, x)
            mem = sa_update(mem, [x])
            assert np.all(mem.tokens >= lo - 1e-9)
            assert np.all(mem.tokens <= hi + 1e-9)

    def test_batch_permutation_invariance(self, rng):
        mem = sa_init(4, [rng.normal(size=3) for _ in range(4)])
        batch = [rng.normal(size=3) for _ in range(6)]
        a = sa_update(mem, batch)
        b = sa_update(mem, batch[::-1])
        np.testing.assert_allclose(a.tokens, b.tokens, rtol=1e-12)
        np.testing.assert_allclose(a.mass, b.mass, rtol=1e-12)

    def test_dim_mismatch_rejected(self, rng):
        mem = sa_init(2, [rng.normal(size=3)])
        with pytest.raises(ValueError):
            sa_update(mem, [rng.normal(size=4)])


@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 6), st.integers(1, 20))
@settings(max_examples=40, deadline=None)
def test_unit_mass_per_input_property(seed, n_abs, n_inputs):
    rng = np.random.default_rng(seed)
    mem = sa_init(n_abs, [rng.normal(size=3) for _ in range(min(n_abs, 2))])
    for _ in range(n_inputs):
        before = mem.total_mass
        mem = sa_update(mem, [rng.normal(size=3)])
        assert mem.total_mass == pytest.approx(before + 1.0, abs=1e-9)
