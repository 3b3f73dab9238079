import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from contention.game import (
    GameSpec,
    ProfileError,
    SamplingPlan,
    dominates,
    is_nash_base,
    is_pareto_efficient,
    payoff,
    read_region_csv,
    sample_feasible_region,
    utilization,
    write_region_csv,
)
from contention.search import SearchBudget

from oracles import frontier_sum_base, payoff_loop

probs = st.floats(0.0, 1.0, allow_nan=False)


def profiles(n_min=1, n_max=5):
    return st.integers(n_min, n_max).flatmap(lambda n: st.lists(probs, min_size=n, max_size=n))


def valued_profiles(n_min=1, n_max=5):
    return st.integers(n_min, n_max).flatmap(
        lambda n: st.tuples(
            st.lists(st.floats(0.01, 10.0), min_size=n, max_size=n),
            st.lists(probs, min_size=n, max_size=n),
        )
    )


class TestSpec:
    def test_rejects_empty_and_nonpositive(self):
        with pytest.raises(ValueError):
            GameSpec(())
        with pytest.raises(ValueError):
            GameSpec((1.0, 0.0))

    def test_constructors(self):
        assert GameSpec.homogeneous(3).k == (1.0, 1.0, 1.0)
        assert GameSpec.ranked(4).k == (1.0, 2.0, 3.0, 4.0)


class TestPayoff:
    def test_two_users_half(self):
        np.testing.assert_allclose(payoff(GameSpec.homogeneous(2), [0.5, 0.5]), [0.25, 0.25])

    def test_three_users_equal_share(self):
        u = payoff(GameSpec.homogeneous(3), [1 / 3] * 3)
        np.testing.assert_allclose(np.round(u, 5), [0.14815] * 3)

    def test_collision_certainty(self):
        np.testing.assert_array_equal(payoff(GameSpec.homogeneous(2), [1, 1]), [0, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(ProfileError):
            payoff(GameSpec.homogeneous(3), [0.5, 0.5])

    def test_out_of_range(self):
        with pytest.raises(ProfileError):
            payoff(GameSpec.homogeneous(2), [0.5, 1.2])

    def test_vectorized_rows(self):
        spec = GameSpec((1.0, 2.0, 3.0))
        rows = np.random.default_rng(1).uniform(size=(20, 3))
        np.testing.assert_allclose(payoff(spec, rows), [payoff_loop(spec.k, r) for r in rows], atol=1e-15)

    @given(valued_profiles())
    def test_matches_loop_oracle_and_bounds(self, kp):
        k, p = kp
        spec = GameSpec(tuple(k))
        u = payoff(spec, p)
        np.testing.assert_allclose(u, payoff_loop(k, p), rtol=1e-12, atol=1e-15)
        assert np.all(u >= 0) and np.all(u <= np.array(k) + 1e-15)

    @given(valued_profiles())
    def test_full_value_only_at_corner(self, kp):
        k, p = kp
        u = payoff(GameSpec(tuple(k)), p)
        for i in range(len(p)):
            corner = all(p[j] == (1.0 if j == i else 0.0) for j in range(len(p)))
            assert (u[i] == k[i]) == corner

    @given(profiles(1, 6))
    def test_utilization_identity(self, p):
        spec = GameSpec.homogeneous(len(p))
        assert abs(utilization(p) - payoff(spec, p).sum()) < 1e-12
        k = np.linspace(1, 3, len(p))
        assert abs(utilization(p) - np.sum(payoff(GameSpec(tuple(k)), p) / k)) < 1e-12

    @given(profiles(2, 5), st.data())
    def test_monotonicity(self, p, data):
        spec = GameSpec.homogeneous(len(p))
        i = data.draw(st.integers(0, len(p) - 1))
        j = data.draw(st.integers(0, len(p) - 1).filter(lambda v: v != i))
        up = data.draw(st.floats(p[i], 1.0))
        q = list(p)
        q[i] = up
        assert payoff(spec, q)[i] >= payoff(spec, p)[i]
        r = list(p)
        r[j] = data.draw(st.floats(p[j], 1.0))
        assert payoff(spec, r)[i] <= payoff(spec, p)[i]

    @given(valued_profiles(1, 4), st.floats(0.1, 50.0))
    def test_scaling(self, kp, c):
        k, p = kp
        a = payoff(GameSpec(tuple(k)), p)
        b = payoff(GameSpec(tuple(c * v for v in k)), p)
        np.testing.assert_allclose(b, c * a, rtol=1e-12, atol=1e-300)
        assert is_nash_base(GameSpec(tuple(k)), p) == is_nash_base(GameSpec(tuple(c * v for v in k)), p)

    @given(profiles(1, 5), st.data())
    def test_weak_dominance_of_always_transmitting(self, p, data):
        spec = GameSpec.homogeneous(len(p))
        i = data.draw(st.integers(0, len(p) - 1))
        q = list(p)
        q[i] = 1.0
        assert payoff(spec, q)[i] >= payoff(spec, p)[i]


class TestUtilization:
    def test_table_values(self):
        assert round(utilization([1 / 3] * 3), 5) == 0.44444
        assert round(utilization([0.1] * 10), 5) == 0.38742

    def test_sole_transmitter(self):
        assert utilization([1, 0, 0, 0]) == 1.0


class TestNashBase:
    @pytest.mark.parametrize(
        "p,expected", [([1, 0.5], True), ([0.5, 0.5], False), ([1, 1, 1], True)]
    )
    def test_examples(self, p, expected):
        assert is_nash_base(GameSpec.homogeneous(len(p)), p) is expected

    def test_matches_unilateral_grid_search(self):
        rng = np.random.default_rng(7)
        grid = np.round(np.arange(0, 101) * 0.01, 12)
        for trial in range(200):
            n = int(rng.integers(1, 5))
            k = rng.uniform(0.5, 3, n)
            p = rng.uniform(size=n)
            if trial % 3 == 0:
                p[rng.integers(n)] = 1.0
            spec = GameSpec(tuple(k))
            stable = True
            for i in range(n):
                q = np.repeat(p[None, :], len(grid), axis=0)
                q[:, i] = grid
                gains = payoff(spec, q)[:, i] - payoff(spec, p)[i]
                if gains.max() > 1e-9:
                    stable = False
            assert is_nash_base(spec, p) == stable


class TestRegion:
    def test_coarse_grid_contents(self):
        pts, u = sample_feasible_region(GameSpec.homogeneous(2), SamplingPlan(step=0.5))
        rows = {tuple(np.round(r, 12)) for r in u}
        assert (0.25, 0.25) in rows and (1.0, 0.0) in rows and (0.0, 0.0) in rows
        assert len(pts) == 9

    def test_corner_always_included(self):
        pts, u = sample_feasible_region(GameSpec((1.0, 2.0)), SamplingPlan(points=((0.3, 0.3),)))
        assert any(np.array_equal(r, [1, 0]) for r in pts)
        idx = next(j for j, r in enumerate(pts) if np.array_equal(r, [1, 0]))
        np.testing.assert_array_equal(u[idx], [1.0, 0.0])

    def test_bounds(self):
        spec = GameSpec((1.0, 2.0, 0.5))
        _, u = sample_feasible_region(spec, SamplingPlan(step=0.1))
        assert np.all(u >= 0) and np.all(u <= spec.kvec)

    def test_symmetric_point_undominated_on_dense_grid(self):
        _, u = sample_feasible_region(GameSpec.homogeneous(2), SamplingPlan(step=0.002))
        ref = np.array([0.25, 0.25])
        assert not any(dominates(row, ref) for row in u)

    def test_empty_plan(self):
        with pytest.raises(ValueError):
            SamplingPlan().profiles(2)
        with pytest.raises(ValueError):
            SamplingPlan(points=()).profiles(2)

    def test_csv_round_trip(self):
        pts, u = sample_feasible_region(GameSpec((1.0, 2.0)), SamplingPlan(step=0.25))
        buf = io.StringIO()
        write_region_csv(buf, pts, u)
        assert buf.getvalue().splitlines()[0] == "p_1,p_2,u_1,u_2"
        buf.seek(0)
        p2, u2 = read_region_csv(buf)
        np.testing.assert_array_equal(p2, pts)
        np.testing.assert_array_equal(u2, u)

    def test_row_major_order(self):
        pts, _ = sample_feasible_region(GameSpec.homogeneous(2), SamplingPlan(step=0.5))
        np.testing.assert_array_equal(pts[:3], [[0, 0], [0, 0.5], [0, 1]])


class TestPareto:
    def test_symmetric_half_efficient(self):
        v = is_pareto_efficient(GameSpec.homogeneous(2), [0.5, 0.5])
        assert v.efficient
        assert v.to_dict()["budget"]["grid"] == 101

    def test_worked_example_dominated(self):
        v = is_pareto_efficient(GameSpec.homogeneous(2), [0.3, 0.8])
        assert not v.efficient
        base = payoff(GameSpec.homogeneous(2), [0.3, 0.8])
        assert dominates(payoff(GameSpec.homogeneous(2), v.dominated_by), base)
        # the joint move to (0.25, 0.75) improves both users
        assert dominates(payoff(GameSpec.homogeneous(2), [0.25, 0.75]), base)

    def test_single_user(self):
        assert is_pareto_efficient(GameSpec.homogeneous(1), [1.0]).efficient
        assert not is_pareto_efficient(GameSpec.homogeneous(1), [0.5]).efficient

    def test_agrees_with_frontier_oracle(self):
        rng = np.random.default_rng(3)
        budget = SearchBudget(grid=61)
        for trial in range(40):
            n = int(rng.integers(2, 4))
            spec = GameSpec(tuple(rng.uniform(0.5, 3, n)))
            if trial % 2:
                p = rng.dirichlet(np.ones(n))
            else:
                p = rng.uniform(0.05, 0.95, n)
            v = is_pareto_efficient(spec, p, budget)
            assert v.efficient == frontier_sum_base(p), (p, v)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            p = rng.uniform(0.05, 0.9, 2)
            k = rng.uniform(0.5, 2, 2)
            a = is_pareto_efficient(GameSpec(tuple(k)), p).efficient
            b = is_pareto_efficient(GameSpec(tuple(1000 * k)), p).efficient
            c = is_pareto_efficient(GameSpec(tuple(k * [1e-3, 7.0])), p).efficient
            assert a == b == c
