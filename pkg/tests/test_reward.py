import pytest
from hypothesis import given, strategies as st

from gril.core import ContractError, ProblemKind, RewardConfig
from gril.reward import (
    comp_reward,
    detect_reward,
    recombine,
    solve_reward,
    trajectory_reward,
)

DEFAULTS = RewardConfig()
TOL = 1e-12


class TestDetectReward:
    def test_first_turn(self):
        assert detect_reward(0, DEFAULTS) == pytest.approx(1.0, abs=TOL)

    def test_one_prior_turn(self):
        assert detect_reward(1, DEFAULTS) == pytest.approx(0.5, abs=TOL)

    def test_three_prior_turns(self):
        assert detect_reward(3, DEFAULTS) == pytest.approx(0.125, abs=TOL)

    def test_negative_n_prior(self):
        with pytest.raises(ContractError):
            detect_reward(-1, DEFAULTS)

    @given(st.integers(min_value=0, max_value=30),
           st.floats(min_value=0.05, max_value=0.95),
           st.floats(min_value=0.1, max_value=5.0))
    def test_monotone_decay_and_bound(self, n, gamma, r_base):
        cfg = RewardConfig(gamma_d=gamma, r_base=r_base)
        r = detect_reward(n, cfg)
        assert detect_reward(n + 1, cfg) < r
        assert 0 < r <= cfg.r_base
        assert (r == cfg.r_base) == (n == 0)

    def test_no_decay_override_is_constant(self):
        # gamma_d = 1 fails validation but is constructible for analysis runs.
        cfg = RewardConfig(gamma_d=1.0)
        assert {detect_reward(n, cfg) for n in range(5)} == {1.0}


class TestSolveReward:
    def test_correct(self):
        assert solve_reward(True, DEFAULTS) == 1.0

    def test_wrong(self):
        assert solve_reward(False, DEFAULTS) == 0.0

    def test_scaled(self):
        assert solve_reward(True, RewardConfig(r_correct=2)) == 2.0


class TestCompReward:
    def test_clean_correct(self):
        assert comp_reward(True, False, DEFAULTS) == pytest.approx(1.0, abs=TOL)

    def test_correct_with_penalty(self):
        assert comp_reward(True, True, DEFAULTS) == pytest.approx(-1.0, abs=TOL)

    def test_wrong_with_penalty(self):
        assert comp_reward(False, True, DEFAULTS) == pytest.approx(-2.0, abs=TOL)


class TestTrajectoryReward:
    def test_detect_turn1_plus_solve(self):
        bd = trajectory_reward(ProblemKind.INCOMPLETE, True, 0, True, False, DEFAULTS)
        assert bd.total == pytest.approx(1.0, abs=TOL)

    def test_late_detect_wrong_solve(self):
        bd = trajectory_reward(ProblemKind.INCOMPLETE, True, 1, False, False, DEFAULTS)
        assert bd.total == pytest.approx(0.15, abs=TOL)

    def test_complete_with_unnecessary_clarify(self):
        bd = trajectory_reward(ProblemKind.COMPLETE, False, 0, True, True, DEFAULTS)
        assert bd.total == pytest.approx(-1.0, abs=TOL)

    def test_detected_on_complete_is_contract_error(self):
        with pytest.raises(ContractError):
            trajectory_reward(ProblemKind.COMPLETE, True, 0, True, False, DEFAULTS)

    @given(
        st.sampled_from(list(ProblemKind)),
        st.booleans(),
        st.integers(min_value=0, max_value=10),
        st.booleans(),
        st.booleans(),
        st.floats(min_value=0.05, max_value=0.95),
    )
    def test_decomposition_identity(self, kind, detected, n_prior, solved, unc, gamma):
        if detected and kind is not ProblemKind.INCOMPLETE:
            detected = False
        cfg = RewardConfig(gamma_d=gamma)
        bd = trajectory_reward(kind, detected, n_prior, solved, unc, cfg)
        assert recombine(kind, bd, cfg) == bd.total  # bit-for-bit
