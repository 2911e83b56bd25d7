import pytest

from seqdec.core import evaluate_final_reward, make_rng, simulate
from seqdec.policies import PolicySpec
from seqdec.problems import NoFinalDesignError, PureLearningModel


def test_diffuse_prior_first_observation_is_exact_estimate():
    m = PureLearningModel(truths=(1.0, 2.0), sigma_w=0.5, budget=1)
    tr = simulate(m, lambda s: 1, 4)
    b = tr.final_state.beliefs[1]
    assert b.mean == tr.records[0].exogenous and b.precision == 4.0


def test_zero_budget_diffuse_prior_has_no_final_design():
    m = PureLearningModel(budget=0)
    with pytest.raises(NoFinalDesignError):
        m.final_design(m.initial_state())


def test_zero_budget_informative_prior_uses_prior():
    m = PureLearningModel(truths=(0.0, 1.0), prior_means=(0.3, 0.1), prior_precisions=(1.0, 1.0), budget=0)
    assert m.final_design(m.initial_state()) == 0


def test_crn_outcomes_do_not_depend_on_choice():
    # the same seed gives the same noise draw for an alternative whichever arm was chosen before
    m = PureLearningModel(truths=(0.0, 0.0, 0.0), sigma_w=1.0, budget=2)
    a = simulate(m, lambda s: 0 if s.n == 0 else 2, 9)
    b = simulate(m, lambda s: 1 if s.n == 0 else 2, 9)
    assert a.records[1].exogenous == b.records[1].exogenous


def test_ie_beats_always_first_arm():
    m = PureLearningModel(budget=15)
    ie = evaluate_final_reward(m, PolicySpec("CFA-IE", {"theta_ie": 2.0}), 0, 30, 10)
    fixed = evaluate_final_reward(m, PolicySpec("Constant", {"x": 0}), 0, 30, 10)
    assert ie.mean > fixed.mean


def test_test_reward_draws():
    m = PureLearningModel(truths=(1.0,), sigma_w=0.0)
    assert m.test_reward(0, make_rng(0), 3) == [1.0, 1.0, 1.0]


def test_validation():
    with pytest.raises(ValueError):
        PureLearningModel(budget=-1)
    with pytest.raises(ValueError):
        PureLearningModel(prior_precisions=(-1.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        PureLearningModel(prior_means=(0.0,))
    assert PureLearningModel().check_decision(None, 3) is not None
