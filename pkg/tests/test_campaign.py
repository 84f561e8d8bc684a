import json

import numpy as np
import pytest

from seqoed import (
    CampaignConfig,
    CampaignStatus,
    Criterion,
    DesignSpace,
    DomainError,
    ScriptedSource,
    SimulatedSource,
    UnweightedDesign,
    campaign_step,
    new_campaign,
    propose_next,
    record_measurements,
    run_campaign,
    scaled_distance,
)
from seqoed import casestudy
from seqoed.storage import state_to_dict


def small_config(**overrides):
    base = dict(
        space=casestudy.oed_grid(),
        noise=casestudy.measurement_noise(),
        alpha=0.5,
        epsilon=5e-5,
        min_batch_weight=0.95,
        max_batch_size=3,
        budget=27,
        progress_tol=0.1,
        criterion=Criterion.D,
        seed=0,
        n_starts=6,
    )
    base.update(overrides)
    return CampaignConfig(**base)


class TestScaledDistance:
    def test_identical_points(self):
        assert scaled_distance((0.3, 2e5), (0.3, 2e5), casestudy.oed_grid()) == 0.0

    def test_mole_fraction_dominates(self):
        d = scaled_distance((0.2, 1e5), (0.3, 1e5), casestudy.oed_grid())
        assert d == pytest.approx(0.1, abs=1e-12)

    def test_pressure_full_range(self):
        d = scaled_distance((0.5, 1e5), (0.5, 3e5), casestudy.oed_grid())
        assert d == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_coordinate_warns_and_excludes(self):
        space = DesignSpace([[0.1, 2e5], [0.9, 2e5]])  # no pressure extent
        with pytest.warns(UserWarning):
            d = scaled_distance((0.1, 1e5), (0.5, 3e5), space)
        assert d == pytest.approx(0.5)


class TestConfigValidation:
    def test_zero_batch_size_rejected(self):
        with pytest.raises(DomainError):
            small_config(max_batch_size=0)

    @pytest.mark.parametrize(
        "field,value",
        [
            ("alpha", 1.0),
            ("epsilon", 0.0),
            ("min_batch_weight", 0.0),
            ("min_batch_weight", 1.5),
            ("budget", 0),
            ("progress_tol", 0.0),
            ("n_sam", 1),
        ],
    )
    def test_invalid_fields_rejected(self, field, value):
        with pytest.raises(DomainError):
            small_config(**{field: value})

    def test_initial_design_larger_than_budget(self):
        with pytest.raises(DomainError):
            new_campaign(
                casestudy.stage_design("init", actual=False), small_config(budget=3)
            )


class TestStateMachine:
    def test_record_requires_pending(self):
        state = new_campaign(casestudy.stage_design("init", actual=False), small_config())
        state = record_measurements(
            state, [(p, (0.5, 380.0)) for p in state.pending]
        )
        with pytest.raises(DomainError):
            record_measurements(state, [])

    def test_record_count_mismatch(self):
        state = new_campaign(casestudy.stage_design("init", actual=False), small_config())
        with pytest.raises(DomainError):
            record_measurements(state, [((0.1, 1e5), (0.5, 380.0))])

    def test_propose_requires_ready(self, model):
        state = new_campaign(casestudy.stage_design("init", actual=False), small_config())
        with pytest.raises(DomainError):
            propose_next(state, small_config(), model)


class TestTermination:
    def test_budget_rule_fires_immediately(self, model):
        config = small_config(budget=6)
        source = SimulatedSource(model, casestudy.THETA_TOT, config.noise, seed=5)
        init = casestudy.stage_design("init", actual=False)
        state = campaign_step(new_campaign(init, config), config, source, model)
        assert state.status is CampaignStatus.TERMINATED_BUDGET
        assert state.n_measured == 6  # unaffordable batch not performed
        assert len(state.unfunded_batch) >= 1

    def test_progress_rule_with_space_equal_to_design(self, model):
        # every candidate is an already-measured point, so the next proposal
        # must consist of near-duplicates and the progress rule fires
        init = casestudy.stage_design("init", actual=False)
        space = DesignSpace(np.unique(init.points, axis=0))
        config = small_config(space=space)
        source = SimulatedSource(model, casestudy.THETA_TOT, config.noise, seed=6)
        state = campaign_step(new_campaign(init, config), config, source, model)
        assert state.status is CampaignStatus.TERMINATED_PROGRESS
        # the terminating batch is still measured and included
        assert state.n_measured == 6 + len(state.reports[-1]["batch"])

    def test_step_on_terminated_campaign_raises(self, model):
        config = small_config(budget=6)
        source = SimulatedSource(model, casestudy.THETA_TOT, config.noise, seed=5)
        init = casestudy.stage_design("init", actual=False)
        state = campaign_step(new_campaign(init, config), config, source, model)
        with pytest.raises(DomainError):
            campaign_step(state, config, source, model)


@pytest.mark.slow
class TestFullCampaigns:
    def test_scripted_replay_of_recorded_study(self, model):
        config = casestudy.study_campaign_config()
        source = ScriptedSource(casestudy.stage_dataset("oed3"))
        init = casestudy.stage_design("init", actual=False)
        states = []
        final = run_campaign(init, config, source, model, on_step=states.append)
        assert final.status is CampaignStatus.TERMINATED_PROGRESS
        batches = [r["batch"] for r in final.reports]
        assert all(1 <= len(b) <= 3 for b in batches)
        assert len(batches) == 3
        assert final.n_measured == 15
        for r in final.reports:
            assert r["min_sensitivity"] >= -config.epsilon
        # append-only prefix property across intermediate states
        for earlier, later in zip(states, states[1:]):
            n = earlier.n_measured
            assert later.records[:n] == earlier.records

    def test_deterministic_replay(self, model):
        config = casestudy.study_campaign_config()
        init = casestudy.stage_design("init", actual=False)
        runs = []
        for _ in range(2):
            source = ScriptedSource(casestudy.stage_dataset("oed3"))
            final = run_campaign(init, config, source, model)
            runs.append(json.dumps(state_to_dict(final), sort_keys=True))
        assert runs[0] == runs[1]

    def test_simulated_campaign_invariants(self, model):
        config = casestudy.study_campaign_config()
        source = SimulatedSource(model, casestudy.THETA_TOT, config.noise, seed=123)
        init = casestudy.stage_design("init", actual=False)
        final = run_campaign(init, config, source, model)
        assert final.terminated
        assert final.n_measured <= config.budget
        assert all(len(r["batch"]) <= config.max_batch_size for r in final.reports)
        assert all(r["min_sensitivity"] >= -config.epsilon for r in final.reports)
        assert len(final.estimates) == len(final.reports)
