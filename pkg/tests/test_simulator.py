"""Simulator behavior: scenario mechanics, determinism, degenerate crowds."""

from __future__ import annotations

import json
import random
from pathlib import Path

import pytest

from stringer.engine import replay_lines
from stringer.model import ValidationError
from stringer.simulator import (
    CuratorBehavior,
    LatencySpec,
    ReporterBehavior,
    ScenarioConfig,
    recount_log,
    run_scenario,
)

from scenario_fuzz import random_config

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios" / "table1"


def small_config(**overrides) -> ScenarioConfig:
    fields = dict(
        name="mini",
        event_type="festival",
        n_reporters=2,
        reporter_source="paid",
        reporter=ReporterBehavior(
            response_latency_minutes=LatencySpec(2, 4),
            completion_probability=1.0,
            submissions_target=(4, 3),
        ),
        curator=CuratorBehavior(approve_probability=0.8, feedback_probability=0.5,
                                bonus_rate=1),
        seed=7,
        event_duration_minutes=90,
    )
    fields.update(overrides)
    return ScenarioConfig(**fields)


class TestConfig:
    def test_from_file_round_trip(self):
        config = ScenarioConfig.from_file(SCENARIO_DIR / "festival.json")
        assert config.n_reporters == 2
        assert config.reporter.targets(2) == [14, 13]
        assert config.expected == {"n_workers": 2, "submitted_items": 27}

    def test_probability_bounds_validated(self):
        with pytest.raises(ValidationError):
            CuratorBehavior(approve_probability=1.2)

    def test_negative_reporters_rejected(self):
        with pytest.raises(ValidationError):
            small_config(n_reporters=-1)

    def test_target_list_length_must_match(self):
        with pytest.raises(ValidationError):
            small_config(
                reporter=ReporterBehavior(submissions_target=(1, 2, 3)), n_reporters=2
            )


class TestScenarioRuns:
    def test_targets_met_exactly(self):
        result = run_scenario(small_config())
        assert result.submitted_items == 7
        assert result.n_workers == 2
        assert result.ok

    def test_same_seed_byte_identical_logs(self):
        a = run_scenario(small_config())
        b = run_scenario(small_config())
        assert a.log_bytes == b.log_bytes
        assert a.to_dict() == b.to_dict()

    def test_different_seed_different_log(self):
        a = run_scenario(small_config())
        b = run_scenario(small_config(seed=8))
        assert a.log_bytes != b.log_bytes

    def test_direct_transport_matches_http_metrics(self):
        via_http = run_scenario(small_config(), transport="http")
        direct = run_scenario(small_config(), transport="direct")
        assert via_http.log_bytes == direct.log_bytes
        assert via_http.to_dict() == direct.to_dict()

    def test_zero_reporters_reports_zeros(self):
        result = run_scenario(small_config(n_reporters=0, reporter=ReporterBehavior()))
        assert result.submitted_items == 0
        assert result.report_word_count == 0
        assert result.n_workers == 0
        assert result.ok

    def test_persisted_log_replays_clean(self, tmp_path):
        result = run_scenario(small_config(), data_dir=tmp_path)
        lines = (tmp_path / f"{result.event_id}.ndjson").read_text().splitlines()
        state = replay_lines(lines)
        assert state.event.status.value == "reported"
        assert len(state.submission_order) == result.submitted_items

    def test_recount_matches_result(self, tmp_path):
        result = run_scenario(small_config(), data_dir=tmp_path)
        recount = recount_log(
            (tmp_path / f"{result.event_id}.ndjson").read_text().splitlines()
        )
        assert recount["submitted"] == result.submitted_items
        assert recount["approved"] == result.approved_items
        assert recount["cost"] == result.cost_cents

    def test_paid_writer_counts_as_worker(self):
        result = run_scenario(small_config(writer="paid_worker"))
        assert result.n_workers == 3  # 2 reporters + the writer

    def test_tight_budget_never_overruns(self):
        result = run_scenario(small_config(budget_cap_cents=700))
        assert result.ok
        assert result.cost_cents <= 700

    def test_dropouts_reduce_but_never_break(self):
        config = small_config(
            reporter=ReporterBehavior(
                response_latency_minutes=LatencySpec(2, 4),
                completion_probability=0.5,
                submissions_target=(6, 6),
            ),
            seed=99,
        )
        result = run_scenario(config)
        assert result.ok
        assert result.submitted_items <= 12


class TestFuzzGenerator:
    def test_generator_is_deterministic(self):
        a = [random_config(random.Random(5), i) for i in range(10)]
        b = [random_config(random.Random(5), i) for i in range(10)]
        assert a == b

    def test_sampled_configs_run_clean(self):
        rng = random.Random(12345)
        for index in range(5):
            config = random_config(rng, index)
            result = run_scenario(config, transport="direct")
            assert result.ok, result.invariant_violations
