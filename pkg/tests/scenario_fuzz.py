"""Random scenario configs for fuzz sweeps (shared by the test modules)."""

from __future__ import annotations

import random

from stringer.simulator import CuratorBehavior, LatencySpec, ReporterBehavior, ScenarioConfig

EVENT_TYPES = (
    "town_hall", "festival", "sports_game", "art_show", "public_talk",
    "hackathon", "street_market",  # the last one exercises the generic fallback
)


def random_config(rng: random.Random, index: int) -> ScenarioConfig:
    """One fuzzed scenario: probabilities, counts, and budgets all vary."""
    n_reporters = rng.choice((0, 2, 3, 3, 4, 4, 5, 5, 6, 6, 8))
    low = rng.randint(1, 4)
    latency = LatencySpec(low=low, high=low + rng.randint(0, 6))
    if rng.random() < 0.3 and n_reporters:
        target = tuple(rng.randint(3, 16) for _ in range(n_reporters))
    else:
        target = rng.randint(6, 16)
    reporter = ReporterBehavior(
        response_latency_minutes=latency,
        completion_probability=rng.choice((1.0, 1.0, 1.0, round(rng.uniform(0.6, 1.0), 3))),
        submissions_target=target,
    )
    curator = CuratorBehavior(
        approve_probability=round(rng.random(), 3),
        feedback_probability=round(rng.random(), 3),
        bonus_rate=rng.randint(0, 3),
        review_latency_minutes=LatencySpec(1, rng.randint(1, 5)),
    )
    source = rng.choice(("paid", "volunteer"))
    return ScenarioConfig(
        name=f"fuzz-{index}",
        event_type=rng.choice(EVENT_TYPES),
        n_reporters=n_reporters,
        reporter_source=source,
        reporter=reporter,
        curator=curator,
        budget_cap_cents=rng.choice((15_000, 15_000, 15_000, 15_000, 2_000, 800)),
        seed=rng.getrandbits(48),
        event_duration_minutes=rng.randint(60, 150),
        recruitment_fee_cents=rng.choice((0, 0, 0, 100)) if source == "paid" else 0,
        writer=rng.choice(("requester", "requester", "paid_worker")),
    )
