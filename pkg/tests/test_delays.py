import random

import pytest

from rackslot.delays import (
    DelayModel,
    exchange_base_path_ns,
    sample_exchange_delay,
    sample_switching_delay,
    split_exchange_extra,
)


def test_constant_exchange_option_bypasses_sampling():
    model = DelayModel(exchange_constant_ns=1060)
    rng = random.Random(1)
    assert all(sample_exchange_delay(model, rng) == 1060 for _ in range(50))


def test_sampled_exchange_stays_inside_anchors():
    model = DelayModel()
    rng = random.Random(7)
    samples = sorted(sample_exchange_delay(model, rng) for _ in range(20_000))
    assert samples[0] == 1000
    assert samples[-1] == 14000
    assert 1055 <= samples[len(samples) // 2] <= 1065  # median anchor holds
    # right-skewed: mean well above median, small clamp masses at the ends
    mean = sum(samples) / len(samples)
    assert 1300 < mean < 1500
    at_floor = sum(s == 1000 for s in samples) / len(samples)
    at_cap = sum(s == 14000 for s in samples) / len(samples)
    assert 0.004 < at_floor < 0.014
    assert 0.001 < at_cap < 0.008


def test_switching_delay_constant_by_default():
    model = DelayModel()
    rng = random.Random(3)
    assert sample_switching_delay(model, rng) == 347


def test_switching_jitter_band():
    model = DelayModel(switching_jitter=True)
    rng = random.Random(3)
    samples = {sample_switching_delay(model, rng) for _ in range(5000)}
    assert min(samples) >= 346
    assert max(samples) <= 508
    assert len(samples) > 100  # actually spread, not a constant


def test_base_path_for_default_constants():
    # 2 * (nic 100 + prop 50 + 6 ns control serialization) + switching 347
    assert exchange_base_path_ns(DelayModel(), 6) == 659


def test_split_charges_odd_nanosecond_to_request_leg():
    assert split_exchange_extra(1060, 659) == (201, 200)
    assert split_exchange_extra(661, 659) == (1, 1)


def test_split_clamps_when_base_exceeds_sample():
    assert split_exchange_extra(500, 659) == (0, 0)


def test_model_validation():
    with pytest.raises(ValueError):
        DelayModel(exchange_min_ns=0)
    with pytest.raises(ValueError):
        DelayModel(exchange_min_ns=2000, exchange_median_ns=1000)
    with pytest.raises(ValueError):
        DelayModel(exchange_sigma=0.0)
    with pytest.raises(ValueError):
        DelayModel(exchange_constant_ns=0)
    with pytest.raises(ValueError):
        DelayModel(switching_ns=0)
    with pytest.raises(ValueError):
        DelayModel(switching_jitter=True, switching_min_ns=500,
                   switching_max_ns=400)


def test_degenerate_spread_returns_median():
    model = DelayModel(exchange_min_ns=1000, exchange_median_ns=1000,
                       exchange_max_ns=1000)
    assert sample_exchange_delay(model, random.Random(1)) == 1000
