import numpy as np
import pytest

from ehaoi.rewards import RewardSpec, reward, reward_vector


def test_peak_reward():
    spec = RewardSpec.peak(-1.0)
    assert reward(20, 20, spec) == -1.0
    assert reward(19, 20, spec) == 0.0


def test_average_reward():
    assert reward(7, 20, RewardSpec.average()) == -7.0


@pytest.mark.parametrize("age", range(1, 11))
def test_weighted_one_is_average_on_clamped_space(age):
    assert reward(age, 10, RewardSpec.weighted(1.0)) == reward(age, 10, RewardSpec.average())


def test_weighted_zero_is_scaled_peak():
    ages = np.arange(1, 13)
    w0 = reward_vector(ages, 12, RewardSpec.weighted(0.0))
    pk = reward_vector(ages, 12, RewardSpec.peak(-12.0))
    assert np.array_equal(w0, pk)
    assert np.count_nonzero(w0) == 1


def test_weighted_mid():
    spec = RewardSpec.weighted(0.3)
    assert reward(4, 10, spec) == pytest.approx(-1.2)
    assert reward(10, 10, spec) == -10.0


def test_vector_matches_scalar():
    ages = np.arange(1, 9)
    for spec in (RewardSpec.peak(-2.5), RewardSpec.average(), RewardSpec.weighted(0.4)):
        assert np.array_equal(reward_vector(ages, 8, spec), [reward(a, 8, spec) for a in ages])


@pytest.mark.parametrize("kwargs", [dict(objective="peak", r_prime=0.0), dict(objective="weighted", alpha=1.5),
                                    dict(objective="median")])
def test_invalid_specs(kwargs):
    with pytest.raises(ValueError):
        RewardSpec(**kwargs)
