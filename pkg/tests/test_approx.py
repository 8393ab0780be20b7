import pytest

from conftest import error_free_config
from ehaoi.approx import cap_probability, find_amax, grid_scan
from ehaoi.errors import Diverged
from ehaoi.model import HarvesterModel, RecoveryModel, SystemConfig, TxMode


def geometric_config(err=0.4):
    """Transmits every slot; age is one plus a run of failures, so P(age >= K) = err**(K-1)."""
    return SystemConfig(1, 2, (TxMode(1, err),), HarvesterModel.constant(1), RecoveryModel(0, 0.0))


def test_error_free_stops_immediately():
    res = find_amax(error_free_config())
    assert res.a_max_final == 2
    assert res.peak_prob_final == 0.0
    assert res.history == [(2, 0.0)]


@pytest.mark.parametrize("k", [2, 5, 9])
def test_cap_probability_is_geometric_tail(k):
    p, _ = cap_probability(geometric_config(), k)
    assert p == pytest.approx(0.4 ** (k - 1), rel=1e-9)


def test_unit_step_finds_first_cap():
    res = find_amax(geometric_config(), step=1)
    assert res.a_max_final == 17
    assert res.peak_prob_final == pytest.approx(0.4**16, rel=1e-8)
    assert grid_scan(geometric_config(), 2, 20, 1e-6) == 17


@pytest.mark.parametrize("step", [4, 5, 7])
def test_coarse_steps_refine_to_the_same_cap(step):
    res = find_amax(geometric_config(), step=step)
    assert res.a_max_final == 17


def test_history_invariant():
    res = find_amax(geometric_config(), step=4)
    *fails, (k_last, p_last) = res.history
    assert k_last == res.a_max_final and p_last <= 1e-6
    assert all(p > 1e-6 for _, p in fails)
    assert all(k < k_last for k, _ in fails)


def test_looser_epsilon_needs_smaller_cap():
    assert find_amax(geometric_config(), epsilon=1e-2).a_max_final == 7  # 0.4**6 = 4.1e-3


def test_diverges_when_cap_never_met():
    with pytest.raises(Diverged):
        find_amax(geometric_config(err=1.0), ceiling=12)


def test_bad_arguments():
    with pytest.raises(ValueError):
        find_amax(geometric_config(), k0=1)
