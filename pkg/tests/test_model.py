import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import minimal_config, random_config
from ehaoi.errors import (
    ConfigError,
    EmptyModeList,
    InfeasibleInstance,
    InvalidStochasticMatrix,
    NegativeQuantity,
)
from ehaoi.model import (
    HarvesterModel,
    RecoveryModel,
    SystemConfig,
    TxMode,
    config_hash,
    dump_config,
    load_config,
    scale_energies,
    validate_config,
)
from ehaoi.presets import two_mode_lte


def test_minimal_instance_is_valid():
    cfg = minimal_config()
    assert validate_config(cfg) is cfg


def test_bad_row_sum():
    cfg = minimal_config().replace(harvester=HarvesterModel(((0.9, 0.2), (0.5, 0.5)), (0, 1)))
    with pytest.raises(InvalidStochasticMatrix):
        validate_config(cfg)


def test_row_sum_tolerance_is_tight():
    near = minimal_config().replace(harvester=HarvesterModel(((0.5, 0.5 + 5e-13), (0.5, 0.5)), (0, 1)))
    validate_config(near)
    off = minimal_config().replace(harvester=HarvesterModel(((0.5, 0.5 + 1e-11), (0.5, 0.5)), (0, 1)))
    with pytest.raises(InvalidStochasticMatrix):
        validate_config(off)


def test_lte_modes_with_on_off_harvester_valid():
    cfg = two_mode_lte(p_rec=0.5, n_rec=2, harvest_on=2, b_max=10)
    validate_config(cfg)
    assert cfg.harvester.matrix[0][0] == 0.9 and cfg.harvester.matrix[0][1] == pytest.approx(0.1)


def test_empty_modes():
    with pytest.raises(EmptyModeList):
        validate_config(minimal_config().replace(modes=()))


def test_negative_quantities():
    with pytest.raises(NegativeQuantity):
        validate_config(minimal_config().replace(b_max=-1))
    with pytest.raises(NegativeQuantity):
        validate_config(minimal_config().replace(harvester=HarvesterModel(((1.0,),), (-2,))))


def test_infeasible_instance():
    cfg = minimal_config().replace(b_max=1, modes=(TxMode(5, 0.1),))
    with pytest.raises(InfeasibleInstance):
        validate_config(cfg)


def test_all_violations_reported():
    cfg = SystemConfig(-1, 1, (TxMode(0, 2.0),), HarvesterModel(((0.7,),), (1,)), RecoveryModel(-1, 0.5))
    with pytest.raises(ConfigError) as info:
        validate_config(cfg)
    assert len(info.value.violations) == 6
    assert isinstance(info.value, NegativeQuantity)


@pytest.mark.parametrize(
    "powers, n_rec, scaled, increments",
    [
        ((2, 4), 2, (4, 8), (2, 4)),
        ((3,), 2, (6,), (3,)),
        ((2, 4), 0, (2, 4), (0, 0)),
        ((3, 6), 3, (9, 18), (3, 6)),
    ],
)
def test_scale_energies(powers, n_rec, scaled, increments):
    cfg = SystemConfig(10, 5, tuple(TxMode(p, 0.1) for p in powers),
                       HarvesterModel.constant(2), RecoveryModel(n_rec, 0.5))
    sc = scale_energies(validate_config(cfg))
    assert tuple(sc.powers) == scaled
    assert tuple(sc.increments) == increments
    assert sc.b_max == 10 * max(n_rec, 1)
    assert tuple(sc.harvest) == (2 * max(n_rec, 1),)


def test_no_recovery_leaves_config_unchanged():
    cfg = minimal_config()
    sc = scale_energies(cfg)
    assert sc.scale == 1 and sc.b_max == cfg.b_max and tuple(sc.powers) == (2,)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_scale_round_trip_and_exact_increments(seed):
    cfg = validate_config(random_config(np.random.default_rng(seed)))
    sc = scale_energies(cfg)
    assert sc.descale() == cfg
    if cfg.recovery.n_rec > 0:
        assert np.array_equal(cfg.recovery.n_rec * sc.increments, sc.powers)


def test_yaml_round_trip(tmp_path):
    cfg = two_mode_lte(p_rec=0.3, n_rec=2, harvest_on=2, b_max=7)
    path = tmp_path / "cfg.yaml"
    dump_config(cfg, path)
    back = load_config(path)
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)


def test_malformed_yaml_mapping(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("b_max: 3\na_max: 4\n")
    with pytest.raises(ConfigError):
        load_config(path)
