import numpy as np
import pytest

from sky_nowcast.errors import ConfigError, DataError, ShapeError
from sky_nowcast.modeling.schedule import TrainingSchedule, average_weights, lr_at


@pytest.mark.parametrize("n_epochs", [8, 16])
def test_lr_reaches_a_tenth_at_three_quarters(n_epochs):
    schedule = TrainingSchedule(lr0=1e-3, n_epochs=n_epochs)
    assert schedule.averaging_start == 3 * n_epochs // 4
    assert lr_at(schedule, 0) == pytest.approx(1e-3, abs=1e-12)
    assert abs(lr_at(schedule, schedule.averaging_start) - 1e-4) < 1e-12
    assert lr_at(schedule, n_epochs) == pytest.approx(1e-4)


def test_lr_is_monotone_non_increasing():
    schedule = TrainingSchedule(lr0=0.05, n_epochs=10)
    rates = [lr_at(schedule, epoch) for epoch in range(11)]
    assert all(later <= earlier for earlier, later in zip(rates, rates[1:]))
    assert schedule.averaging_start == 8


def test_lr_rejects_epochs_outside_the_schedule():
    schedule = TrainingSchedule(n_epochs=8)
    with pytest.raises(ConfigError):
        lr_at(schedule, -1)
    with pytest.raises(ConfigError):
        lr_at(schedule, 9)


def test_average_weights():
    averaged = average_weights([np.array([1.0, 2.0]), np.array([3.0, 4.0])])
    assert averaged.tolist() == [2.0, 3.0]
    with pytest.raises(DataError):
        average_weights([])
    with pytest.raises(ShapeError):
        average_weights([np.zeros(2), np.zeros(3)])


@pytest.mark.parametrize(
    "payload",
    [
        {"n_epochs": 3},
        {"lr0": 0},
        {"optimizer": "rmsprop"},
        {"weight_init": "xavier"},
        {"weight_decay": 0.01},
        {"dropout": 0.8},
        {"momentum": 0.9},
        {"batch": "large"},
    ],
)
def test_schedule_rejects_bad_settings(payload):
    with pytest.raises(ConfigError):
        TrainingSchedule.from_mapping(payload)


def test_schedule_from_mapping_round_trip():
    schedule = TrainingSchedule.from_mapping({"lr0": 0.01, "n_epochs": 8, "optimizer": "SGD", "dropout": 0.5})
    assert schedule.optimizer == "sgd"
    assert TrainingSchedule.from_mapping(schedule.to_dict()) == schedule
