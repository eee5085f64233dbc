import numpy as np
import pytest

from sky_nowcast.errors import ConfigError, DataError, ShapeError
from sky_nowcast.modeling.targets import (
    TargetKind,
    TargetVariable,
    UndefinedTargetError,
    from_target,
    loss,
    normalizer,
    targets,
    to_target,
)
from sky_nowcast.solar.clearsky import ClearSkyContext


@pytest.mark.parametrize(
    ("label", "kind", "weighted"),
    [
        ("ghi", TargetVariable.GHI, False),
        ("GHI", TargetVariable.GHI, False),
        ("kt", TargetVariable.KT_CLEAR, False),
        ("Kt", TargetVariable.KT_CLEARNESS, False),
        ("kt_w", TargetVariable.KT_CLEAR, True),
        ("Kt_w", TargetVariable.KT_CLEARNESS, True),
    ],
)
def test_parse(label, kind, weighted):
    parsed = TargetKind.parse(label)
    assert parsed.kind is kind
    assert parsed.weighted is weighted
    assert TargetKind.from_dict(parsed.to_dict()) == parsed


def test_parse_rejects_unknown_and_weighted_ghi():
    with pytest.raises(ConfigError):
        TargetKind.parse("dni")
    with pytest.raises(ConfigError):
        TargetKind.parse("ghi_w")
    with pytest.raises(ConfigError):
        TargetKind.from_dict({"kind": "clearness"})


def test_normalizer_per_kind():
    ctx = ClearSkyContext(i_clr=400.0, i_extr=500.0)
    assert normalizer(ctx, TargetKind.parse("ghi")) == 1.0
    assert normalizer(ctx, TargetKind.parse("kt")) == 400.0
    assert normalizer(ctx, TargetKind.parse("Kt")) == 500.0
    with pytest.raises(UndefinedTargetError):
        normalizer(ClearSkyContext(i_clr=0.0, i_extr=0.0), TargetKind.parse("kt"))


def test_target_round_trip(make_pair):
    pair = make_pair(ghi=300.0)
    kind = TargetKind.parse("kt")
    assert to_target(pair, kind) == pytest.approx(0.75)
    assert from_target(0.75, pair.ctx, kind) == pytest.approx(300.0)
    assert targets([pair, make_pair(ghi=100.0)], TargetKind.parse("Kt")).tolist() == pytest.approx([0.6, 0.2])


@pytest.mark.parametrize("label", ["kt", "Kt"])
def test_weighted_loss_equals_ghi_space_mse(label):
    rng = np.random.default_rng(42)
    kind = TargetKind.parse(label + "_w")
    for _ in range(1000):
        size = int(rng.integers(1, 9))
        extr = rng.uniform(100.0, 1400.0, size)
        clr = extr * rng.uniform(0.5, 1.0, size)
        contexts = [ClearSkyContext(i_clr=float(c), i_extr=float(e)) for c, e in zip(clr, extr)]
        norm = clr if kind.kind is TargetVariable.KT_CLEAR else extr
        y = rng.uniform(0.0, 1.2, size)
        y_hat = rng.uniform(0.0, 1.2, size)
        expected = np.mean((y * norm - y_hat * norm) ** 2)
        assert loss(y, y_hat, contexts, kind) == pytest.approx(expected, rel=1e-9)


def test_unweighted_loss_is_target_space_mse():
    contexts = [ClearSkyContext(i_clr=400.0, i_extr=500.0)] * 2
    assert loss(np.array([1.0, 0.5]), np.array([0.5, 0.5]), contexts, TargetKind.parse("kt")) == pytest.approx(0.125)


def test_loss_input_checks():
    ctx = ClearSkyContext(i_clr=400.0, i_extr=500.0)
    kind = TargetKind.parse("kt")
    with pytest.raises(DataError):
        loss(np.array([]), np.array([]), [], kind)
    with pytest.raises(ShapeError):
        loss(np.array([1.0, 2.0]), np.array([1.0]), [ctx, ctx], kind)
    with pytest.raises(ShapeError):
        loss(np.array([1.0]), np.array([1.0]), [ctx, ctx], kind)
