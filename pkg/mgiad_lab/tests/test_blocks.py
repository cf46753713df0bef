"""
Tests for the architectural blocks and the model builder.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.blocks import build_model, channel_ladder, mgiad_forward, resolution_step, sic_cycle, smooth
from app.blocks.hierarchy import check_group_size
from app.blocks.linear import ChannelStencils, frozen_conv, linear_block, linear_channel_hierarchy, linear_unit
from app.blocks.smoothing import SmoothingBlock
from app.core.errors import ConfigurationError
from app.engine import Tensor
from app.models.schemas import LadderMode, ModelConfig, SharingPolicy, Variant
from app.verification.suites import dead_parameters, degenerate_mismatch


def _center(value: float) -> np.ndarray:
    weights = np.zeros((1, 1, 3, 3))
    weights[0, 0, 1, 1] = value
    return weights


def test_channel_ladder_halves_to_coarsest_width():
    assert channel_ladder(256, 64) == [256, 128, 64]
    assert channel_ladder(64, 64) == [64]
    assert channel_ladder(96, 16, LadderMode.FLOOR) == [96, 48, 24]


def test_exact_ladder_rejects_non_power_of_two_ratio():
    with pytest.raises(ConfigurationError, match="power of two"):
        channel_ladder(96, 16)
    with pytest.raises(ConfigurationError):
        channel_ladder(32, 64)


def test_group_size_must_be_even_and_divide_widths():
    with pytest.raises(ConfigurationError, match="even"):
        check_group_size([16, 8], 3)
    with pytest.raises(ConfigurationError, match="divisible"):
        check_group_size([20, 10], 8)
    check_group_size([64], 3)


def test_smoothing_with_hand_set_operators():
    """A = I, B = I/2: each step halves the distance to f."""
    block = linear_block(frozen_conv("A", _center(1.0)), frozen_conv("B", _center(0.5)), 2)
    u = Tensor(np.zeros((1, 3, 3, 1)))
    f = Tensor(np.ones((1, 3, 3, 1)))
    assert_allclose(smooth(u, f, block, "eval").data, 0.75)


def test_single_channel_level_cycle_is_pre_and_post_smoothing(rng):
    """Without a coarser channel level SiC reduces to eta_pre + eta_post smoothing steps."""
    a = rng.standard_normal((4, 4, 1, 1)) * 0.3
    b = rng.standard_normal((4, 4, 1, 1)) * 0.3
    hierarchy = linear_channel_hierarchy([ChannelStencils(A_hat=a, B_hat=b)], eta_pre=1, eta_post=2)
    u = Tensor(rng.standard_normal((1, 2, 2, 4)))
    f = Tensor(rng.standard_normal((1, 2, 2, 4)))
    expected = smooth(u, f, linear_block(frozen_conv("a", a), frozen_conv("b", b), 3), "eval")
    assert_allclose(sic_cycle(f, u, hierarchy, mode="eval").data, expected.data, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("variant", ["resnet", "mgnet", "mgiad"])
def test_every_variant_classifies(small_configs, rng, variant):
    model = build_model(small_configs[variant], seed=0)
    logits = model(rng.standard_normal((2, 8, 8, 3)), mode="train")
    assert logits.shape == (2, 3)
    assert np.all(np.isfinite(logits.data))


def test_mgiad_forward_starts_from_the_stem_output(small_mgiad, rng):
    model = build_model(small_mgiad, seed=2)
    images = rng.standard_normal((2, 8, 8, 3))
    f1 = model.stem(Tensor(images, dtype=model.dtype), "eval")
    assert f1.shape == (2, 8, 8, 8)
    assert_allclose(mgiad_forward(f1, model, "eval").data, model(images, mode="eval").data)


def test_mgiad_channel_ladders(small_mgiad):
    model = build_model(small_mgiad)
    assert [h.widths for h in model.hierarchies] == [[8, 4], [16, 8, 4]]
    finest = model.hierarchies[1].levels[0]
    assert finest.A_hat.groups == 4
    assert finest.R_hat.out_channels == 8
    assert model.hierarchies[1].levels[-1].A_hat.groups == 1


def test_sharing_policy_controls_shared_ids():
    base = dict(variant=Variant.MGNET, levels=1, channels=[8], nu=2)
    both = build_model(ModelConfig(**base)).registry.names()
    only_a = build_model(ModelConfig(sharing=SharingPolicy(share_A=True, share_B=False), **base)).registry.names()
    assert "level1.A" in both and "level1.B" in both
    assert "level1.A" in only_a
    assert {"level1.B1", "level1.B2"} <= set(only_a)


def test_same_seed_same_weights(small_mgiad):
    first = build_model(small_mgiad, seed=5).registry
    second = build_model(small_mgiad, seed=5).registry
    other = build_model(small_mgiad, seed=6).registry
    assert first.names() == second.names()
    for name, param in first.items():
        assert_array_equal(param.data, second[name].data)
    assert any(not np.array_equal(p.data, other[n].data) for n, p in first.items() if p.role != "BN")


def test_eval_mode_leaves_running_statistics(small_mgiad, rng):
    model = build_model(small_mgiad)
    images = rng.standard_normal((2, 8, 8, 3))
    before = {k: v.copy() for k, v in model.registry.buffers().items()}
    model(images, mode="eval")
    for name, value in model.registry.buffers().items():
        assert_array_equal(value, before[name])
    model(images, mode="train")
    assert any(not np.array_equal(v, before[k]) for k, v in model.registry.buffers().items())


def test_no_batch_norm_means_no_bn_parameters(small_mgiad):
    config = small_mgiad.model_copy(update={"batch_norm": False})
    model = build_model(config)
    assert not [p for p in model.registry if p.role == "BN"]
    assert model.registry.buffers() == {}


def test_coarsening_without_fas_starts_from_zero(rng):
    config = ModelConfig(variant=Variant.MGNET, levels=2, channels=[4, 8], nu=1, fas=False, input_size=8)
    model = build_model(config, precision="verification")
    u = Tensor(rng.standard_normal((2, 8, 8, 4)))
    f = Tensor(rng.standard_normal((2, 8, 8, 4)))
    assert model.smoothers[1].first_unit is None
    state = resolution_step(u, f, model.transfers[0], None, "eval")
    assert state.f.shape == (2, 4, 4, 8)
    assert_array_equal(state.u.data, 0.0)
    assert state.au is None


def test_fas_coarsening_caches_first_application(rng):
    config = ModelConfig(variant=Variant.MGNET, levels=2, channels=[4, 8], nu=1, input_size=8)
    model = build_model(config, precision="verification")
    u = Tensor(rng.standard_normal((2, 8, 8, 4)))
    f = Tensor(rng.standard_normal((2, 8, 8, 4)))
    next_unit = model.smoothers[1].a_units[0]
    state = resolution_step(u, f, model.transfers[0], next_unit, "eval")
    assert state.u.shape == (2, 4, 4, 8)
    assert_allclose(state.au.data, next_unit(state.u, "eval").data)


@pytest.mark.parametrize(
    "changes",
    [
        {"channels": [8]},
        {"channels": [8, 12], "variant": Variant.MGNET},
        {"g_s": 3},
        {"c_K": 32},
        {"channel_scale": 0},
    ],
)
def test_invalid_configs_are_rejected(small_mgiad, changes):
    with pytest.raises(ConfigurationError):
        build_model(small_mgiad.model_copy(update=changes))


def test_mgiad_degenerates_to_mgnet():
    """g_s = c = c_K gives the MgNet count and output shapes exactly."""
    assert degenerate_mismatch(width=8) == 0


def test_zero_start_block_skips_the_first_operator_application(rng):
    a = frozen_conv("A", rng.standard_normal((1, 1, 3, 3)))
    b = frozen_conv("B", rng.standard_normal((1, 1, 3, 3)) * 0.2)
    block = SmoothingBlock([linear_unit(a)], [linear_unit(b)] * 2, zero_start=True)
    assert block.nu == 2 and block.first_unit is None
    u = Tensor(np.zeros((1, 4, 4, 1)))
    f = Tensor(rng.standard_normal((1, 4, 4, 1)))
    assert_allclose(smooth(u, f, block, "eval").data, smooth(u, f, linear_block(a, b, 2), "eval").data, rtol=1e-14)
    with pytest.raises(ConfigurationError, match="u = 0"):
        smooth(Tensor(np.ones((1, 4, 4, 1))), f, block, "eval")


def test_single_step_zero_start_block_keeps_its_operator(rng):
    a = frozen_conv("A", rng.standard_normal((1, 1, 3, 3)))
    b = frozen_conv("B", rng.standard_normal((1, 1, 3, 3)))
    assert SmoothingBlock([], [linear_unit(b)], a, zero_start=True).A is a
    with pytest.raises(ConfigurationError):
        SmoothingBlock([], [linear_unit(b)], zero_start=True)
    with pytest.raises(ConfigurationError, match="after the first"):
        SmoothingBlock([linear_unit(a)], [linear_unit(b)], zero_start=True)


@pytest.mark.parametrize(
    "variant,changes",
    [
        ("resnet", {}),
        ("mgnet", {}),
        ("mgnet", {"fas": False}),
        ("mgnet", {"sharing": SharingPolicy(share_A=False, share_B=False)}),
        ("mgiad", {}),
        ("mgiad", {"fas": False}),
        ("mgiad", {"eta_pre": 2}),
    ],
)
def test_every_parameter_receives_a_gradient(small_configs, rng, variant, changes):
    model = build_model(small_configs[variant].model_copy(update=changes), seed=0, precision="verification")
    images = rng.standard_normal((2, 8, 8, 3))
    assert dead_parameters(model, images, np.array([0, 2])) == []


@pytest.mark.parametrize("variant", ["resnet", "mgnet", "mgiad"])
def test_zero_weights_leave_only_the_head_bias(small_configs, rng, variant):
    model = build_model(small_configs[variant], seed=0, precision="verification")
    for param in model.registry:
        if param.role != "BN":
            param.data[...] = 0.0
    model.registry["head.bias"].data[...] = [1.0, 2.0, 3.0]
    images = rng.standard_normal((4, 8, 8, 3))
    for mode in ("eval", "train"):
        assert_allclose(model(images, mode=mode).data, np.tile([1.0, 2.0, 3.0], (4, 1)), atol=1e-12)
