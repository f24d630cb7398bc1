import math

import numpy as np
import pytest
import torch
from torch import nn

from segalm.errors import NonFiniteGradient
from segalm.model.modeling import SegaForMaskedLM
from segalm.training.optim import TrainState, adam_step, build_optimizer, lr_at, warmup_steps

from conftest import tiny_model_config


class Scalar(nn.Module):
    def __init__(self, value: float = 1.0):
        super().__init__()
        self.w = nn.Parameter(torch.tensor([value], dtype=torch.float64))


def scalar_state(peak_lr=1e-3, total_steps=100, weight_decay=0.0):
    module = Scalar()
    optimizer = build_optimizer(module, weight_decay=weight_decay)
    state = TrainState(optimizer, total_steps=total_steps, peak_lr=peak_lr, clip_norm=0.0)
    return module, state


def test_warmup_is_one_percent():
    assert warmup_steps(500_000, 0.01) == 5000
    assert warmup_steps(100, 0.01) == 1
    assert warmup_steps(150, 0.01) == 2


def test_peak_reached_at_end_of_warmup():
    assert lr_at(5000, 500_000, 1e-4) == 1e-4


def test_schedule_endpoints():
    assert lr_at(0, 500_000, 1e-4) == 0.0
    assert lr_at(500_000, 500_000, 1e-4) == 0.0
    assert lr_at(0, 0, 1e-4) == 0.0


def test_schedule_is_affine_on_both_segments():
    total, peak = 20_000, 1e-4
    warmup = warmup_steps(total)
    rng = np.random.default_rng(0)
    for step in rng.integers(0, total + 1, size=1000):
        step = int(step)
        expected = peak * step / warmup if step <= warmup else peak * (total - step) / (total - warmup)
        assert lr_at(step, total, peak) == pytest.approx(expected, rel=1e-12, abs=1e-18)


def test_schedule_rejects_out_of_range_steps():
    with pytest.raises(ValueError):
        lr_at(-1, 10, 1e-4)
    with pytest.raises(ValueError):
        lr_at(11, 10, 1e-4)


def test_adam_matches_hand_trace():
    module, state = scalar_state()
    beta1, beta2, eps, peak = 0.9, 0.999, 1e-8, 1e-3
    gradients = [0.5, -0.25, 0.125]
    m = v = 0.0
    w = 1.0
    for t, g in enumerate(gradients, start=1):
        module.w.grad = torch.tensor([g], dtype=torch.float64)
        lr = adam_step([("w", module.w)], state)
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        expected_lr = lr_at(t - 1, 100, peak)
        w -= expected_lr * (m / (1 - beta1**t)) / (math.sqrt(v) / math.sqrt(1 - beta2**t) + eps)
        assert lr == expected_lr
        assert module.w.item() == pytest.approx(w, rel=1e-12)
    # Step 0 runs at lr 0: moments move, the weight does not
    assert state.step == 3
    assert lr_at(0, 100, peak) == 0.0 and lr_at(1, 100, peak) == peak
    assert lr_at(2, 100, peak) == pytest.approx(peak * 98 / 99)


def test_zero_gradient_leaves_weights():
    module, state = scalar_state()
    for _ in range(3):
        module.w.grad = torch.zeros(1, dtype=torch.float64)
        adam_step([("w", module.w)], state)
    assert module.w.item() == 1.0
    assert state.step == 3


def test_non_finite_gradient_aborts_update():
    module, state = scalar_state()
    module.w.grad = torch.tensor([0.5], dtype=torch.float64)
    adam_step([("w", module.w)], state)
    moments = {k: v.clone() for k, v in state.optimizer.state[module.w].items() if torch.is_tensor(v)}
    module.w.grad = torch.tensor([float("nan")], dtype=torch.float64)
    with pytest.raises(NonFiniteGradient) as info:
        adam_step([("w", module.w)], state)
    assert info.value.parameter == "w" and info.value.step == 1
    assert state.step == 1
    assert module.w.item() == 1.0
    assert module.w.grad is None
    for key, value in moments.items():
        assert torch.equal(state.optimizer.state[module.w][key], value)


def test_finished_run_refuses_updates():
    module, state = scalar_state(total_steps=1)
    module.w.grad = torch.ones(1, dtype=torch.float64)
    adam_step([("w", module.w)], state)
    assert state.done
    with pytest.raises(ValueError):
        adam_step([("w", module.w)], state)


def test_decay_skips_layer_norm_and_bias(vocab):
    model = SegaForMaskedLM(tiny_model_config(len(vocab)))
    optimizer = build_optimizer(model, weight_decay=0.01)
    decay, no_decay = optimizer.param_groups
    assert decay["weight_decay"] == 0.01 and no_decay["weight_decay"] == 0.0
    names = {id(param): name for name, param in model.named_parameters()}
    assert all("bias" in names[id(p)] or "norm" in names[id(p)] for p in no_decay["params"])
    assert all("bias" not in names[id(p)] and "norm" not in names[id(p)] for p in decay["params"])


def test_clipping_bounds_the_update():
    module, state = scalar_state()
    state.clip_norm = 1.0
    module.w.grad = torch.tensor([100.0], dtype=torch.float64)
    adam_step([("w", module.w)], state)
    assert state.optimizer.state[module.w]["exp_avg"].item() == pytest.approx(0.1, rel=1e-5)


def test_train_state_round_trip():
    module, state = scalar_state()
    module.w.grad = torch.tensor([0.5], dtype=torch.float64)
    adam_step([("w", module.w)], state)
    saved = state.state_dict()
    other_module, other = scalar_state()
    other.load_state_dict(saved)
    assert other.step == 1
    assert other.optimizer.state_dict()["state"][0]["exp_avg"].item() == pytest.approx(0.05)
