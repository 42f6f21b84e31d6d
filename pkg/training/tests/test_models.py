"""Network structure: output bounds, head shapes, the encoder/head boundary
and the bitwise frozen-encoder contract."""

import pytest
import torch

from seekertrain import (
    ConcatHeadNet,
    PolicyNet,
    encoder_state_hash,
    freeze_encoder,
    il_loss,
)
from seekertrain.models import SelfHead, SelfWithTeammateInput, make_encoder


def _frames(b=2, px=78):
    torch.manual_seed(0)
    return torch.rand(b, 20, px, px)


def test_self_head_output_bounded():
    net = PolicyNet("desk", "self")
    out = net(_frames() * 100)  # large activations still squash into range
    assert out.shape == (2, 4)
    assert out.min() >= -1.0 and out.max() <= 1.0


def test_team_head_shape_and_bounds():
    net = PolicyNet("desk", "team")
    out = net(_frames(3))
    assert out.shape == (3, 4, 4)
    assert out.abs().max() <= 1.0


def test_projection_head_needs_teammate_actions():
    net = PolicyNet("desk", "self+teammates")
    with pytest.raises(ValueError):
        net(_frames())
    out = net(_frames(2), torch.zeros(2, 3, 4))
    assert out.shape == (2, 4)


def test_unknown_preset_and_head_rejected():
    with pytest.raises(ValueError):
        make_encoder("pocket")
    with pytest.raises(ValueError):
        PolicyNet("desk", "chorus")


def test_zeroed_projection_ignores_teammate_input():
    torch.manual_seed(1)
    head = SelfWithTeammateInput(features=16, hidden=32)
    with torch.no_grad():
        head.projection.weight.zero_()
        head.projection.bias.zero_()
    feats = torch.randn(8, 16)
    a = head(feats, torch.randn(8, 3, 4))
    b = head(feats, torch.randn(8, 3, 4) * 50)
    assert torch.equal(a, b)


def test_zeroed_projection_equals_plain_self_head():
    torch.manual_seed(2)
    head = SelfWithTeammateInput(features=16, hidden=32)
    plain = SelfHead(16, hidden=32)
    with torch.no_grad():
        head.projection.weight.zero_()
        head.projection.bias.zero_()
        plain.mlp[0].weight.copy_(head.mlp[0].weight[:, :16])
        plain.mlp[0].bias.copy_(head.mlp[0].bias)
        plain.mlp[2].weight.copy_(head.mlp[2].weight)
        plain.mlp[2].bias.copy_(head.mlp[2].bias)
    feats = torch.randn(5, 16)
    assert torch.allclose(head(feats, torch.randn(5, 3, 4)), plain(feats), atol=1e-7)


def test_concat_head_feature_arithmetic():
    a = make_encoder("desk")
    b = make_encoder("desk")
    net = ConcatHeadNet(a, b)
    assert net.features == a.features + b.features
    out = net(_frames(2))
    assert out.shape == (2, 4)
    assert out.abs().max() <= 1.0


def _train_head_steps(net, frames, steps=3):
    opt = torch.optim.Adam(net.head.parameters(), lr=1e-2)
    target = torch.rand(frames.shape[0], 4) * 2 - 1
    for _ in range(steps):
        loss = il_loss(net(frames), target)
        opt.zero_grad()
        loss.backward()
        opt.step()


def test_frozen_desk_encoder_bitwise_stable_through_training():
    torch.manual_seed(3)
    net = PolicyNet("desk", "self")
    freeze_encoder(net.encoder)
    before = encoder_state_hash(net.encoder)
    head_before = encoder_state_hash(net.head)
    _train_head_steps(net, _frames(4))
    assert encoder_state_hash(net.encoder) == before
    # the head must actually have moved, or the test proves nothing
    assert encoder_state_hash(net.head) != head_before


def test_frozen_residual_encoder_keeps_batchnorm_stats():
    torch.manual_seed(4)
    net = PolicyNet("paper", "self")
    freeze_encoder(net.encoder)
    before = encoder_state_hash(net.encoder)
    # batchnorm running stats update on forward in train mode; the freeze
    # must hold them still even inside an optimization loop
    _train_head_steps(net, _frames(2, px=156), steps=2)
    assert encoder_state_hash(net.encoder) == before


def test_unfrozen_batchnorm_would_move():
    # control for the previous test: without the freeze the hash does change
    torch.manual_seed(5)
    net = PolicyNet("paper", "self")
    before = encoder_state_hash(net.encoder)
    net(_frames(2, px=156))
    assert encoder_state_hash(net.encoder) != before


def test_encoder_hash_sensitive_to_single_weight():
    net = PolicyNet("desk", "self")
    before = encoder_state_hash(net.encoder)
    with torch.no_grad():
        first = next(net.encoder.parameters())
        first.view(-1)[0] += 1e-7
    assert encoder_state_hash(net.encoder) != before


def test_gradients_match_finite_differences_through_heads():
    torch.manual_seed(6)
    from torch.func import functional_call

    head = SelfHead(6, hidden=8).double()
    names = [n for n, _ in head.named_parameters()]
    params = tuple(
        p.detach().clone().requires_grad_() for _, p in head.named_parameters()
    )
    feats = torch.randn(3, 6, dtype=torch.float64)
    target = torch.randn(3, 4, dtype=torch.float64)

    def f(*ps):
        out = functional_call(head, dict(zip(names, ps)), (feats,))
        return il_loss(out, target)

    assert torch.autograd.gradcheck(f, params, rtol=1e-3)


def test_gradients_match_finite_differences_through_projection():
    torch.manual_seed(7)
    from torch.func import functional_call

    head = SelfWithTeammateInput(features=4, hidden=2).double()
    names = [n for n, _ in head.named_parameters()]
    params = tuple(
        p.detach().clone().requires_grad_() for _, p in head.named_parameters()
    )
    feats = torch.randn(2, 4, dtype=torch.float64)
    mates = torch.randn(2, 3, 4, dtype=torch.float64)
    target = torch.randn(2, 4, dtype=torch.float64)

    def f(*ps):
        out = functional_call(head, dict(zip(names, ps)), (feats, mates))
        return il_loss(out, target)

    assert torch.autograd.gradcheck(f, params, rtol=1e-3)


def test_gradients_match_finite_differences_through_conv_blocks():
    torch.manual_seed(8)
    from torch.func import functional_call

    from seekertrain.models import _conv_block

    net = torch.nn.Sequential(
        _conv_block(2, 3), torch.nn.Flatten(), torch.nn.Linear(3 * 4 * 4, 2)
    ).double()
    names = [n for n, _ in net.named_parameters()]
    params = tuple(p.detach().clone().requires_grad_() for _, p in net.named_parameters())
    x = torch.randn(2, 2, 8, 8, dtype=torch.float64)

    def f(*ps):
        return functional_call(net, dict(zip(names, ps)), (x,)).sum()

    assert torch.autograd.gradcheck(f, params, rtol=1e-3)
