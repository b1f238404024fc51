"""Model tests: branch wiring, fusion semantics, gradients, checkpoints."""

from __future__ import annotations

import numpy as np
import pytest
import torch

from texfuse import (
    FusionModel,
    TrainConfig,
    build_model,
    cross_entropy,
    fuse,
    joint_loss,
    load_checkpoint,
    masked_mse,
    patchify,
    pool,
    sample_tube_mask,
    save_checkpoint,
)
from texfuse.errors import EmptySequenceError, GeometryError
from texfuse.model import modality_view

from _oracles import finite_difference_gradients
from conftest import random_clip


def _double_model(config: TrainConfig) -> FusionModel:
    return build_model(config.replace(dtype="float64"))


@pytest.fixture
def tiny_inputs(rng, tiny_config):
    geometry = tiny_config.geometry()
    rgb = random_clip(rng, 2, geometry, dtype=np.float64)
    mask = sample_tube_mask(geometry, 0.5, seed=3, batch_size=2)
    return rgb, mask


class TestForwardShapes:
    def test_forward_train_shapes(self, tiny_config, tiny_inputs):
        rgb, mask = tiny_inputs
        model = _double_model(tiny_config)
        logits, pred, target = model.forward_train(rgb, mask)
        g = tiny_config.geometry()
        assert logits.shape == (2, 2)
        assert pred.shape == (2, g.seq_len, g.token_dim)
        assert target.shape == (2, g.seq_len, g.token_dim)

    def test_target_uses_configured_modality(self, tiny_config, tiny_inputs):
        rgb, mask = tiny_inputs
        model = _double_model(tiny_config)  # RGB-LDP
        _, _, target = model.forward_train(rgb, mask)
        expected = patchify(
            torch.tensor(modality_view(rgb, "LDP")), tiny_config.geometry()
        )
        assert torch.allclose(target, expected)

    def test_identical_input_and_target_for_ldp_ldp(self, tiny_config, tiny_inputs):
        rgb, mask = tiny_inputs
        model = _double_model(tiny_config.replace(modality_pair="LDP-LDP"))
        aux = modality_view(rgb, "LDP")
        _, _, target = model.forward_train(rgb, mask)
        assert torch.allclose(
            target, patchify(torch.tensor(aux), tiny_config.geometry())
        )

    def test_encoder_rejects_empty_sequence(self, tiny_config, tiny_inputs):
        rgb, _ = tiny_inputs
        model = _double_model(tiny_config)
        full = sample_tube_mask(tiny_config.geometry(), 1.0, seed=0, batch_size=2)
        with pytest.raises(EmptySequenceError):
            model.forward_train(rgb, full)


class TestSharedEncoder:
    def test_single_parameter_set(self, tiny_config):
        model = _double_model(tiny_config)
        encoders = [m for m in model.modules() if type(m).__name__ == "Encoder"]
        assert len(encoders) == 1

    def test_rec_only_step_changes_primary_branch(self, tiny_config, tiny_inputs):
        # Train one step with lambda = 0 (pure reconstruction); the primary
        # branch must change because the encoder is shared.
        rgb, mask = tiny_inputs
        model = _double_model(tiny_config)
        model.train()
        tokens = patchify(model._to_tensor(rgb), model.geometry)
        with torch.no_grad():
            before = model.encoder(tokens).clone()

        logits, pred, target = model.forward_train(rgb, mask)
        l_rec = masked_mse(pred, target, mask)
        loss = joint_loss(cross_entropy(logits, [0, 1]), l_rec, 0.0)
        loss.backward()
        with torch.no_grad():
            for p in model.parameters():
                if p.grad is not None:
                    p -= 0.1 * p.grad
            after = model.encoder(tokens)
        assert not torch.allclose(before, after)

    def test_lambda_one_leaves_decoder_grads_zero(self, tiny_config, tiny_inputs):
        rgb, mask = tiny_inputs
        model = _double_model(tiny_config)
        logits, pred, target = model.forward_train(rgb, mask)
        loss = joint_loss(
            cross_entropy(logits, [0, 1]), masked_mse(pred, target, mask), 1.0
        )
        loss.backward()
        for p in model.decoder.parameters():
            assert float(p.grad.abs().max()) == 0.0
        assert any(float(p.grad.abs().max()) > 0 for p in model.encoder.parameters())


class TestFusion:
    def test_fuse_is_elementwise_product(self, rng):
        a = torch.tensor(rng.normal(0, 1, (3, 5)))
        b = torch.tensor(rng.normal(0, 1, (3, 5)))
        assert torch.equal(fuse(a, b), a * b)

    def test_fuse_rejects_shape_mismatch(self):
        with pytest.raises(GeometryError):
            fuse(torch.zeros((2, 4)), torch.zeros((2, 5)))

    def test_all_ones_aux_reduces_to_primary_head(self, tiny_config, tiny_inputs):
        # Replacing the pooled auxiliary feature with ones must reproduce a
        # primary-only classifier with the same head.
        rgb, _ = tiny_inputs
        model = _double_model(tiny_config)
        model.eval()
        with torch.no_grad():
            tokens = patchify(model._to_tensor(rgb), model.geometry)
            primary = pool(model.encoder(tokens))
            via_fusion = model.head(fuse(torch.ones_like(primary), primary))
            direct = model.head(primary)
        assert torch.allclose(via_fusion, direct)

    def test_pool_is_token_mean(self, rng):
        latents = torch.tensor(rng.normal(0, 1, (2, 7, 4)))
        assert torch.allclose(pool(latents), latents.mean(dim=1))

    def test_pool_rejects_empty(self):
        with pytest.raises(EmptySequenceError):
            pool(torch.zeros((2, 0, 4)))

    def test_argmax_invariant_under_positive_rescaling_with_zero_bias(
        self, tiny_config, rng
    ):
        model = _double_model(tiny_config)
        with torch.no_grad():
            model.head.bias.zero_()
        z = torch.tensor(rng.normal(0, 1, (16, tiny_config.enc_dim)))
        with torch.no_grad():
            base = model.head(z).argmax(dim=1)
            for scale in (0.01, 3.0, 250.0):
                scaled = model.head(z * scale).argmax(dim=1)
                assert torch.equal(base, scaled)


class TestDecoder:
    def test_empty_mask_output_ignores_mask_token(self, tiny_config, tiny_inputs):
        rgb, _ = tiny_inputs
        model = _double_model(tiny_config)
        model.eval()
        empty = sample_tube_mask(tiny_config.geometry(), 0.0, seed=0, batch_size=2)
        with torch.no_grad():
            _, pred_a, _ = model.forward_train(rgb, empty)
            model.decoder.mask_token += 10.0
            _, pred_b, _ = model.forward_train(rgb, empty)
        assert torch.allclose(pred_a, pred_b)

    def test_mask_token_gradient_nonzero_when_masked(self, tiny_config, tiny_inputs):
        # Finite-difference cross-check on the mask token itself.
        rgb, mask = tiny_inputs
        model = _double_model(tiny_config)
        model.train()

        def loss_fn():
            logits, pred, target = model.forward_train(rgb, mask)
            return joint_loss(
                cross_entropy(logits, [0, 1]), masked_mse(pred, target, mask), 0.1
            )

        loss = loss_fn()
        loss.backward()
        analytic = model.decoder.mask_token.grad.clone()
        assert float(analytic.abs().max()) > 0

        class OneParam(torch.nn.Module):
            def __init__(self, p):
                super().__init__()
                self.mask_token = p

        fd = finite_difference_gradients(OneParam(model.decoder.mask_token), loss_fn)
        fd_grad = fd["mask_token"]
        rel = float((analytic - fd_grad).abs().max()) / (
            float(analytic.abs().max()) + 1e-12
        )
        assert rel < 1e-6

    def test_pos_embeddings_separate_from_encoder(self, tiny_config):
        model = _double_model(tiny_config)
        assert model.encoder.pos_emb.shape[1] == tiny_config.enc_dim
        assert model.decoder.pos_emb.shape[1] == tiny_config.dec_dim
        assert model.encoder.pos_emb is not model.decoder.pos_emb


class TestPositionIndexing:
    def test_visible_token_permutation_equivariance(self, tiny_config, tiny_inputs):
        # Feeding visible tokens in a different order with matching index
        # arrays must not change logits or reconstructions: position comes
        # from the gathered embeddings, not the sequence order.
        rgb, mask = tiny_inputs
        model = _double_model(tiny_config)
        model.eval()
        tokens = patchify(model._to_tensor(rgb), model.geometry)
        batch = np.arange(2)[:, None]
        visible = mask.visible
        perm = np.stack([np.random.default_rng(i).permutation(visible.shape[1])
                         for i in range(2)])
        shuffled_idx = np.take_along_axis(visible, perm, axis=1)
        with torch.no_grad():
            out_a = model.forward_tokens(tokens, tokens[batch, visible], visible)
            out_b = model.forward_tokens(tokens, tokens[batch, shuffled_idx], shuffled_idx)
            pred_a = model.decoder(out_a["aux_latents"], visible)
            pred_b = model.decoder(out_b["aux_latents"], shuffled_idx)
        assert torch.allclose(out_a["logits"], out_b["logits"], atol=1e-10)
        assert torch.allclose(pred_a, pred_b, atol=1e-10)


class TestDeterminismAndDropPath:
    def test_eval_forward_bit_identical(self, tiny_config, tiny_inputs):
        rgb, mask = tiny_inputs
        model = _double_model(tiny_config)
        model.eval()
        with torch.no_grad():
            a = model.forward_train(rgb, mask)
            b = model.forward_train(rgb, mask)
        for x, y in zip(a, b):
            assert torch.equal(x, y)

    def test_seeded_build_reproducible(self, tiny_config):
        params_a = build_model(tiny_config).state_dict()
        params_b = build_model(tiny_config).state_dict()
        for name in params_a:
            assert torch.equal(params_a[name], params_b[name])

    def test_drop_path_active_only_in_training(self, tiny_config, tiny_inputs):
        rgb, mask = tiny_inputs
        config = tiny_config.replace(drop_path=0.5, dtype="float64")
        model = build_model(config)
        model.train()
        torch.manual_seed(123)
        a = model.forward_train(rgb, mask)[0]
        b = model.forward_train(rgb, mask)[0]
        assert not torch.equal(a, b)  # stochastic depth varies in training
        model.eval()
        with torch.no_grad():
            c = model.forward_train(rgb, mask)[0]
            d = model.forward_train(rgb, mask)[0]
        assert torch.equal(c, d)


class TestCheckpoint:
    def test_round_trip_preserves_scores(self, tmp_path, tiny_config, tiny_inputs):
        rgb, mask = tiny_inputs
        model = build_model(tiny_config)
        path = tmp_path / "model.npz"
        save_checkpoint(path, model)
        loaded, config = load_checkpoint(path)
        assert config == tiny_config
        loaded.eval()
        model.eval()
        with torch.no_grad():
            a = model.scores(rgb.astype(np.float32), mask)
            b = loaded.scores(rgb.astype(np.float32), mask)
        assert torch.allclose(a, b)

    def test_archive_is_little_endian_f32_with_hierarchical_keys(
        self, tmp_path, tiny_config
    ):
        model = build_model(tiny_config)
        path = tmp_path / "model.npz"
        save_checkpoint(path, model)
        with np.load(path) as archive:
            names = set(archive.files)
            assert "train_config_json" in names
            assert "encoder.blocks.0.attn.qkv.weight" in names
            for name in names - {"train_config_json"}:
                assert archive[name].dtype == np.dtype("<f4")

    def test_rejects_non_checkpoint_npz(self, tmp_path):
        path = tmp_path / "junk.npz"
        np.savez(path, foo=np.zeros(3))
        with pytest.raises(GeometryError):
            load_checkpoint(path)


class TestGradientCheck:
    def test_finite_difference_on_selected_parameters(self, tiny_config, tiny_inputs):
        # Full-model sweep runs in the acceptance suite; here we check a
        # representative subset at float64.
        rgb, mask = tiny_inputs
        model = _double_model(tiny_config)
        model.train()

        def loss_fn():
            logits, pred, target = model.forward_train(rgb, mask)
            return joint_loss(
                cross_entropy(logits, [0, 1]), masked_mse(pred, target, mask), 0.1
            )

        loss_fn().backward()
        selected = {
            "head.weight": model.head.weight,
            "decoder.out.bias": model.decoder.out.bias,
            "encoder.pos_emb": model.encoder.pos_emb,
        }

        class Subset(torch.nn.Module):
            def __init__(self, params):
                super().__init__()
                for key, value in params.items():
                    setattr(self, key.replace(".", "_"), value)

        fd = finite_difference_gradients(Subset(selected), loss_fn)
        for key, param in selected.items():
            analytic = param.grad
            fd_grad = fd[key.replace(".", "_")]
            scale = float(analytic.abs().max()) + float(fd_grad.abs().max()) + 1e-12
            rel = float((analytic - fd_grad).abs().max()) / scale
            assert rel < 1e-6, f"{key}: relative error {rel:.2e}"
