"""Two-branch transformer: masked reconstruction fused with RGB classification.

One ViT-style encoder (a single parameter set) serves both branches.  The
auxiliary branch encodes the visible tokens of a masked descriptor/RGB
video and a shallow decoder with a learnable mask token reconstructs the
target modality at the masked positions.  The primary branch encodes the
full RGB clip.  Both branches are mean-pooled, fused by element-wise
multiplication and classified by a linear head (index 1 = manipulated).
"""

from __future__ import annotations

import io
import json

import numpy as np
import torch
from torch import nn

from .config import TrainConfig, config_from_dict, parse_pair
from .errors import EmptySequenceError, GeometryError
from .texture import descriptor_array
from .video import MaskSpec, PatchGeometry, apply_mask, patchify


def drop_path(x: torch.Tensor, rate: float, training: bool) -> torch.Tensor:
    """Stochastic depth: zero the residual branch per sample with prob rate."""
    if rate == 0.0 or not training:
        return x
    keep = 1.0 - rate
    shape = (x.shape[0],) + (1,) * (x.ndim - 1)
    mask = (torch.rand(shape, dtype=x.dtype, device=x.device) < keep).to(x.dtype)
    return x * mask / keep


class SelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads:
            raise GeometryError(f"dim ({dim}) not divisible by heads ({heads})")
        self.heads = heads
        self.scale = (dim // heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, s, d = x.shape
        qkv = self.qkv(x).reshape(b, s, 3, self.heads, d // self.heads)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        attn = torch.softmax((q @ k.transpose(-2, -1)) * self.scale, dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, s, d)
        return self.proj(out)


class Mlp(nn.Module):
    def __init__(self, dim: int, hidden: int):
        super().__init__()
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc2(self.act(self.fc1(x)))


class Block(nn.Module):
    """Pre-norm transformer block with constant-rate stochastic depth."""

    def __init__(self, dim: int, heads: int, drop_path_rate: float = 0.0,
                 mlp_ratio: float = 4.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = SelfAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.mlp = Mlp(dim, int(dim * mlp_ratio))
        self.drop_path_rate = drop_path_rate

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + drop_path(self.attn(self.norm1(x)), self.drop_path_rate, self.training)
        x = x + drop_path(self.mlp(self.norm2(x)), self.drop_path_rate, self.training)
        return x


class Encoder(nn.Module):
    """Shared token encoder with learned position embeddings, no CLS token."""

    def __init__(self, geometry: PatchGeometry, dim: int, depth: int, heads: int,
                 drop_path_rate: float = 0.0):
        super().__init__()
        self.geometry = geometry
        self.proj = nn.Linear(geometry.token_dim, dim)
        self.pos_emb = nn.Parameter(torch.zeros(geometry.seq_len, dim))
        nn.init.normal_(self.pos_emb, std=0.02)
        self.blocks = nn.ModuleList(
            Block(dim, heads, drop_path_rate) for _ in range(depth)
        )
        self.norm = nn.LayerNorm(dim)

    def forward(self, tokens: torch.Tensor, indices=None) -> torch.Tensor:
        """Encode (B, S', D_tok) tokens; indices gathers position embeddings.

        indices is a (B, S') array of original patch positions; None means
        the full ordered sequence.
        """
        if tokens.shape[1] == 0:
            raise EmptySequenceError("encoder needs at least one token")
        if tokens.shape[2] != self.geometry.token_dim:
            raise GeometryError(
                f"token dim {tokens.shape[2]} != geometry token_dim "
                f"{self.geometry.token_dim}"
            )
        x = self.proj(tokens)
        if indices is None:
            if tokens.shape[1] != self.geometry.seq_len:
                raise GeometryError(
                    f"full sequence expected {self.geometry.seq_len} tokens, "
                    f"got {tokens.shape[1]}"
                )
            x = x + self.pos_emb
        else:
            idx = torch.as_tensor(np.asarray(indices), device=x.device, dtype=torch.long)
            x = x + self.pos_emb[idx]
        for block in self.blocks:
            x = block(x)
        return self.norm(x)


class Decoder(nn.Module):
    """Shallow reconstruction decoder with a learnable mask token.

    Visible encoder latents are projected into the decoder width and
    scattered back to their original positions; every masked position is
    filled with the shared mask token.  Separate learned position
    embeddings are added before the blocks, and the output is projected
    back to token space (full length, ordered).
    """

    def __init__(self, geometry: PatchGeometry, enc_dim: int, dim: int, depth: int,
                 heads: int):
        super().__init__()
        self.geometry = geometry
        self.embed = nn.Linear(enc_dim, dim)
        self.mask_token = nn.Parameter(torch.zeros(dim))
        nn.init.normal_(self.mask_token, std=0.02)
        self.pos_emb = nn.Parameter(torch.zeros(geometry.seq_len, dim))
        nn.init.normal_(self.pos_emb, std=0.02)
        self.blocks = nn.ModuleList(Block(dim, heads) for _ in range(depth))
        self.norm = nn.LayerNorm(dim)
        self.out = nn.Linear(dim, geometry.token_dim)

    def forward(self, latents: torch.Tensor, visible_indices) -> torch.Tensor:
        b = latents.shape[0]
        s = self.geometry.seq_len
        emb = self.embed(latents)
        idx = torch.as_tensor(
            np.asarray(visible_indices), device=emb.device, dtype=torch.long
        )
        if idx.shape != latents.shape[:2]:
            raise GeometryError(
                f"visible_indices shape {tuple(idx.shape)} does not match "
                f"latents {tuple(latents.shape[:2])}"
            )
        base = self.mask_token.expand(b, s, emb.shape[2])
        full = torch.scatter(base, 1, idx.unsqueeze(-1).expand(-1, -1, emb.shape[2]), emb)
        x = full + self.pos_emb
        for block in self.blocks:
            x = block(x)
        return self.out(self.norm(x))


def pool(latents: torch.Tensor) -> torch.Tensor:
    """Mean over the token axis: (B, S', D) -> (B, D)."""
    if latents.ndim != 3:
        raise GeometryError(f"latents must be (B, S', D), got {tuple(latents.shape)}")
    if latents.shape[1] == 0:
        raise EmptySequenceError("cannot pool an empty token sequence")
    return latents.mean(dim=1)


def fuse(aux: torch.Tensor, primary: torch.Tensor) -> torch.Tensor:
    """Element-wise product of the two pooled branch features."""
    if aux.shape != primary.shape:
        raise GeometryError(
            f"fused features must match: {tuple(aux.shape)} vs {tuple(primary.shape)}"
        )
    return aux * primary


class FusionModel(nn.Module):
    """Complete two-branch model built from a TrainConfig."""

    def __init__(self, config: TrainConfig):
        super().__init__()
        self.config = config
        geometry = config.geometry()
        self.geometry = geometry
        self.encoder = Encoder(
            geometry, config.enc_dim, config.enc_depth, config.enc_heads,
            drop_path_rate=config.drop_path,
        )
        self.decoder = Decoder(
            geometry, config.enc_dim, config.dec_dim, config.dec_depth,
            config.dec_heads,
        )
        self.head = nn.Linear(config.enc_dim, 2)
        nn.init.zeros_(self.head.bias)

    @property
    def torch_dtype(self) -> torch.dtype:
        return torch.float64 if self.config.dtype == "float64" else torch.float32

    def _to_tensor(self, data) -> torch.Tensor:
        if torch.is_tensor(data):
            return data.to(self.torch_dtype)
        return torch.as_tensor(np.ascontiguousarray(data), dtype=self.torch_dtype)

    def forward_tokens(self, rgb_tokens: torch.Tensor, aux_tokens: torch.Tensor,
                       visible_indices) -> dict:
        """Run both branches from token space; returns latents and logits."""
        aux_latents = self.encoder(aux_tokens, visible_indices)
        primary_latents = self.encoder(rgb_tokens)
        fused = fuse(pool(aux_latents), pool(primary_latents))
        logits = self.head(fused)
        return {
            "aux_latents": aux_latents,
            "primary_latents": primary_latents,
            "fused": fused,
            "logits": logits,
        }

    def forward_train(self, rgb, mask: MaskSpec, aux_clip=None, target_clip=None):
        """Full training-path forward pass.

        Parameters
        ----------
        rgb:
            (B, T, C, H, W) RGB clip array or tensor in [0, 1].
        mask:
            tube mask for the auxiliary branch.
        aux_clip, target_clip:
            precomputed modality videos for the configured pair; computed
            on the fly from ``rgb`` when omitted.

        Returns
        -------
        (logits, pred, targets):
            logits (B, 2); pred and targets (B, S, D_tok), aligned so the
            reconstruction loss can select masked positions.
        """
        input_mod, target_mod = parse_pair(self.config.modality_pair)
        if aux_clip is None:
            aux_clip = modality_view(rgb, input_mod)
        if target_clip is None:
            target_clip = modality_view(rgb, target_mod)
        rgb_tokens = patchify(self._to_tensor(rgb), self.geometry)
        aux_tokens = patchify(self._to_tensor(aux_clip), self.geometry)
        target_tokens = patchify(self._to_tensor(target_clip), self.geometry)
        visible_tokens, visible_indices = apply_mask(aux_tokens, mask)
        out = self.forward_tokens(rgb_tokens, visible_tokens, visible_indices)
        pred = self.decoder(out["aux_latents"], visible_indices)
        return out["logits"], pred, target_tokens

    def scores(self, rgb, mask: MaskSpec, aux_clip=None) -> torch.Tensor:
        """Softmax probability of the manipulated class, shape (B,)."""
        input_mod, _ = parse_pair(self.config.modality_pair)
        if aux_clip is None:
            aux_clip = modality_view(rgb, input_mod)
        rgb_tokens = patchify(self._to_tensor(rgb), self.geometry)
        aux_tokens = patchify(self._to_tensor(aux_clip), self.geometry)
        visible_tokens, visible_indices = apply_mask(aux_tokens, mask)
        out = self.forward_tokens(rgb_tokens, visible_tokens, visible_indices)
        return torch.softmax(out["logits"], dim=1)[:, 1]


def modality_view(rgb, modality: str):
    """Return the given modality of an RGB clip array (identity for RGB)."""
    if modality == "RGB":
        return rgb
    data = rgb.detach().cpu().numpy() if torch.is_tensor(rgb) else np.asarray(rgb)
    return descriptor_array(data, modality.lower())


def build_model(config: TrainConfig) -> FusionModel:
    """Construct a FusionModel with torch-seeded deterministic init."""
    torch.manual_seed(config.seed)
    model = FusionModel(config)
    if config.dtype == "float64":
        model.double()
    return model


def save_checkpoint(path, model: FusionModel, config: TrainConfig | None = None) -> None:
    """Write parameters and config to a single .npz archive.

    Arrays are stored as little-endian float32 keyed by their hierarchical
    state-dict names; the config rides along as a JSON string under
    ``train_config_json``.
    """
    config = config or model.config
    arrays = {
        name: param.detach().cpu().numpy().astype("<f4")
        for name, param in model.state_dict().items()
    }
    arrays["train_config_json"] = np.array(json.dumps(config.to_dict()))
    buffer = io.BytesIO()
    np.savez(buffer, **arrays)
    with open(path, "wb") as fh:
        fh.write(buffer.getvalue())


def load_checkpoint(path) -> tuple[FusionModel, TrainConfig]:
    """Rebuild the model and config saved by save_checkpoint."""
    with np.load(path, allow_pickle=False) as archive:
        if "train_config_json" not in archive:
            raise GeometryError(f"{path} is not a model checkpoint (missing config)")
        config = config_from_dict(json.loads(str(archive["train_config_json"])))
        model = build_model(config)
        state = {
            name: torch.as_tensor(archive[name].astype(np.float64 if
                                  config.dtype == "float64" else np.float32))
            for name in model.state_dict()
        }
    model.load_state_dict(state)
    return model, config
