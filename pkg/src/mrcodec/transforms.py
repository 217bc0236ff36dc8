"""Neural transforms: encoder, realism-conditional generator, patch discriminator.

The autoencoder is a stack of stride-2 convolutions with residual blocks
(3x3 kernels, ReLU). The generator's residual blocks take an additive
per-channel offset derived from the realism weight; the table scheme
instead modulates the non-residual (upsampling) convolutions.
"""

from dataclasses import dataclass, asdict

import torch
from torch import nn

from .conditioning import (
    BETA_MAX_INFER,
    BETA_MAX_TRAIN,
    TABLE_BETA_GRID,
    BetaEmbedding,
    FourierLayerCond,
    TableLayerCond,
)

LATENT_STRIDE = 16
HYPER_STRIDE = 4
PAD_MULTIPLE = LATENT_STRIDE * HYPER_STRIDE


@dataclass
class ModelConfig:
    """Channel widths and structural knobs for the whole codec."""

    latent_channels: int = 200        # M; must split evenly into the slices
    gen_width: int = 64               # N (paper preset: 256)
    enc_width: int = 64
    hyper_channels: int = 96          # hyper-latent channels
    hyper_width: int = 96
    hyper_features: int = 128         # features handed to slice predictors
    num_slices: int = 10
    charm_width: int = 64
    blocks_per_stage: int = 1
    cond_scheme: str = "fourier"      # fourier | table | none
    embed_width: int = 512
    fourier_freqs: int = 10
    table_grid: tuple = TABLE_BETA_GRID
    beta_max_train: float = BETA_MAX_TRAIN
    beta_max_infer: float = BETA_MAX_INFER
    sigma_min: float = 0.11
    alphabet_limit: int = 64          # symbols clamp; escape beyond
    entropy_mode: str = "charm"       # charm | hyperprior
    disc_width: int = 48

    def __post_init__(self):
        if self.cond_scheme not in ("fourier", "table", "none"):
            raise ValueError(f"unknown cond_scheme {self.cond_scheme!r}")
        if self.entropy_mode not in ("charm", "hyperprior"):
            raise ValueError(f"unknown entropy_mode {self.entropy_mode!r}")
        if self.latent_channels % self.coding_slices != 0:
            raise ValueError("latent_channels must divide evenly into slices")
        if min(self.latent_channels, self.gen_width, self.enc_width,
               self.hyper_channels, self.hyper_width) < 1:
            raise ValueError("channel widths must be positive")

    @property
    def coding_slices(self):
        return self.num_slices if self.entropy_mode == "charm" else 1

    @property
    def slice_channels(self):
        return self.latent_channels // self.coding_slices

    def to_dict(self):
        d = asdict(self)
        d["table_grid"] = list(self.table_grid)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["table_grid"] = tuple(d.get("table_grid", TABLE_BETA_GRID))
        return cls(**d)

    @classmethod
    def paper_preset(cls, **overrides):
        """Widths from the full-scale setting (wider generator, 320 latents)."""
        base = dict(latent_channels=320, gen_width=256, enc_width=192,
                    hyper_channels=192, hyper_width=192, hyper_features=320,
                    charm_width=224, blocks_per_stage=3, disc_width=64)
        base.update(overrides)
        return cls(**base)

    @classmethod
    def tiny(cls, **overrides):
        """Minimal config for gradient checks and fast tests."""
        base = dict(latent_channels=4, gen_width=8, enc_width=8,
                    hyper_channels=4, hyper_width=8, hyper_features=8,
                    num_slices=2, charm_width=8, disc_width=8)
        base.update(overrides)
        return cls(**base)


def normalize_images(x255):
    """(B, 3, H, W) float tensor on the 0..255 scale -> centered net input."""
    return x255 / 255.0 - 0.5


def denormalize_images(x):
    """Centered net output -> 0..255 scale (no clipping; loss path stays raw)."""
    return (x + 0.5) * 255.0


class ResidualBlock(nn.Module):
    def __init__(self, channels):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)

    def forward(self, x):
        return x + self.conv2(torch.relu(self.conv1(x)))


class CondResidualBlock(nn.Module):
    """Residual block whose two convs each receive an additive conditioning offset."""

    def __init__(self, channels, embed_width):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.conv2 = nn.Conv2d(channels, channels, 3, 1, 1)
        self.cond1 = FourierLayerCond(embed_width, channels)
        self.cond2 = FourierLayerCond(embed_width, channels)

    def forward(self, x, f_beta):
        h = self.cond1(self.conv1(x), f_beta)
        h = self.conv2(torch.relu(h))
        return x + self.cond2(h, f_beta)


class Encoder(nn.Module):
    """Maps a centered image to the continuous latent; four x2 downsamplings."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        w, m, b = cfg.enc_width, cfg.latent_channels, cfg.blocks_per_stage
        self.down = nn.ModuleList([
            nn.Conv2d(3, w, 3, 2, 1),
            nn.Conv2d(w, w, 3, 2, 1),
            nn.Conv2d(w, w, 3, 2, 1),
            nn.Conv2d(w, m, 3, 2, 1),
        ])
        self.blocks = nn.ModuleList([
            nn.Sequential(*[ResidualBlock(w) for _ in range(b)])
            for _ in range(3)
        ])

    def forward(self, x):
        if x.shape[-2] % LATENT_STRIDE or x.shape[-1] % LATENT_STRIDE:
            raise ValueError(
                f"encoder input dims {tuple(x.shape[-2:])} must be multiples of {LATENT_STRIDE}")
        for i, down in enumerate(self.down):
            x = down(x)
            if i < 3:
                x = self.blocks[i](x)
        return x


class Generator(nn.Module):
    """Reconstructs an image from the quantized latent at a chosen realism weight."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        w, m, b = cfg.gen_width, cfg.latent_channels, cfg.blocks_per_stage
        self.up = nn.ModuleList([
            nn.ConvTranspose2d(m, w, 3, 2, 1, output_padding=1),
            nn.ConvTranspose2d(w, w, 3, 2, 1, output_padding=1),
            nn.ConvTranspose2d(w, w, 3, 2, 1, output_padding=1),
            nn.ConvTranspose2d(w, 3, 3, 2, 1, output_padding=1),
        ])
        self.scheme = cfg.cond_scheme
        if self.scheme == "fourier":
            self.embed = BetaEmbedding(cfg.fourier_freqs, cfg.embed_width,
                                       cfg.beta_max_train)
            self.blocks = nn.ModuleList([
                nn.ModuleList([CondResidualBlock(w, cfg.embed_width) for _ in range(b)])
                for _ in range(3)
            ])
        else:
            self.blocks = nn.ModuleList([
                nn.ModuleList([ResidualBlock(w) for _ in range(b)])
                for _ in range(3)
            ])
        if self.scheme == "table":
            self.table_conds = nn.ModuleList([
                TableLayerCond(w, cfg.table_grid),
                TableLayerCond(w, cfg.table_grid),
                TableLayerCond(w, cfg.table_grid),
                TableLayerCond(3, cfg.table_grid),
            ])

    def _check_beta(self, beta, batch, device, dtype):
        if not torch.is_tensor(beta):
            beta = torch.tensor(float(beta), device=device, dtype=dtype)
        beta = beta.to(device=device, dtype=dtype)
        if beta.ndim == 0:
            beta = beta.expand(batch)
        if beta.shape != (batch,):
            raise ValueError("realism weight must be scalar or one value per example")
        if bool((beta < -1e-9).any()) or bool((beta > self.cfg.beta_max_train + 1e-9).any()):
            raise ValueError(
                f"realism weight outside [0, {self.cfg.beta_max_train}]")
        return beta

    def forward(self, y_hat, beta):
        x = y_hat
        beta = self._check_beta(beta, x.shape[0], x.device, x.dtype)
        f_beta = self.embed(beta) if self.scheme == "fourier" else None
        for i, up in enumerate(self.up):
            x = up(x)
            if self.scheme == "table":
                x = self.table_conds[i](x, beta)
            if i < 3:
                for blk in self.blocks[i]:
                    x = blk(x, f_beta) if self.scheme == "fourier" else blk(x)
        return x


class Discriminator(nn.Module):
    """Patch discriminator conditioned on the quantized latent.

    The latent is nearest-upsampled to image resolution and concatenated
    with the (centered) image; the output is a per-patch probability map.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        w, m = cfg.disc_width, cfg.latent_channels
        self.body = nn.Sequential(
            nn.Conv2d(3 + m, w, 3, 2, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(w, 2 * w, 3, 2, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(2 * w, 4 * w, 3, 2, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(4 * w, 4 * w, 3, 2, 1), nn.LeakyReLU(0.2),
            nn.Conv2d(4 * w, 1, 1),
        )

    def forward(self, y_hat, image):
        expect = (y_hat.shape[-2] * LATENT_STRIDE, y_hat.shape[-1] * LATENT_STRIDE)
        if tuple(image.shape[-2:]) != expect:
            raise ValueError(
                f"image dims {tuple(image.shape[-2:])} do not match latent dims x{LATENT_STRIDE}")
        cond = torch.repeat_interleave(
            torch.repeat_interleave(y_hat, LATENT_STRIDE, dim=-2), LATENT_STRIDE, dim=-1)
        logits = self.body(torch.cat([image, cond], dim=1))
        return torch.sigmoid(logits)
