"""Turn the scalar realism weight into per-layer generator modulation.

Two schemes: a Fourier-feature MLP whose output is projected per layer and
added to conv outputs (the main path), and a lookup table of per-channel
scales and biases indexed by a fixed grid of weights (ablation path).
"""

import math

import torch
from torch import nn

BETA_MAX_TRAIN = 5.12
BETA_MAX_INFER = 2.56
TABLE_BETA_GRID = (0.0, 0.08, 0.16, 0.32, 0.64, 1.28, 2.56, 5.12)


def fourier_embed(beta, num_freqs=10, beta_max=BETA_MAX_TRAIN):
    """Sinusoidal position-style encoding of the realism weight.

    The weight is normalized to t = beta / beta_max in [0, 1], then encoded
    as (sin(2^0 pi t), cos(2^0 pi t), ..., sin(2^{L-1} pi t), cos(2^{L-1} pi t)).
    Returns shape (..., 2 * num_freqs).
    """
    if num_freqs < 1:
        raise ValueError("num_freqs must be >= 1")
    beta = torch.as_tensor(beta, dtype=torch.get_default_dtype()) \
        if not torch.is_tensor(beta) else beta
    t = beta / beta_max
    freqs = (2.0 ** torch.arange(num_freqs, dtype=t.dtype, device=t.device)) * math.pi
    angles = t.unsqueeze(-1) * freqs
    out = torch.stack([torch.sin(angles), torch.cos(angles)], dim=-1)
    return out.reshape(*beta.shape, 2 * num_freqs)


class BetaEmbedding(nn.Module):
    """Fourier features followed by a 2-layer MLP (512 wide, ReLU between)."""

    def __init__(self, num_freqs=10, width=512, beta_max=BETA_MAX_TRAIN):
        super().__init__()
        self.num_freqs = num_freqs
        self.beta_max = beta_max
        self.fc1 = nn.Linear(2 * num_freqs, width)
        self.fc2 = nn.Linear(width, width)

    def forward(self, beta):
        """(B,) realism weights -> (B, width) shared conditioning features."""
        f = fourier_embed(beta, self.num_freqs, self.beta_max)
        return self.fc2(torch.relu(self.fc1(f)))


class FourierLayerCond(nn.Module):
    """Per-layer learned projection of the shared features, added to a conv output.

    Zero-initialized so an untrained generator is weight-agnostic.
    """

    def __init__(self, embed_width, channels):
        super().__init__()
        self.proj = nn.Linear(embed_width, channels, bias=False)
        nn.init.zeros_(self.proj.weight)

    def forward(self, layer_out, f_beta):
        if f_beta.shape[-1] != self.proj.in_features:
            raise ValueError("conditioning feature width mismatch")
        offset = self.proj(f_beta)
        if offset.shape[-1] != layer_out.shape[1]:
            raise ValueError("conditioning channel mismatch")
        return layer_out + offset[:, :, None, None]


def snap_to_grid(beta, grid, snap=True, tol=1e-6):
    """Index of the grid entry for ``beta``: nearest key, ties to the lower one."""
    grid_t = torch.as_tensor(grid, dtype=torch.float64)
    b = torch.as_tensor(beta, dtype=torch.float64)
    dist = (b.unsqueeze(-1) - grid_t).abs()
    idx = dist.argmin(dim=-1)
    if not snap:
        exact = dist.gather(-1, idx.unsqueeze(-1)).squeeze(-1) <= tol
        if not bool(exact.all()):
            raise ValueError("realism weight off the table grid and snapping disabled")
    return idx


class TableLayerCond(nn.Module):
    """Per-channel scale and bias looked up from a grid of realism weights.

    Scales start at 1 and biases at 0, so the table is an identity until
    trained.
    """

    def __init__(self, channels, grid=TABLE_BETA_GRID):
        super().__init__()
        g = sorted(float(v) for v in grid)
        if any(b <= a for a, b in zip(g, g[1:])):
            raise ValueError("grid keys must be strictly increasing")
        self.register_buffer("grid", torch.tensor(g))
        self.scale = nn.Parameter(torch.ones(len(g), channels))
        self.bias = nn.Parameter(torch.zeros(len(g), channels))

    def forward(self, layer_out, beta, snap=True):
        idx = snap_to_grid(beta, self.grid, snap=snap).to(layer_out.device)
        if idx.ndim == 0:
            idx = idx.expand(layer_out.shape[0])
        s = self.scale[idx][:, :, None, None].to(layer_out.dtype)
        b = self.bias[idx][:, :, None, None].to(layer_out.dtype)
        return s * layer_out + b

    def lookup_index(self, beta, snap=True):
        """Grid index used for ``beta``; exposed for inspection."""
        return snap_to_grid(beta, self.grid, snap=snap)
