"""Latent entropy modeling: quantizers, priors, slice prediction, rate estimates.

The main latent is modeled per symbol as a Gaussian integrated over unit
bins, with (mean, scale) predicted from hyper side information and, in the
channel-autoregressive mode, from previously decoded channel slices. The
hyper-latent uses a learned non-parametric per-channel prior. Both feed the
same 16-bit quantized CDF tables consumed by the range coder.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F
from scipy.special import ndtr

from .coder import CDF_TOTAL
from .transforms import ModelConfig

MIN_LIKELIHOOD = 1e-12
ESCAPE_RAW_BYTES = 4
_UNIFORM_BYTE_ROW = (np.arange(257, dtype=np.uint32) * 256)


@dataclass
class EntropyParams:
    """Per-symbol discretized-Gaussian coding parameters."""

    mu: torch.Tensor
    sigma: torch.Tensor


def quantize(y, mode, generator=None):
    """Quantize a tensor: 'round' (ties to even), 'noise' (train-time
    additive U(-0.5, 0.5)), or 'ste' (round forward, identity backward)."""
    if mode == "round":
        return torch.round(y)
    if mode == "ste":
        return y + (torch.round(y) - y).detach()
    if mode == "noise":
        u = torch.empty_like(y).uniform_(-0.5, 0.5, generator=generator)
        return y + u
    raise ValueError(f"unknown quantize mode {mode!r}")


def _std_normal_cdf(x):
    return 0.5 * torch.erfc(-x * (2 ** -0.5))


def gaussian_bin_probability(values, mu, sigma):
    """P(round-to-integer bin of ``values``) under N(mu, sigma^2).

    Evaluated in the lower tail on both sides (via symmetry) so far-off
    symbols do not lose the difference to cancellation.
    """
    centered = (values - mu).abs()
    upper = _std_normal_cdf((0.5 - centered) / sigma)
    lower = _std_normal_cdf((-0.5 - centered) / sigma)
    return upper - lower


def rate_bits(values, params: EntropyParams, min_likelihood=MIN_LIKELIHOOD):
    """Total bits to code ``values`` under the discretized Gaussian model.

    Differentiable in values, mu, and sigma.
    """
    p = gaussian_bin_probability(values, params.mu, params.sigma)
    p = torch.clamp(p, min=min_likelihood)
    return (-torch.log2(p)).sum()


def quantize_pmf(pmf):
    """(n, S) probabilities -> integer frequencies summing to 65536, all >= 1.

    The leftover mass after flooring goes to each row's most likely symbol,
    keeping the construction deterministic.
    """
    pmf = np.asarray(pmf, dtype=np.float64)
    n, s = pmf.shape
    freqs = np.floor(pmf * (CDF_TOTAL - s)).astype(np.int64) + 1
    deficit = CDF_TOTAL - freqs.sum(axis=1)
    if np.any(deficit < 0):
        raise ValueError("pmf rows must sum to at most 1")
    top = pmf.argmax(axis=1)
    freqs[np.arange(n), top] += deficit
    return freqs


def freqs_to_cdf_rows(freqs):
    n = freqs.shape[0]
    rows = np.zeros((n, freqs.shape[1] + 1), dtype=np.uint32)
    rows[:, 1:] = np.cumsum(freqs, axis=1)
    return rows


def build_cdf_tables(params: EntropyParams, alphabet_limit):
    """Quantized 16-bit CDF rows over [-L, L] plus a trailing escape bucket.

    One row per symbol, flattened in C order. The tail mass outside the
    alphabet is folded into the escape bucket.
    """
    mu = params.mu.detach().cpu().numpy().astype(np.float64).ravel()
    sigma = params.sigma.detach().cpu().numpy().astype(np.float64).ravel()
    L = alphabet_limit
    edges = np.arange(-L, L + 1, dtype=np.float64) + 0.5       # (2L+1,) upper edges
    z = (edges[None, :] - mu[:, None]) / sigma[:, None]
    cdf_vals = ndtr(z)                                         # (n, 2L+1)
    low_tail = ndtr((-L - 0.5 - mu) / sigma)
    pmf = np.diff(np.concatenate([low_tail[:, None], cdf_vals], axis=1), axis=1)
    escape = np.clip(low_tail + (1.0 - cdf_vals[:, -1]), 0.0, 1.0)
    full = np.concatenate([pmf, escape[:, None]], axis=1)
    return freqs_to_cdf_rows(quantize_pmf(full))


def values_to_indices(values, alphabet_limit):
    """Integer symbol values -> table indices; out-of-range maps to escape."""
    v = np.asarray(values, dtype=np.int64).ravel()
    L = alphabet_limit
    idx = v + L
    esc = (v < -L) | (v > L)
    idx[esc] = 2 * L + 1
    return idx, esc, v


def encode_values(encoder, values, cdf_rows, alphabet_limit):
    """Feed integer values through the range encoder, escaping rare outliers.

    Escaped values follow the block as fixed-width raw bytes (two's
    complement, big-endian) coded with a uniform byte distribution.
    """
    idx, esc, v = values_to_indices(values, alphabet_limit)
    encoder.encode(idx, cdf_rows)
    if esc.any():
        raw = (v[esc] + (1 << 31)) & 0xFFFFFFFF
        shifts = np.array([24, 16, 8, 0], dtype=np.int64)
        byte_syms = ((raw[:, None] >> shifts[None, :]) & 0xFF).ravel()
        rows = np.broadcast_to(_UNIFORM_BYTE_ROW, (len(byte_syms), 257))
        encoder.encode(byte_syms, rows)


def decode_values(decoder, cdf_rows, alphabet_limit):
    """Inverse of :func:`encode_values`; returns int64 values."""
    L = alphabet_limit
    idx = decoder.decode(cdf_rows)
    values = idx - L
    esc = idx == 2 * L + 1
    n_esc = int(esc.sum())
    if n_esc:
        rows = np.broadcast_to(_UNIFORM_BYTE_ROW, (4 * n_esc, 257))
        byte_syms = decoder.decode(rows).reshape(n_esc, 4).astype(np.uint64)
        raw = (byte_syms[:, 0] << 24) | (byte_syms[:, 1] << 16) \
            | (byte_syms[:, 2] << 8) | byte_syms[:, 3]
        values[esc] = raw.astype(np.int64) - (1 << 31)
    return values


class FactorizedPrior(nn.Module):
    """Learned non-parametric CDF per channel for the hyper-latent.

    A per-channel chain of monotone 1-D transforms ending in a sigmoid; the
    bin probability is the CDF difference at the half-integer edges.
    """

    def __init__(self, channels, filters=(3, 3, 3), init_scale=10.0):
        super().__init__()
        self.channels = channels
        dims = (1,) + tuple(filters) + (1,)
        self._num_layers = len(dims) - 1
        scale = init_scale ** (1.0 / self._num_layers)
        self.matrices = nn.ParameterList()
        self.biases = nn.ParameterList()
        self.factors = nn.ParameterList()
        for k in range(self._num_layers):
            init = math.log(math.expm1(1.0 / scale / dims[k + 1]))
            self.matrices.append(nn.Parameter(
                torch.full((channels, dims[k + 1], dims[k]), init)))
            self.biases.append(nn.Parameter(
                torch.empty(channels, dims[k + 1], 1).uniform_(-0.5, 0.5)))
            if k < self._num_layers - 1:
                self.factors.append(nn.Parameter(
                    torch.zeros(channels, dims[k + 1], 1)))

    def _logits(self, x):
        # x: (channels, 1, n) -> (channels, 1, n) pre-sigmoid CDF logits
        for k in range(self._num_layers):
            x = torch.bmm(F.softplus(self.matrices[k]), x) + self.biases[k]
            if k < self._num_layers - 1:
                x = x + torch.tanh(self.factors[k]) * torch.tanh(x)
        return x

    def _cdf(self, x):
        return torch.sigmoid(self._logits(x))

    def bin_probability(self, z):
        """(B, C, h, w) values -> same-shape bin probabilities."""
        b, c, h, w = z.shape
        flat = z.permute(1, 0, 2, 3).reshape(c, 1, -1)
        p = self._cdf(flat + 0.5) - self._cdf(flat - 0.5)
        return p.reshape(c, b, h, w).permute(1, 0, 2, 3)

    def bits(self, z, min_likelihood=MIN_LIKELIHOOD):
        p = torch.clamp(self.bin_probability(z), min=min_likelihood)
        return (-torch.log2(p)).sum()

    @torch.no_grad()
    def cdf_rows(self, alphabet_limit):
        """Per-channel quantized CDF rows over [-L, L] plus escape."""
        L = alphabet_limit
        grid = torch.arange(-L, L + 1, dtype=torch.float32)
        x = grid.reshape(1, 1, -1).expand(self.channels, 1, -1).to(
            self.biases[0].device, self.biases[0].dtype)
        upper = self._cdf(x + 0.5).squeeze(1).cpu().numpy().astype(np.float64)
        lower = self._cdf(x - 0.5).squeeze(1).cpu().numpy().astype(np.float64)
        pmf = np.clip(upper - lower, 0.0, 1.0)
        low_tail = lower[:, :1]
        high_tail = 1.0 - upper[:, -1:]
        escape = np.clip(low_tail + high_tail, 0.0, 1.0)
        full = np.concatenate([pmf, escape], axis=1)
        full /= np.maximum(full.sum(axis=1, keepdims=True), 1.0)
        return freqs_to_cdf_rows(quantize_pmf(full))


class HyperEncoder(nn.Module):
    """Latent -> hyper-latent; two x2 downsamplings."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        m, w, hz = cfg.latent_channels, cfg.hyper_width, cfg.hyper_channels
        self.net = nn.Sequential(
            nn.Conv2d(m, w, 3, 1, 1), nn.ReLU(),
            nn.Conv2d(w, w, 3, 2, 1), nn.ReLU(),
            nn.Conv2d(w, hz, 3, 2, 1),
        )

    def forward(self, y):
        return self.net(y)


class HyperDecoder(nn.Module):
    """Hyper-latent -> feature tensor at the latent's spatial resolution."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        hz, w, f = cfg.hyper_channels, cfg.hyper_width, cfg.hyper_features
        self.up1 = nn.ConvTranspose2d(hz, w, 3, 2, 1, output_padding=1)
        self.up2 = nn.ConvTranspose2d(w, w, 3, 2, 1, output_padding=1)
        self.out = nn.Conv2d(w, f, 3, 1, 1)

    def forward(self, z_hat, target_hw=None):
        x = torch.relu(self.up1(z_hat))
        x = torch.relu(self.up2(x))
        x = self.out(x)
        if target_hw is not None:
            x = x[..., :target_hw[0], :target_hw[1]]
        return x


class SlicePredictor(nn.Module):
    """Two conv layers mapping hyper features + decoded slices to (mu, sigma)."""

    def __init__(self, in_channels, width, slice_channels):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(in_channels, width, 3, 1, 1), nn.ReLU(),
            nn.Conv2d(width, 2 * slice_channels, 3, 1, 1),
        )

    def forward(self, x):
        return self.net(x)


class EntropyModel(nn.Module):
    """Hyper path, channel-slice prediction, and rate estimation in one bundle."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.hyper_encoder = HyperEncoder(cfg)
        self.hyper_decoder = HyperDecoder(cfg)
        self.z_prior = FactorizedPrior(cfg.hyper_channels)
        sc = cfg.slice_channels
        self.predictors = nn.ModuleList([
            SlicePredictor(cfg.hyper_features + i * sc, cfg.charm_width, sc)
            for i in range(cfg.coding_slices)
        ])

    @property
    def num_slices(self):
        return self.cfg.coding_slices

    def split_slices(self, y):
        return list(torch.chunk(y, self.num_slices, dim=1))

    def hyper_params(self, z_hat, target_hw=None):
        """Decode hyper side information into prediction features."""
        return self.hyper_decoder(z_hat, target_hw)

    def charm_predict(self, hyper_features, decoded_slices, slice_index):
        """Entropy parameters for one slice given all previously decoded ones."""
        if slice_index < 0 or slice_index >= self.num_slices:
            raise ValueError(f"slice index {slice_index} out of range")
        if len(decoded_slices) != slice_index:
            raise ValueError(
                f"slice {slice_index} needs exactly {slice_index} decoded slices, "
                f"got {len(decoded_slices)}")
        x = torch.cat([hyper_features, *decoded_slices], dim=1)
        out = self.predictors[slice_index](x)
        mu, sigma_raw = torch.chunk(out, 2, dim=1)
        sigma = self.cfg.sigma_min + F.softplus(sigma_raw)
        return EntropyParams(mu=mu, sigma=sigma)

    def predict_all(self, hyper_features, y_quantized):
        """(mu, sigma) for every symbol, conditioning on quantized slices."""
        mus, sigmas = [], []
        decoded = []
        for i, y_slice in enumerate(self.split_slices(y_quantized)):
            p = self.charm_predict(hyper_features, decoded, i)
            mus.append(p.mu)
            sigmas.append(p.sigma)
            decoded.append(y_slice)
        return EntropyParams(mu=torch.cat(mus, 1), sigma=torch.cat(sigmas, 1))

    def training_pass(self, y, noise_generator=None, quant_mode="ste"):
        """Rates and the quantized latent for one training step.

        Rate terms use additive-noise quantization; the latent handed to the
        generator and the slice-prediction context use ``quant_mode``
        ('ste' normally, 'noise' for smooth gradient checks).
        """
        z = self.hyper_encoder(y)
        z_ctx = quantize(z, quant_mode, noise_generator)
        z_rate = z_ctx if quant_mode == "noise" else quantize(z, "noise", noise_generator)
        bits_z = self.z_prior.bits(z_rate)
        features = self.hyper_decoder(z_ctx, y.shape[-2:])
        y_ctx = quantize(y, quant_mode, noise_generator)
        params = self.predict_all(features, y_ctx)
        y_rate = y_ctx if quant_mode == "noise" else quantize(y, "noise", noise_generator)
        bits_y = rate_bits(y_rate, params)
        return {
            "bits_y": bits_y,
            "bits_z": bits_z,
            "y_quantized": y_ctx,
            "params": params,
        }
