"""Training objectives: rate-distortion, adversarial, perceptual, and the
realism-weighted total.

Conventions: the rate term is in bits (base-2 log), adversarial terms use
the natural log, and MSE is computed on the 0..255 pixel scale. The total
is lambda' * rate + MSE/100 + beta * (L_G + C_P * L_P) with lambda' = 100 *
lambda, which reduces to the plain rate-distortion objective at lambda =
1/100 and beta = 0.
"""

from dataclasses import dataclass

import torch
from torch import nn

from .conditioning import BETA_MAX_TRAIN

DISC_PROB_EPS = 1e-6
DEFAULT_PERCEPTUAL_WEIGHT = 4.26


@dataclass
class LossBreakdown:
    rate_bits_per_pixel: float
    distortion_d: float
    adversarial_g: float
    perceptual: float
    discriminator_loss: float
    total_egd: float


def loss_rd(rate_bpp, mse_255, lambda_):
    """Plain rate-distortion objective: rate + lambda * MSE."""
    return rate_bpp + lambda_ * mse_255


def _clamp_low(p):
    return torch.clamp(p, min=DISC_PROB_EPS)


def loss_gan_g(d_on_fake):
    """Generator adversarial loss: mean -log D over patches (natural log)."""
    return (-torch.log(_clamp_low(d_on_fake))).mean()


def loss_gan_d(d_on_fake, d_on_real):
    """Discriminator loss: mean -log(1 - D(fake)) + mean -log D(real)."""
    fake = (-torch.log(_clamp_low(1.0 - d_on_fake))).mean()
    real = (-torch.log(_clamp_low(d_on_real))).mean()
    return fake + real


class RandomFeatureMetric(nn.Module):
    """Multi-scale feature distance on a fixed-seed random conv pyramid.

    Level zero is the raw pixel difference, which keeps the distance zero
    only for identical inputs. Every color channel runs through the same
    single-channel filter bank, making the metric invariant to permuting
    the channels of both inputs. Weights are frozen buffers: the metric is
    differentiable in its inputs but contributes no trainable parameters.

    ``scale`` places typical mild-distortion scores in the same 0.1-0.5
    range as the pretrained plug-in metric, so the default perceptual
    weight transfers unchanged.
    """

    def __init__(self, widths=(8, 16, 16), seed=1337, scale=25.0):
        super().__init__()
        g = torch.Generator().manual_seed(seed)
        in_ch = 1
        self._num_levels = len(widths)
        self.scale = scale
        for i, w in enumerate(widths):
            k = torch.randn(w, in_ch, 3, 3, generator=g) / (3.0 * in_ch ** 0.5)
            self.register_buffer(f"kernel{i}", k)
            in_ch = w
        self.pool = nn.AvgPool2d(2, ceil_mode=True)

    def _pyramid(self, x):
        # x: (B, 3, H, W) in [0, 1]; channels fold into the batch so every
        # color channel sees the same filters.
        b = x.shape[0]
        h = x.reshape(b * 3, 1, *x.shape[-2:])
        feats = [x]
        for i in range(self._num_levels):
            k = getattr(self, f"kernel{i}").to(h.dtype)
            h = torch.conv2d(h, k, padding=1)
            feats.append(h.reshape(b, 3, -1, *h.shape[-2:]))
            h = torch.relu(h)
            h = self.pool(h)
        return feats

    def forward(self, x255, x_hat255):
        if x255.shape != x_hat255.shape:
            raise ValueError("perceptual inputs must have identical shapes")
        squeeze = x255.ndim == 3
        if squeeze:
            x255 = x255.unsqueeze(0)
            x_hat255 = x_hat255.unsqueeze(0)
        fa = self._pyramid(x255 / 255.0)
        fb = self._pyramid(x_hat255 / 255.0)
        total = 0.0
        for a, b in zip(fa, fb):
            total = total + (a - b).square().mean(dim=tuple(range(1, a.ndim)))
        total = total * (self.scale / len(fa))
        return total.squeeze(0) if squeeze else total


_default_metric = None


def perceptual(x255, x_hat255, metric=None):
    """Perceptual distance between image batches on the 0..255 scale.

    Returns a per-example tensor; zero iff the inputs are identical under
    the default metric.
    """
    global _default_metric
    if metric is None:
        if _default_metric is None:
            _default_metric = RandomFeatureMetric()
        metric = _default_metric
    return metric(x255, x_hat255)


def make_perceptual_metric(name="random_features", **kwargs):
    """Metric factory; 'lpips' plugs in the external package when installed."""
    if name == "random_features":
        return RandomFeatureMetric(**kwargs)
    if name == "lpips":
        try:
            import lpips
        except ImportError as e:
            raise ImportError(
                "perceptual metric 'lpips' requires the optional lpips package") from e
        net = lpips.LPIPS(net=kwargs.get("net", "alex"))

        class _LpipsAdapter(nn.Module):
            def __init__(self, inner):
                super().__init__()
                self.inner = inner

            def forward(self, x255, x_hat255):
                a = x255 / 127.5 - 1.0
                b = x_hat255 / 127.5 - 1.0
                return self.inner(a, b).reshape(-1)

        return _LpipsAdapter(net)
    raise ValueError(f"unknown perceptual metric {name!r}")


def loss_egd(rate_bpp, mse_255, d_on_fake_mean, perc, beta, lambda_,
             c_p=DEFAULT_PERCEPTUAL_WEIGHT, discriminator_loss=0.0):
    """Scalar total objective and its reported parts.

    ``d_on_fake_mean`` enters as the mean patch probability; the adversarial
    term is its negative natural log.
    """
    if not 0.0 <= float(beta) <= BETA_MAX_TRAIN + 1e-9:
        raise ValueError(f"beta must lie in [0, {BETA_MAX_TRAIN}]")
    adv = float(-torch.log(_clamp_low(torch.as_tensor(
        d_on_fake_mean, dtype=torch.float64))))
    rate = float(rate_bpp)
    d = float(mse_255) / 100.0
    perc = float(perc)
    lambda_prime = 100.0 * float(lambda_)
    total = lambda_prime * rate + d + float(beta) * (adv + float(c_p) * perc)
    return LossBreakdown(
        rate_bits_per_pixel=rate,
        distortion_d=d,
        adversarial_g=adv,
        perceptual=perc,
        discriminator_loss=float(discriminator_loss),
        total_egd=total,
    )


def sample_beta(rng, n=None, beta_max=BETA_MAX_TRAIN):
    """Uniform realism weights on [0, beta_max]; one scalar or a vector."""
    if n is None:
        return float(rng.uniform(0.0, beta_max))
    return rng.uniform(0.0, beta_max, size=n)
