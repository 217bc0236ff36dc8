"""End-to-end optimization of the codec and discriminator.

One step = one encoder/generator/entropy update and one discriminator
update from the same batch. The rate weight runs 10x high for the first
15% of steps and the learning rate drops 10x for the last 15%. All
randomness derives from (seed, step), so interrupted runs resume
bit-exactly.
"""

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np
import torch

from . import losses
from .conditioning import BETA_MAX_TRAIN
from .data import CropDataset
from .model import CHECKPOINT_VERSION, CodecModel, save_model
from .transforms import Discriminator, ModelConfig, normalize_images

RATE_LAMBDA_GRID = (0.32, 0.08, 0.02, 0.005)
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
# Pre-clip gradient norms of the 255-scale objective sit near 2e2 at init
# (MSE/100 units); the guard only needs to catch blow-up spikes above that.
GRAD_CLIP_NORM = 500.0

BETA_ABLATION_GRID = (0.0, 0.08, 0.16, 0.32, 0.64, 1.28, 2.56, 5.12)
CP_PRIME_ABLATION_GRID = (0.0, 1.0, 2.0, 4.26, 8.0)


class TrainingDiverged(RuntimeError):
    """Raised when a loss goes non-finite; diagnostics are dumped first."""


@dataclass
class TrainConfig:
    name: str = "run"
    total_steps: int = 200_000
    batch_size: int = 8
    crop: int = 64
    lambda_: float = 0.02
    c_p: float = losses.DEFAULT_PERCEPTUAL_WEIGHT
    beta_mode: str = "sampled"          # sampled | fixed
    beta_fixed: float = 2.56
    beta_max: float = BETA_MAX_TRAIN
    per_example_beta: bool = True       # False: one weight per batch
    cond_scheme: str = "fourier"        # fourier | table | none
    entropy: str = "charm"              # charm | hyperprior
    use_gan: bool = True
    lr: float = 1e-4
    warmup_frac: float = 0.15
    decay_frac: float = 0.15
    gan_warmup_frac: float = 0.15  # realism terms join after this fraction
    seed: int = 0
    grad_clip_norm: float = GRAD_CLIP_NORM
    log_every: int = 100
    checkpoint_every: int = 0           # 0: only final
    model_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.total_steps <= 0:
            raise ValueError("total_steps must be positive")
        if not (0.0 < self.warmup_frac < 0.5 and 0.0 < self.decay_frac < 0.5):
            raise ValueError("schedule fractions must lie in (0, 0.5)")
        if not 0.0 <= self.gan_warmup_frac < 1.0:
            raise ValueError("gan_warmup_frac must lie in [0, 1)")
        if self.beta_mode not in ("sampled", "fixed"):
            raise ValueError(f"unknown beta_mode {self.beta_mode!r}")
        if self.beta_mode == "fixed" and not 0.0 <= self.beta_fixed <= self.beta_max:
            raise ValueError("fixed realism weight out of range")
        if self.entropy not in ("charm", "hyperprior"):
            raise ValueError(f"unknown entropy model {self.entropy!r}")
        self.model_config()  # validates widths and cond scheme

    def model_config(self):
        return ModelConfig(cond_scheme=self.cond_scheme,
                           entropy_mode=self.entropy,
                           **self.model_overrides)

    def lambda_label(self):
        for i, lam in enumerate(RATE_LAMBDA_GRID):
            if math.isclose(lam, self.lambda_):
                return i
        return 255

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


def preset(kind, **overrides):
    """Named experiment configs.

    ``mse_baseline`` trains the plain rate-distortion objective without a
    discriminator, ``gan_baseline`` a single fixed realism weight, and
    ``multi_realism`` the full receiver-conditioned model.
    """
    if kind == "mse_baseline":
        base = dict(name=kind, beta_mode="fixed", beta_fixed=0.0, use_gan=False,
                    cond_scheme="none", c_p=0.0)
    elif kind == "gan_baseline":
        base = dict(name=kind, beta_mode="fixed", beta_fixed=2.56, use_gan=True,
                    cond_scheme="none")
    elif kind == "multi_realism":
        base = dict(name=kind, beta_mode="sampled", use_gan=True,
                    cond_scheme="fourier")
    else:
        raise ValueError(f"unknown preset {kind!r}")
    base.update(overrides)
    return TrainConfig(**base)


def ablation_grid(base=None):
    """The two tuning sweeps plus the entropy-model toggle.

    The sweeps decouple the perceptual weight from the adversarial weight
    via C_P' = beta * C_P and run on the plain hyperprior entropy model;
    the toggle re-enables channel-autoregressive coding on the chosen
    operating point.
    """
    base = base or TrainConfig()
    configs = []
    for beta in BETA_ABLATION_GRID:
        c_p = 4.26 / beta if beta > 0 else 0.0
        configs.append(replace(
            base, name=f"gan_sweep_beta_{beta:g}", beta_mode="fixed",
            beta_fixed=beta, use_gan=beta > 0, cond_scheme="none",
            entropy="hyperprior", c_p=c_p))
    for cp_prime in CP_PRIME_ABLATION_GRID:
        configs.append(replace(
            base, name=f"cp_sweep_{cp_prime:g}", beta_mode="fixed",
            beta_fixed=2.56, use_gan=True, cond_scheme="none",
            entropy="hyperprior", c_p=cp_prime / 2.56))
    for entropy in ("hyperprior", "charm"):
        configs.append(replace(
            base, name=f"entropy_{entropy}", beta_mode="fixed",
            beta_fixed=2.56, use_gan=True, cond_scheme="none",
            entropy=entropy, c_p=4.26 / 2.56))
    return configs


def _derived_seed(seed, step, tag):
    h = hashlib.sha256(f"{seed}:{step}:{tag}".encode()).digest()
    return int.from_bytes(h[:8], "little") & (2 ** 63 - 1)


METRIC_COLUMNS = ("step", "total_egd", "rate_bpp", "mse_255", "distortion_d",
                  "adversarial_g", "perceptual", "discriminator_loss",
                  "beta_mean", "lambda_multiplier", "lr")


class Trainer:
    def __init__(self, config: TrainConfig, dataset_dir, run_dir,
                 dtype=torch.float32, device="cpu"):
        self.config = config
        self.dtype = dtype
        self.device = device
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.dataset = CropDataset(dataset_dir, config.crop)
        if len(self.dataset) == 0:
            raise ValueError("dataset is empty")

        torch.manual_seed(_derived_seed(config.seed, -1, "init"))
        self.model = CodecModel(config.model_config()).to(dtype)
        self.disc = Discriminator(self.model.cfg).to(dtype) if config.use_gan else None
        self.perceptual_metric = losses.RandomFeatureMetric().to(dtype)
        self.opt_eg = torch.optim.Adam(self.model.parameters(), lr=config.lr,
                                       betas=ADAM_BETAS, eps=ADAM_EPS)
        self.opt_d = (torch.optim.Adam(self.disc.parameters(), lr=config.lr,
                                       betas=ADAM_BETAS, eps=ADAM_EPS)
                      if self.disc is not None else None)
        self.step = 0
        self._metrics_path = self.run_dir / "metrics.csv"
        with open(self.run_dir / "config.json", "w") as fh:
            json.dump(config.to_dict(), fh, indent=2)

    # -- schedules ---------------------------------------------------------

    def lambda_multiplier(self, step=None):
        step = self.step if step is None else step
        boundary = math.ceil(self.config.warmup_frac * self.config.total_steps)
        return 10.0 if step < boundary else 1.0

    def learning_rate(self, step=None):
        step = self.step if step is None else step
        boundary = math.floor((1.0 - self.config.decay_frac) * self.config.total_steps)
        return self.config.lr if step < boundary else self.config.lr / 10.0

    def effective_lambda(self, step=None):
        return self.config.lambda_ * self.lambda_multiplier(step)

    def gan_active(self, step=None):
        """Realism terms engage once reconstruction has had a head start."""
        if self.disc is None:
            return False
        step = self.step if step is None else step
        return step >= math.ceil(self.config.gan_warmup_frac * self.config.total_steps)

    # -- stepping ----------------------------------------------------------

    def _sample_beta(self, batch_size):
        cfg = self.config
        if cfg.beta_mode == "fixed":
            return torch.full((batch_size,), cfg.beta_fixed, dtype=self.dtype)
        rng = np.random.default_rng(_derived_seed(cfg.seed, self.step, "beta"))
        if cfg.per_example_beta:
            vals = losses.sample_beta(rng, batch_size, cfg.beta_max)
        else:
            vals = np.full(batch_size, losses.sample_beta(rng, None, cfg.beta_max))
        return torch.as_tensor(vals, dtype=self.dtype)

    def next_batch(self):
        rng = np.random.default_rng(_derived_seed(self.config.seed, self.step, "data"))
        return self.dataset.sample_batch(rng, self.config.batch_size)

    def train_step(self, batch):
        """One optimization step on a (B, S, S, 3) uint8 batch."""
        cfg = self.config
        x255 = torch.from_numpy(np.ascontiguousarray(batch)).to(self.dtype)
        x255 = x255.permute(0, 3, 1, 2)
        b = x255.shape[0]
        npix = float(b * x255.shape[-2] * x255.shape[-1])
        gen = torch.Generator().manual_seed(_derived_seed(cfg.seed, self.step, "noise"))
        beta = self._sample_beta(b)

        y = self.model.encode_latent(x255)
        ent = self.model.entropy.training_pass(y, gen, quant_mode="ste")
        rate_bpp = (ent["bits_y"] + ent["bits_z"]) / npix
        y_hat = ent["y_quantized"]
        x_hat = self.model.reconstruct(y_hat, beta)

        per_ex_mse = (x255 - x_hat).square().mean(dim=(1, 2, 3))
        distortion = per_ex_mse.mean() / 100.0
        lambda_prime = 100.0 * self.effective_lambda()

        adv = torch.zeros((), dtype=self.dtype)
        perc = torch.zeros((), dtype=self.dtype)
        beta_term = torch.zeros((), dtype=self.dtype)
        gan_now = self.gan_active()
        if gan_now:
            d_on_fake = self.disc(y_hat, normalize_images(x_hat))
            adv_per_ex = -torch.log(torch.clamp(
                d_on_fake, min=losses.DISC_PROB_EPS)).mean(dim=(1, 2, 3))
            perc_per_ex = self.perceptual_metric(x255, x_hat)
            beta_term = (beta * (adv_per_ex + cfg.c_p * perc_per_ex)).mean()
            adv = adv_per_ex.mean().detach()
            perc = perc_per_ex.mean().detach()

        total = lambda_prime * rate_bpp + distortion + beta_term
        if not torch.isfinite(total):
            self._dump_divergence(total, rate_bpp, distortion)
            raise TrainingDiverged(
                f"non-finite loss at step {self.step}; see diverged.json")

        self.opt_eg.zero_grad(set_to_none=True)
        total.backward()
        torch.nn.utils.clip_grad_norm_(self.model.parameters(), cfg.grad_clip_norm)
        for group in self.opt_eg.param_groups:
            group["lr"] = self.learning_rate()
        self.opt_eg.step()

        disc_loss = torch.zeros(())
        if gan_now:
            d_fake = self.disc(y_hat.detach(), normalize_images(x_hat.detach()))
            d_real = self.disc(y_hat.detach(), normalize_images(x255))
            disc_loss = losses.loss_gan_d(d_fake, d_real)
            if not torch.isfinite(disc_loss):
                self._dump_divergence(disc_loss, rate_bpp, distortion)
                raise TrainingDiverged(
                    f"non-finite discriminator loss at step {self.step}")
            self.opt_d.zero_grad(set_to_none=True)
            disc_loss.backward()
            torch.nn.utils.clip_grad_norm_(self.disc.parameters(), cfg.grad_clip_norm)
            for group in self.opt_d.param_groups:
                group["lr"] = self.learning_rate()
            self.opt_d.step()

        return {
            "step": self.step,
            "total_egd": float(total.detach()),
            "rate_bpp": float(rate_bpp.detach()),
            "mse_255": float(per_ex_mse.mean().detach()),
            "distortion_d": float(distortion.detach()),
            "adversarial_g": float(adv),
            "perceptual": float(perc),
            "discriminator_loss": float(disc_loss.detach()),
            "beta_mean": float(beta.mean()),
            "lambda_multiplier": self.lambda_multiplier(),
            "lr": self.learning_rate(),
        }

    def _dump_divergence(self, total, rate_bpp, distortion):
        diag = {
            "step": self.step,
            "total": repr(total),
            "rate_bpp": repr(rate_bpp),
            "distortion": repr(distortion),
        }
        with open(self.run_dir / "diverged.json", "w") as fh:
            json.dump(diag, fh, indent=2)

    def step_once(self):
        metrics = self.train_step(self.next_batch())
        self.step += 1
        return metrics

    def run(self, steps=None, metrics_hook=None):
        """Train up to ``steps`` (default: the configured total)."""
        target = self.config.total_steps if steps is None else min(
            steps + self.step, self.config.total_steps)
        new_file = not self._metrics_path.exists()
        with open(self._metrics_path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(METRIC_COLUMNS)
            while self.step < target:
                metrics = self.step_once()
                if metrics_hook is not None:
                    metrics_hook(metrics)
                if metrics["step"] % self.config.log_every == 0 \
                        or metrics["step"] == self.config.total_steps - 1:
                    writer.writerow([metrics[c] for c in METRIC_COLUMNS])
                every = self.config.checkpoint_every
                if every and self.step % every == 0 and self.step < target:
                    self.save_checkpoint(self.run_dir / f"ckpt-{self.step:08d}.pt")
        final = self.run_dir / "ckpt-final.pt"
        self.save_checkpoint(final)
        return final

    # -- persistence -------------------------------------------------------

    def save_checkpoint(self, path):
        extra = {
            "train_config": self.config.to_dict(),
            "step": self.step,
            "opt_eg_state": self.opt_eg.state_dict(),
        }
        if self.disc is not None:
            extra["disc_state"] = self.disc.state_dict()
            extra["opt_d_state"] = self.opt_d.state_dict()
        save_model(path, self.model, extra=extra)
        return path

    @classmethod
    def resume(cls, checkpoint_path, dataset_dir, run_dir, dtype=torch.float32):
        payload = torch.load(checkpoint_path, map_location="cpu", weights_only=True)
        if payload.get("version") != CHECKPOINT_VERSION:
            raise ValueError("unsupported checkpoint version")
        config = TrainConfig.from_dict(payload["train_config"])
        trainer = cls(config, dataset_dir, run_dir, dtype=dtype)
        trainer.model.load_state_dict(payload["model_state"])
        trainer.opt_eg.load_state_dict(payload["opt_eg_state"])
        if trainer.disc is not None:
            trainer.disc.load_state_dict(payload["disc_state"])
            trainer.opt_d.load_state_dict(payload["opt_d_state"])
        trainer.step = payload["step"]
        return trainer


def run_experiment(config: TrainConfig, dataset_dir, runs_root, steps=None,
                   dtype=torch.float32):
    """Train a config into ``runs_root/<name>`` and return the checkpoint path."""
    run_dir = Path(runs_root) / config.name
    trainer = Trainer(config, dataset_dir, run_dir, dtype=dtype)
    ckpt = trainer.run(steps=steps)
    return ckpt, trainer
