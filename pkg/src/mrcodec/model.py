"""Codec bundle (encoder + generator + entropy model) and checkpoint I/O."""

import hashlib

import torch
from torch import nn

from .entropy import EntropyModel
from .transforms import (
    Encoder,
    Generator,
    ModelConfig,
    denormalize_images,
    normalize_images,
)

CHECKPOINT_VERSION = 1


class CodecModel(nn.Module):
    """Everything needed to compress and reconstruct; the discriminator is
    training-only and lives with the trainer."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = Encoder(cfg)
        self.generator = Generator(cfg)
        self.entropy = EntropyModel(cfg)

    def encode_latent(self, x255):
        """(B, 3, H, W) tensor on the 0..255 scale -> continuous latent."""
        return self.encoder(normalize_images(x255))

    def reconstruct(self, y_hat, beta):
        """Quantized latent + realism weight -> 0..255-scale reconstruction
        (unclipped; clip only when serializing pixels)."""
        return denormalize_images(self.generator(y_hat, beta))

    def model_id(self):
        """16-byte digest binding bitstreams to this exact parameter set."""
        return state_dict_digest(self.state_dict())


def state_dict_digest(state):
    h = hashlib.sha256()
    for name in sorted(state):
        t = state[name]
        h.update(name.encode())
        h.update(str(tuple(t.shape)).encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.digest()[:16]


def save_model(path, model: CodecModel, extra=None):
    payload = {
        "version": CHECKPOINT_VERSION,
        "config": model.cfg.to_dict(),
        "model_state": model.state_dict(),
        "model_id": model.model_id().hex(),
    }
    if extra:
        payload.update(extra)
    torch.save(payload, path)
    return payload["model_id"]


def load_checkpoint(path):
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    return payload


def load_model(path, dtype=None):
    payload = load_checkpoint(path)
    cfg = ModelConfig.from_dict(payload["config"])
    model = CodecModel(cfg)
    model.load_state_dict(payload["model_state"])
    if dtype is not None:
        model = model.to(dtype)
    model.eval()
    return model
