"""User-facing compressor: bitstream container, encode, decode.

A file is a fixed header followed by the range-coded hyper-latent payload
and the slice-ordered latent payload. The realism weight is not part of
the format: one file serves every reconstruction the generator can
produce, and decode-time choices never touch the stored bytes.
"""

import hashlib
import struct
from dataclasses import dataclass

import numpy as np
import torch

from . import data
from .coder import CoderError, RangeDecoder, RangeEncoder
from .entropy import build_cdf_tables, decode_values, encode_values
from .model import CodecModel
from .transforms import PAD_MULTIPLE, LATENT_STRIDE, HYPER_STRIDE

MAGIC = b"MRC1"
FORMAT_VERSION = 1
_HEADER_FMT = "<4sB16sBIIIIII"
HEADER_SIZE = struct.calcsize(_HEADER_FMT)


class BitstreamError(ValueError):
    """Malformed, corrupt, or incompatible bitstream."""


class ModelMismatchError(BitstreamError):
    """The file was produced by a different checkpoint."""


@dataclass
class BitstreamHeader:
    model_id: bytes          # 16-byte checkpoint digest
    lambda_label: int        # rate-point tag, informational
    orig_h: int
    orig_w: int
    padded_h: int
    padded_w: int
    z_payload_len: int
    y_payload_len: int
    version: int = FORMAT_VERSION

    def pack(self):
        return struct.pack(
            _HEADER_FMT, MAGIC, self.version, self.model_id, self.lambda_label,
            self.orig_h, self.orig_w, self.padded_h, self.padded_w,
            self.z_payload_len, self.y_payload_len)

    @classmethod
    def unpack(cls, blob):
        if len(blob) < HEADER_SIZE:
            raise BitstreamError("file shorter than header")
        magic, version, model_id, lam, oh, ow, ph, pw, zlen, ylen = \
            struct.unpack_from(_HEADER_FMT, blob)
        if magic != MAGIC:
            raise BitstreamError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise BitstreamError(f"unsupported format version {version}")
        if ph % PAD_MULTIPLE or pw % PAD_MULTIPLE or ph < oh or pw < ow:
            raise BitstreamError("inconsistent header dimensions")
        return cls(model_id=model_id, lambda_label=lam, orig_h=oh, orig_w=ow,
                   padded_h=ph, padded_w=pw, z_payload_len=zlen,
                   y_payload_len=ylen, version=version)


@dataclass
class CompressResult:
    data: bytes
    bpp: float
    header: BitstreamHeader
    y_hash: str
    z_hash: str


@dataclass
class DecompressResult:
    image: np.ndarray
    bpp: float
    header: BitstreamHeader
    y_hash: str


def _int_tensor_hash(arr):
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.int64).tobytes()).hexdigest()


def _clip_symbols(t):
    # Escape raw coding carries 32-bit values; anything further out would
    # only come from a diverged model.
    arr = t.detach().cpu().numpy()
    return np.clip(np.round(arr), -(2 ** 31), 2 ** 31 - 1).astype(np.int64)


def compress(img, model: CodecModel, lambda_label=0):
    """Image array -> self-contained bitstream bytes (plus debug hashes)."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) image")
    orig_h, orig_w = img.shape[:2]
    padded, _ = data.pad_to_multiple(img, PAD_MULTIPLE)
    dtype = next(model.parameters()).dtype
    x = torch.from_numpy(np.ascontiguousarray(padded)).to(dtype)
    x = x.permute(2, 0, 1).unsqueeze(0)

    cfg = model.cfg
    L = cfg.alphabet_limit
    with torch.no_grad():
        y = model.encode_latent(x)
        y_sym = _clip_symbols(y)[0]                      # (M, h, w)
        z = model.entropy.hyper_encoder(y)
        z_sym = _clip_symbols(z)[0]                      # (C, zh, zw)

        z_rows_per_channel = model.entropy.z_prior.cdf_rows(L)
        zc = z_sym.shape[0]
        z_flat = z_sym.reshape(zc, -1)
        z_rows = np.repeat(z_rows_per_channel, z_flat.shape[1], axis=0)
        enc = RangeEncoder()
        encode_values(enc, z_flat.ravel(), z_rows, L)
        z_payload = enc.finish()

        z_hat = torch.from_numpy(z_sym).to(dtype).unsqueeze(0)
        features = model.entropy.hyper_params(z_hat, y.shape[-2:])
        enc = RangeEncoder()
        decoded = []
        for i in range(model.entropy.num_slices):
            params = model.entropy.charm_predict(features, decoded, i)
            sc = cfg.slice_channels
            slice_sym = y_sym[i * sc:(i + 1) * sc]
            rows = build_cdf_tables(params, L)
            encode_values(enc, slice_sym.ravel(), rows, L)
            decoded.append(torch.from_numpy(slice_sym).to(dtype).unsqueeze(0))
        y_payload = enc.finish()

    header = BitstreamHeader(
        model_id=model.model_id(), lambda_label=lambda_label,
        orig_h=orig_h, orig_w=orig_w,
        padded_h=padded.shape[0], padded_w=padded.shape[1],
        z_payload_len=len(z_payload), y_payload_len=len(y_payload))
    blob = header.pack() + z_payload + y_payload
    bpp = 8.0 * len(blob) / (orig_h * orig_w)
    return CompressResult(data=blob, bpp=bpp, header=header,
                          y_hash=_int_tensor_hash(y_sym),
                          z_hash=_int_tensor_hash(z_sym))


def decompress(blob, beta, model: CodecModel, expected_y_hash=None):
    """Bitstream bytes + realism weight -> reconstructed image.

    The latent is decoded once per call and must match the encoder's
    symbols exactly; ``expected_y_hash`` (from the encoder) turns silent
    payload corruption into a hard error.
    """
    cfg = model.cfg
    beta = float(beta)
    if not 0.0 <= beta <= cfg.beta_max_infer:
        raise ValueError(
            f"realism weight {beta} outside [0, {cfg.beta_max_infer}]")
    header = BitstreamHeader.unpack(blob)
    if header.model_id != model.model_id():
        raise ModelMismatchError(
            "bitstream was produced by a different checkpoint")
    body = blob[HEADER_SIZE:]
    if len(body) != header.z_payload_len + header.y_payload_len:
        raise BitstreamError("payload length mismatch")
    z_payload = body[:header.z_payload_len]
    y_payload = body[header.z_payload_len:]

    dtype = next(model.parameters()).dtype
    L = cfg.alphabet_limit
    y_h = header.padded_h // LATENT_STRIDE
    y_w = header.padded_w // LATENT_STRIDE
    z_h = (y_h + HYPER_STRIDE - 1) // HYPER_STRIDE
    z_w = (y_w + HYPER_STRIDE - 1) // HYPER_STRIDE

    with torch.no_grad():
        zc = cfg.hyper_channels
        z_rows_per_channel = model.entropy.z_prior.cdf_rows(L)
        z_rows = np.repeat(z_rows_per_channel, z_h * z_w, axis=0)
        try:
            dec = RangeDecoder(z_payload)
            z_sym = decode_values(dec, z_rows, L).reshape(zc, z_h, z_w)
        except CoderError as e:
            raise BitstreamError(f"hyper payload corrupt: {e}") from e

        z_hat = torch.from_numpy(z_sym).to(dtype).unsqueeze(0)
        features = model.entropy.hyper_params(z_hat, (y_h, y_w))
        sc = cfg.slice_channels
        decoded = []
        try:
            dec = RangeDecoder(y_payload)
            for i in range(model.entropy.num_slices):
                params = model.entropy.charm_predict(features, decoded, i)
                rows = build_cdf_tables(params, L)
                slice_sym = decode_values(dec, rows, L).reshape(sc, y_h, y_w)
                decoded.append(torch.from_numpy(slice_sym).to(dtype).unsqueeze(0))
        except CoderError as e:
            raise BitstreamError(f"latent payload corrupt: {e}") from e

        y_sym = np.concatenate([d.numpy()[0].astype(np.int64) for d in decoded])
        y_hash = _int_tensor_hash(y_sym)
        if expected_y_hash is not None and y_hash != expected_y_hash:
            raise BitstreamError("decoded latent does not match encoder (corrupt payload?)")

        y_hat = torch.cat(decoded, dim=1)
        x_hat = model.reconstruct(y_hat, torch.full((1,), beta, dtype=dtype))
        img = x_hat[0].permute(1, 2, 0).cpu().numpy()
        img = np.clip(np.round(img), 0, 255).astype(np.uint8)
        img = data.unpad(img, (header.orig_h, header.orig_w))

    bpp = 8.0 * len(blob) / (header.orig_h * header.orig_w)
    return DecompressResult(image=img, bpp=bpp, header=header, y_hash=y_hash)


def compress_file(input_path, output_path, model, lambda_label=0):
    result = compress(data.load_image(input_path), model, lambda_label)
    with open(output_path, "wb") as fh:
        fh.write(result.data)
    return result


def decompress_file(input_path, output_path, beta, model):
    with open(input_path, "rb") as fh:
        blob = fh.read()
    result = decompress(blob, beta, model)
    data.save_image(result.image, output_path)
    return result
