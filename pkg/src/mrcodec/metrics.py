"""Distortion and realism evaluation: PSNR, patched Fréchet distance, curves.

The realism score is a Fréchet distance between feature statistics of two
image sets. The feature extractor is a small frozen random conv network
shipped with the package (64-dim features after global average pooling);
absolute values are extractor-specific, orderings are what matter at desk
scale. A pretrained-Inception extractor can be plugged in for
literature-comparable numbers.
"""

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import linalg

PSNR_CAP_DB = 99.0
_MIN_PATCH_FACTOR = 5  # refuse FID below this many patches per feature dim


class MetricsError(ValueError):
    """Raised for invalid metric inputs (mismatched dims, too few patches)."""


def mse_255(x, x_hat):
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(x_hat, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricsError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def psnr(x, x_hat):
    """PSNR in dB on the 0..255 scale; +inf sentinel for identical inputs."""
    err = mse_255(x, x_hat)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / err)


def psnr_for_csv(value_db):
    """Serialized PSNR: the +inf sentinel is capped at 99.0 dB."""
    return min(float(value_db), PSNR_CAP_DB)


def extract_patches(img, size=256, stride=None):
    """Covering grid of ``size`` x ``size`` patches (stride size/2), with
    edge-aligned patches so every pixel is included."""
    img = np.asarray(img)
    h, w = img.shape[:2]
    if min(h, w) < size:
        raise MetricsError(f"image {h}x{w} smaller than patch size {size}")
    stride = stride or size // 2

    def grid(dim):
        xs = list(range(0, dim - size + 1, stride))
        if xs[-1] != dim - size:
            xs.append(dim - size)
        return xs

    return [img[i:i + size, j:j + size] for i in grid(h) for j in grid(w)]


@dataclass
class FeatureStats:
    """Mean/covariance summary of a feature set; mergeable across shards."""

    mean: np.ndarray
    cov: np.ndarray
    n: int

    @classmethod
    def from_features(cls, feats):
        feats = np.asarray(feats, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 2:
            raise MetricsError("need a (n >= 2, dim) feature matrix")
        return cls(mean=feats.mean(axis=0), cov=np.cov(feats, rowvar=False), n=len(feats))

    def merge(self, other):
        """Combine two disjoint shards into the pooled statistics."""
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        # Pool the ddof=1 covariances plus the between-shard term.
        s1 = self.cov * (self.n - 1)
        s2 = other.cov * (other.n - 1)
        cross = np.outer(delta, delta) * (self.n * other.n / n)
        return FeatureStats(mean=mean, cov=(s1 + s2 + cross) / (n - 1), n=n)


def frechet_distance(a: FeatureStats, b: FeatureStats):
    """||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}); tiny negative
    numerical results clamp to zero."""
    if a.mean.shape != b.mean.shape:
        raise MetricsError("feature dimension mismatch")
    diff = a.mean - b.mean
    prod = a.cov @ b.cov
    covmean = linalg.sqrtm(prod)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    value = float(diff @ diff + np.trace(a.cov + b.cov - 2.0 * covmean))
    return max(value, 0.0)


class PatchFeatureExtractor:
    """Frozen random conv pyramid summarized by per-band energies.

    Each level contributes the spatial mean absolute response of its
    channels, so the features capture texture energy across scales as well
    as color statistics (64 features total).
    """

    def __init__(self, weights_file=None):
        if weights_file is None:
            ref = resources.files("mrcodec").joinpath("assets/fid_extractor_v1.npz")
            with resources.as_file(ref) as p:
                payload = np.load(p)
                self.kernels = [payload[f"w{i}"] for i in range(3)]
        else:
            payload = np.load(weights_file)
            self.kernels = [payload[f"w{i}"] for i in range(3)]
        self.feature_dim = sum(k.shape[0] for k in self.kernels)

    def __call__(self, images):
        """(B, H, W, 3) uint8/float batch -> (B, feature_dim) float64."""
        import torch

        arr = np.asarray(images, dtype=np.float32) / 255.0
        if arr.ndim == 3:
            arr = arr[None]
        x = torch.from_numpy(arr).permute(0, 3, 1, 2)
        feats = []
        with torch.no_grad():
            for i, k in enumerate(self.kernels):
                x = torch.conv2d(x, torch.from_numpy(k), stride=2, padding=1)
                feats.append(x.abs().mean(dim=(2, 3)))
                if i < len(self.kernels) - 1:
                    x = torch.relu(x)
        return torch.cat(feats, dim=1).double().numpy()


def features_of_set(images, extractor, patch_size=None, batch=64):
    """Pooled patch features of an image iterable (arrays or paths)."""
    from .data import load_image

    patches = []
    skipped = 0
    for item in images:
        img = load_image(item) if isinstance(item, (str, Path)) else np.asarray(item)
        if patch_size is None:
            patches.append(img)
            continue
        try:
            patches.extend(extract_patches(img, patch_size))
        except MetricsError:
            skipped += 1
    if skipped:
        import warnings

        warnings.warn(f"skipped {skipped} images smaller than the patch size")
    if not patches:
        raise MetricsError("no usable patches")
    feats = [extractor(np.stack(patches[i:i + batch]))
             for i in range(0, len(patches), batch)]
    return np.concatenate(feats, axis=0)


def patched_fid(real, recon, extractor=None, patch_size=256):
    """Fréchet distance over covering patches of two image sets.

    ``real``/``recon`` are directories, lists of paths, or arrays. Refuses
    to produce a number when either side has too few patches for a stable
    covariance estimate.
    """
    from .data import list_images

    extractor = extractor or PatchFeatureExtractor()
    sets = []
    for side in (real, recon):
        if isinstance(side, (str, Path)):
            side = list_images(side)
        feats = features_of_set(side, extractor, patch_size)
        need = _MIN_PATCH_FACTOR * extractor.feature_dim
        if len(feats) < need:
            raise MetricsError(
                f"only {len(feats)} patches; need >= {need} "
                f"({_MIN_PATCH_FACTOR} x feature dim) for a stable estimate. "
                "Add images or reduce the patch size.")
        sets.append(FeatureStats.from_features(feats))
    return frechet_distance(sets[0], sets[1])


def fid_256(real_dir, recon_dir, extractor=None):
    """The covering-patch realism score at the standard 256px patch size."""
    return patched_fid(real_dir, recon_dir, extractor, patch_size=256)


@dataclass
class RDPoint:
    model: str
    rate_label: str
    bpp: float
    beta: float
    psnr_db: float
    fid: float


CSV_COLUMNS = ("model", "rate_label", "bpp", "beta", "psnr_db", "fid")


def write_rd_csv(points, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for p in points:
            writer.writerow([p.model, p.rate_label, repr(p.bpp), repr(p.beta),
                             repr(psnr_for_csv(p.psnr_db)), repr(p.fid)])


def read_rd_csv(path):
    points = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            points.append(RDPoint(
                model=row["model"], rate_label=row["rate_label"],
                bpp=float(row["bpp"]), beta=float(row["beta"]),
                psnr_db=float(row["psnr_db"]), fid=float(row["fid"])))
    return points


def emit_rd_curves(points, out_dir, basename="rd_curves"):
    """Write the metrics CSV plus SVG plots.

    Produces a realism-vs-distortion scatter where each (model, rate)
    contributes a chain of points indexed by the realism weight, and
    rate-vs-metric curves.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{basename}.csv"
    write_rd_csv(points, csv_path)

    groups = {}
    for p in points:
        groups.setdefault((p.model, p.rate_label), []).append(p)

    fig, ax = plt.subplots(figsize=(5, 4))
    for (model, rate_label), pts in sorted(groups.items()):
        pts = sorted(pts, key=lambda p: p.beta)
        ax.plot([p.fid for p in pts], [psnr_for_csv(p.psnr_db) for p in pts],
                marker="o", label=f"{model}@{rate_label}")
        for p in (pts[0], pts[-1]) if len(pts) > 1 else pts:
            ax.annotate(f"b={p.beta:g}", (p.fid, psnr_for_csv(p.psnr_db)),
                        fontsize=7)
    ax.set_xlabel("realism score (lower is better)")
    ax.set_ylabel("PSNR [dB]")
    if groups:
        ax.legend(fontsize=7)
    fig.tight_layout()
    tradeoff_path = out_dir / f"{basename}_tradeoff.svg"
    fig.savefig(tradeoff_path)
    plt.close(fig)

    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    by_model_beta = {}
    for p in points:
        by_model_beta.setdefault((p.model, p.beta), []).append(p)
    for (model, beta), pts in sorted(by_model_beta.items()):
        pts = sorted(pts, key=lambda p: p.bpp)
        label = f"{model} b={beta:g}"
        axes[0].plot([p.bpp for p in pts], [psnr_for_csv(p.psnr_db) for p in pts],
                     marker="o", label=label)
        axes[1].plot([p.bpp for p in pts], [p.fid for p in pts],
                     marker="o", label=label)
    axes[0].set_xlabel("bpp")
    axes[0].set_ylabel("PSNR [dB]")
    axes[1].set_xlabel("bpp")
    axes[1].set_ylabel("realism score")
    if by_model_beta:
        axes[0].legend(fontsize=7)
    fig.tight_layout()
    rates_path = out_dir / f"{basename}_rates.svg"
    fig.savefig(rates_path)
    plt.close(fig)
    return csv_path, tradeoff_path, rates_path
