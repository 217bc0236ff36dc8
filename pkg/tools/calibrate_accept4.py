"""Calibration harness for the distortion-realism acceptance run.

Trains the small multi-realism config on the synthetic corpus and reports
PSNR / realism-proxy at the realism-weight endpoints on held-out patches.
"""

import argparse
import time
from pathlib import Path

import numpy as np
import torch

from mrcodec.metrics import FeatureStats, PatchFeatureExtractor, frechet_distance, psnr
from mrcodec.synthetic import make_patch_set, make_texture_corpus
from mrcodec.training import TrainConfig, Trainer


def eval_beta_endpoints(model, patches, betas, batch=32):
    model.eval()
    extractor = PatchFeatureExtractor()
    real_feats = extractor(patches)
    results = {}
    dtype = next(model.parameters()).dtype
    with torch.no_grad():
        for beta in betas:
            psnrs = []
            feats = []
            for i in range(0, len(patches), batch):
                chunk = patches[i:i + batch]
                x = torch.from_numpy(chunk).to(dtype).permute(0, 3, 1, 2)
                y = model.encode_latent(x)
                y_hat = torch.round(y)
                x_hat = model.reconstruct(y_hat, torch.full((x.shape[0],), beta, dtype=dtype))
                recon = np.clip(np.round(x_hat.permute(0, 2, 3, 1).numpy()), 0, 255).astype(np.uint8)
                for a, b in zip(chunk, recon):
                    psnrs.append(psnr(a, b))
                feats.append(extractor(recon))
            fid = frechet_distance(FeatureStats.from_features(real_feats),
                                   FeatureStats.from_features(np.concatenate(feats)))
            results[beta] = (float(np.mean(psnrs)), fid)
    model.train()
    return results


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=4000)
    ap.add_argument("--eval-every", type=int, default=1000)
    ap.add_argument("--crop", type=int, default=64)
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--lambda", dest="lambda_", type=float, default=0.02)
    ap.add_argument("--cp", type=float, default=4.26)
    ap.add_argument("--entropy", default="charm")
    ap.add_argument("--patches", type=int, default=400)
    ap.add_argument("--corpus", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--width", type=int, default=24)
    ap.add_argument("--latent", type=int, default=40)
    ap.add_argument("--disc-width", type=int, default=16)
    ap.add_argument("--grain-lo", type=float, default=18.0)
    ap.add_argument("--grain-hi", type=float, default=55.0)
    ap.add_argument("--out", default="/tmp/calib4")
    args = ap.parse_args()

    torch.set_num_threads(2)
    root = Path(args.out)
    data_dir = root / "data"
    grain = (args.grain_lo, args.grain_hi)
    if not data_dir.exists():
        make_texture_corpus(data_dir, args.corpus, size=96, seed=100, grain_range=grain)
    patches = make_patch_set(args.patches, size=64, seed=200, grain_range=grain)

    cfg = TrainConfig(
        name="calib", total_steps=args.steps, batch_size=args.batch,
        crop=args.crop, lambda_=args.lambda_, c_p=args.cp, entropy=args.entropy,
        seed=args.seed, log_every=200,
        model_overrides=dict(
            latent_channels=args.latent, gen_width=args.width, enc_width=args.width,
            hyper_channels=16, hyper_width=args.width, hyper_features=args.width,
            charm_width=args.width, disc_width=args.disc_width))
    trainer = Trainer(cfg, data_dir, root / "run")
    t0 = time.time()
    while trainer.step < args.steps:
        m = trainer.step_once()
        if trainer.step % args.eval_every == 0 or trainer.step == args.steps:
            res = eval_beta_endpoints(trainer.model, patches, (0.0, 2.56))
            p0, f0 = res[0.0]
            p1, f1 = res[2.56]
            print(f"step {trainer.step:6d} ({time.time()-t0:6.0f}s) rate {m['rate_bpp']:.3f} "
                  f"mse {m['mse_255']:6.0f} adv {m['adversarial_g']:.3f} "
                  f"perc {m['perceptual']:.3f} dloss {m['discriminator_loss']:.3f} | "
                  f"PSNR0 {p0:.2f} PSNR2.56 {p1:.2f} dPSNR {p0-p1:+.3f} | "
                  f"FID0 {f0:.4f} FID2.56 {f1:.4f} ratio {f1/max(f0,1e-9):.3f}",
                  flush=True)
    trainer.save_checkpoint(root / "ckpt-calib.pt")


if __name__ == "__main__":
    main()
