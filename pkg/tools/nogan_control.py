"""Control run: the criterion-4 config without the adversarial pathway."""

import tempfile
import time
from pathlib import Path

import numpy as np
import torch

from mrcodec.metrics import FeatureStats, PatchFeatureExtractor, frechet_distance, psnr
from mrcodec.synthetic import make_patch_set, make_texture_corpus
from mrcodec.training import TrainConfig, Trainer

torch.set_num_threads(2)
tmp = Path(tempfile.mkdtemp())
make_texture_corpus(tmp / "d", 200, size=96, seed=100)
patches = make_patch_set(300, 64, seed=200)
cfg = TrainConfig(
    name="nogan", total_steps=5000, batch_size=4, crop=64, lambda_=0.08,
    use_gan=False, cond_scheme="none", beta_mode="fixed", beta_fixed=0.0,
    seed=0, model_overrides=dict(
        latent_channels=40, gen_width=24, enc_width=24, hyper_channels=16,
        hyper_width=24, hyper_features=24, charm_width=24, disc_width=16))
tr = Trainer(cfg, tmp / "d", tmp / "run")
ext = PatchFeatureExtractor()
fr = FeatureStats.from_features(ext(patches))
t0 = time.time()
for _ in range(5000):
    m = tr.step_once()
    if tr.step % 1000 == 0:
        tr.model.eval()
        with torch.no_grad():
            ps, feats = [], []
            for i in range(0, 300, 50):
                chunk = patches[i:i + 50]
                x = torch.from_numpy(chunk).float().permute(0, 3, 1, 2)
                xh = tr.model.reconstruct(
                    torch.round(tr.model.encode_latent(x)), torch.zeros(x.shape[0]))
                rec = np.clip(np.round(xh.permute(0, 2, 3, 1).numpy()), 0, 255).astype(np.uint8)
                ps += [psnr(a, b) for a, b in zip(chunk, rec)]
                feats.append(ext(rec))
        fid = frechet_distance(fr, FeatureStats.from_features(np.concatenate(feats)))
        tr.model.train()
        print(f"step {tr.step} ({time.time()-t0:.0f}s) rate {m['rate_bpp']:.3f} "
              f"mse {m['mse_255']:.0f} evalPSNR {np.mean(ps):.2f} evalFID {fid:.4f}",
              flush=True)
