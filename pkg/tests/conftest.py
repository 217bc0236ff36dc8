import numpy as np
import pytest
import torch

from mrcodec.model import load_model
from mrcodec.synthetic import make_texture_corpus
from mrcodec.training import TrainConfig, Trainer

torch.set_num_threads(2)

TOY_MODEL_OVERRIDES = dict(
    latent_channels=20, gen_width=16, enc_width=16, hyper_channels=8,
    hyper_width=16, hyper_features=16, num_slices=10, charm_width=16,
    disc_width=8, embed_width=64, fourier_freqs=6)


def tiny_train_config(**overrides):
    base = dict(
        name="tiny", total_steps=1000, batch_size=2, crop=32, lambda_=0.05,
        c_p=4.26, seed=0, log_every=50, model_overrides=dict(TOY_MODEL_OVERRIDES))
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    make_texture_corpus(root, 40, size=96, seed=11)
    return root


@pytest.fixture(scope="session")
def toy_run(tmp_path_factory, corpus_dir):
    """A briefly trained multi-realism model shared across integration tests."""
    run_dir = tmp_path_factory.mktemp("toy_run")
    cfg = tiny_train_config(name="toy", total_steps=600, crop=64, batch_size=4,
                            lambda_=0.02)
    trainer = Trainer(cfg, corpus_dir, run_dir)
    ckpt = trainer.run()
    return {"ckpt": ckpt, "run_dir": run_dir, "config": cfg}


@pytest.fixture(scope="session")
def toy_model(toy_run):
    return load_model(toy_run["ckpt"])


@pytest.fixture(scope="session")
def test_images():
    """Held-out images (not in the training corpus) of assorted sizes."""
    from mrcodec.synthetic import make_texture_image

    rng = np.random.default_rng(999)
    sizes = [(64, 64), (64, 96), (96, 64), (70, 90), (65, 64)]
    images = []
    for i in range(20):
        h, w = sizes[i % len(sizes)]
        img = make_texture_image(rng, max(h, w))[:h, :w]
        images.append(np.ascontiguousarray(img))
    return images
