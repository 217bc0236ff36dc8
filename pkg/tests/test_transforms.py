import numpy as np
import pytest
import torch

from mrcodec.transforms import (
    Discriminator,
    Encoder,
    Generator,
    ModelConfig,
    denormalize_images,
    normalize_images,
)


@pytest.fixture(scope="module")
def small_cfg():
    return ModelConfig(latent_channels=20, gen_width=16, enc_width=16,
                       hyper_channels=8, hyper_width=16, hyper_features=16,
                       num_slices=10, charm_width=16, disc_width=8,
                       embed_width=32, fourier_freqs=4)


class TestConfig:
    def test_default_shapes(self):
        cfg = ModelConfig()
        assert cfg.latent_channels == 200
        assert cfg.slice_channels == 20

    def test_paper_preset(self):
        cfg = ModelConfig.paper_preset()
        assert cfg.gen_width == 256
        assert cfg.latent_channels == 320
        assert cfg.slice_channels == 32

    def test_slice_divisibility_enforced(self):
        with pytest.raises(ValueError):
            ModelConfig(latent_channels=19, num_slices=10)

    def test_bad_scheme(self):
        with pytest.raises(ValueError):
            ModelConfig(cond_scheme="mystery")

    def test_roundtrip_dict(self):
        cfg = ModelConfig.tiny()
        assert ModelConfig.from_dict(cfg.to_dict()) == cfg


class TestEncoder:
    def test_latent_shape_m192(self):
        torch.manual_seed(0)
        cfg = ModelConfig(latent_channels=192, enc_width=16, gen_width=16,
                          hyper_channels=8, hyper_width=16, hyper_features=16,
                          charm_width=16, entropy_mode="hyperprior")
        enc = Encoder(cfg)
        y = enc(torch.randn(1, 3, 64, 64))
        assert y.shape == (1, 192, 4, 4)

    def test_rectangular(self, small_cfg):
        enc = Encoder(small_cfg)
        y = enc(torch.randn(1, 3, 128, 64))
        assert y.shape == (1, 20, 8, 4)

    def test_deterministic(self, small_cfg):
        enc = Encoder(small_cfg)
        x = torch.randn(2, 3, 32, 32)
        assert torch.equal(enc(x), enc(x))

    def test_rejects_unpadded(self, small_cfg):
        enc = Encoder(small_cfg)
        with pytest.raises(ValueError, match="multiples of 16"):
            enc(torch.randn(1, 3, 60, 64))


class TestGenerator:
    def test_output_shape(self, small_cfg):
        gen = Generator(small_cfg)
        x = gen(torch.randn(2, 20, 4, 4), 0.0)
        assert x.shape == (2, 3, 64, 64)

    def test_zero_init_is_beta_agnostic(self, small_cfg):
        torch.manual_seed(0)
        gen = Generator(small_cfg)
        y = torch.randn(1, 20, 4, 4)
        assert torch.equal(gen(y, 0.0), gen(y, 2.56))

    def test_conditioning_changes_output_once_trained(self, small_cfg):
        torch.manual_seed(0)
        gen = Generator(small_cfg)
        with torch.no_grad():
            for blk_stage in gen.blocks:
                for blk in blk_stage:
                    blk.cond1.proj.weight.normal_(0, 0.05)
                    blk.cond2.proj.weight.normal_(0, 0.05)
        y = torch.randn(1, 20, 4, 4)
        a = gen(y, 0.0)
        b = gen(y, 2.56)
        assert not torch.allclose(a, b)
        assert a.shape == b.shape

    def test_pure_function_of_inputs(self, small_cfg):
        torch.manual_seed(1)
        gen = Generator(small_cfg)
        y = torch.randn(1, 20, 4, 4)
        beta = torch.tensor([1.28])
        assert torch.equal(gen(y, beta), gen(y, beta))

    def test_beta_out_of_range(self, small_cfg):
        gen = Generator(small_cfg)
        y = torch.randn(1, 20, 4, 4)
        with pytest.raises(ValueError, match="realism weight"):
            gen(y, 6.0)
        with pytest.raises(ValueError, match="realism weight"):
            gen(y, -0.5)

    def test_table_scheme_runs(self):
        cfg = ModelConfig(latent_channels=20, gen_width=16, enc_width=16,
                          hyper_channels=8, hyper_width=16, hyper_features=16,
                          charm_width=16, cond_scheme="table")
        gen = Generator(cfg)
        y = torch.randn(1, 20, 4, 4)
        out = gen(y, 0.16)
        assert out.shape == (1, 3, 64, 64)
        assert torch.equal(out, gen(y, 0.16))


class TestDiscriminator:
    def test_probability_map(self, small_cfg):
        torch.manual_seed(0)
        d = Discriminator(small_cfg)
        y = torch.randn(2, 20, 4, 4)
        img = torch.randn(2, 3, 64, 64)
        p = d(y, img)
        assert p.shape == (2, 1, 4, 4)  # spatial map, not a scalar
        assert float(p.min()) > 0.0 and float(p.max()) < 1.0

    def test_batch_permutation_equivariance(self, small_cfg):
        torch.manual_seed(0)
        d = Discriminator(small_cfg)
        y = torch.randn(3, 20, 4, 4)
        img = torch.randn(3, 3, 64, 64)
        p = d(y, img)
        perm = torch.tensor([2, 0, 1])
        p_perm = d(y[perm], img[perm])
        assert torch.allclose(p_perm, p[perm])

    def test_shape_mismatch(self, small_cfg):
        d = Discriminator(small_cfg)
        with pytest.raises(ValueError, match="do not match"):
            d(torch.randn(1, 20, 4, 4), torch.randn(1, 3, 32, 32))


def test_encode_generate_dim_roundtrip(small_cfg):
    torch.manual_seed(0)
    enc, gen = Encoder(small_cfg), Generator(small_cfg)
    for h, w in ((64, 64), (128, 64), (64, 128)):
        x = torch.randn(1, 3, h, w)
        out = gen(torch.round(enc(x)), 1.0)
        assert out.shape == x.shape


def test_normalize_roundtrip():
    x = torch.rand(2, 3, 8, 8) * 255
    assert torch.allclose(denormalize_images(normalize_images(x)), x, atol=1e-4)


def test_encoder_param_gradients_match_finite_differences():
    """Central-difference check on a tiny encoder in float64."""
    torch.manual_seed(0)
    cfg = ModelConfig.tiny(embed_width=16, fourier_freqs=4)
    enc = Encoder(cfg).double()
    x = torch.randn(1, 3, 16, 16, dtype=torch.float64)

    def loss_fn():
        return enc(x).square().sum()

    loss = loss_fn()
    loss.backward()
    params = [p for p in enc.parameters() if p.grad is not None]
    rng = np.random.default_rng(0)
    worst = 0.0
    for p in params:
        flat = p.detach().reshape(-1)
        grad = p.grad.reshape(-1)
        for idx in rng.choice(flat.numel(), size=min(5, flat.numel()), replace=False):
            eps = 1e-6 * max(1.0, abs(float(flat[idx])))
            with torch.no_grad():
                flat[idx] += eps
                up = float(loss_fn())
                flat[idx] -= 2 * eps
                down = float(loss_fn())
                flat[idx] += eps
            fd = (up - down) / (2 * eps)
            a = float(grad[idx])
            rel = abs(a - fd) / max(abs(a), abs(fd), 1e-8)
            worst = max(worst, rel)
    assert worst < 1e-4, worst
