import numpy as np
import pytest
from fastapi.testclient import TestClient

from mrcodec import codec
from mrcodec.data import save_image
from mrcodec.service import create_app
from mrcodec.synthetic import make_texture_image


@pytest.fixture(scope="module")
def store(tmp_path_factory, toy_run, toy_model):
    root = tmp_path_factory.mktemp("store")
    rng = np.random.default_rng(21)
    logged = {}
    for i in range(3):
        img = make_texture_image(rng, 64)
        res = codec.compress(img, toy_model)
        (root / f"item{i}.mrc").write_bytes(res.data)
        save_image(img, root / f"item{i}.png")
        logged[f"item{i}"] = res.bpp
    return {"dir": root, "bpp": logged, "ckpt": toy_run["ckpt"]}


@pytest.fixture(scope="module")
def client(store):
    app = create_app(store["dir"], store["ckpt"])
    with TestClient(app) as c:
        yield c


class TestItems:
    def test_empty_store(self, tmp_path, toy_run):
        (tmp_path / "empty").mkdir()
        app = create_app(tmp_path / "empty", toy_run["ckpt"])
        with TestClient(app) as c:
            assert c.get("/items").json() == []

    def test_missing_store_is_500(self, tmp_path, toy_run):
        app = create_app(tmp_path / "missing", toy_run["ckpt"])
        with TestClient(app) as c:
            r = c.get("/items")
            assert r.status_code == 500
            assert "error" in r.json()

    def test_lists_items_with_metadata(self, client, store):
        items = client.get("/items").json()
        assert [i["id"] for i in items] == ["item0", "item1", "item2"]
        assert len({i["id"] for i in items}) == 3
        for item in items:
            assert set(item) == {"id", "filename", "bpp", "orig_dims", "model_id"}
            assert item["bpp"] == pytest.approx(store["bpp"][item["id"]])
            assert item["orig_dims"] == [64, 64]

    def test_meta_endpoint(self, client):
        r = client.get("/meta", params={"id": "item1"})
        assert r.status_code == 200
        assert r.json()["filename"] == "item1.mrc"
        assert client.get("/meta", params={"id": "ghost"}).status_code == 404


class TestDecode:
    def test_png_with_headers(self, client, store):
        r = client.get("/decode", params={"id": "item0", "beta": 0.5})
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert float(r.headers["X-BPP"]) == pytest.approx(store["bpp"]["item0"], abs=1e-5)
        assert "X-PSNR" in r.headers  # original registered alongside
        assert r.content[:8] == b"\x89PNG\r\n\x1a\n"

    def test_repeated_identical(self, client):
        a = client.get("/decode", params={"id": "item0", "beta": 1.0})
        b = client.get("/decode", params={"id": "item0", "beta": 1.0})
        assert a.content == b.content

    def test_beta_variation_same_bpp(self, client):
        lo = client.get("/decode", params={"id": "item1", "beta": 0.0})
        hi = client.get("/decode", params={"id": "item1", "beta": 2.56})
        assert lo.headers["X-BPP"] == hi.headers["X-BPP"]

    def test_beta_out_of_range(self, client):
        assert client.get("/decode", params={"id": "item0", "beta": -0.1}).status_code == 400
        assert client.get("/decode", params={"id": "item0", "beta": 2.61}).status_code == 400

    def test_unknown_id(self, client):
        assert client.get("/decode", params={"id": "nope", "beta": 0.5}).status_code == 404

    def test_beta_quantized_for_cache(self, client):
        a = client.get("/decode", params={"id": "item2", "beta": 0.5004})
        b = client.get("/decode", params={"id": "item2", "beta": 0.4996})
        assert a.content == b.content  # both snap to 0.50
