"""HTTP service exposing stored bitstreams and on-demand decoding.

Endpoints: ``GET /items``, ``GET /meta?id=``, ``GET /decode?id=&beta=``.
The decode endpoint returns PNG bytes with ``X-BPP`` (constant per item:
the service never re-encodes) and ``X-PSNR`` when the original image was
registered next to the bitstream. Realism weights are quantized to a
1/100 grid for the response cache.
"""

import io
import threading
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse, Response

from . import codec, data, metrics
from .conditioning import BETA_MAX_INFER
from .model import load_model

BITSTREAM_SUFFIX = ".mrc"


class _LruCache:
    def __init__(self, capacity):
        self.capacity = capacity
        self._store = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            if key not in self._store:
                return None
            self._store.move_to_end(key)
            return self._store[key]

    def put(self, key, value):
        with self._lock:
            self._store[key] = value
            self._store.move_to_end(key)
            while len(self._store) > self.capacity:
                self._store.popitem(last=False)


def _png_bytes(image):
    from PIL import Image as PILImage

    buf = io.BytesIO()
    PILImage.fromarray(image, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


class BitstreamStore:
    """Directory of ``<id>.mrc`` files, optionally with ``<id>.png`` originals."""

    def __init__(self, store_dir):
        self.store_dir = Path(store_dir)

    def scan(self):
        if not self.store_dir.is_dir():
            raise FileNotFoundError(f"store directory not found: {self.store_dir}")
        files = sorted(self.store_dir.glob(f"*{BITSTREAM_SUFFIX}"))
        items = []
        for f in files:
            blob = f.read_bytes()
            header = codec.BitstreamHeader.unpack(blob)
            items.append({
                "id": f.stem,
                "filename": f.name,
                "bpp": 8.0 * len(blob) / (header.orig_h * header.orig_w),
                "orig_dims": [header.orig_h, header.orig_w],
                "model_id": header.model_id.hex(),
            })
        return items

    def read(self, item_id):
        path = self.store_dir / f"{item_id}{BITSTREAM_SUFFIX}"
        if not path.is_file():
            return None
        return path.read_bytes()

    def original(self, item_id):
        path = self.store_dir / f"{item_id}.png"
        if not path.is_file():
            return None
        return data.load_image(path)


def create_app(store_dir, model_path, cache_size=64):
    model = load_model(model_path)
    store = BitstreamStore(store_dir)
    cache = _LruCache(cache_size)
    decode_lock = threading.Lock()
    app = FastAPI(title="mrcodec explorer")

    @app.get("/items")
    def list_items():
        try:
            return store.scan()
        except FileNotFoundError as e:
            return JSONResponse({"error": str(e)}, status_code=500)

    @app.get("/meta")
    def meta(id: str):
        for item in store.scan():
            if item["id"] == id:
                return item
        raise HTTPException(status_code=404, detail=f"unknown id {id!r}")

    @app.get("/decode")
    def decode(id: str, beta: float):
        if not 0.0 <= beta <= BETA_MAX_INFER:
            raise HTTPException(
                status_code=400,
                detail=f"beta must lie in [0, {BETA_MAX_INFER}]")
        blob = store.read(id)
        if blob is None:
            raise HTTPException(status_code=404, detail=f"unknown id {id!r}")
        beta_key = round(beta * 100)
        cached = cache.get((id, beta_key))
        if cached is None:
            with decode_lock:
                try:
                    result = codec.decompress(blob, beta_key / 100.0, model)
                except codec.BitstreamError as e:
                    raise HTTPException(status_code=500, detail=str(e))
            headers = {"X-BPP": f"{result.bpp:.6f}"}
            original = store.original(id)
            if original is not None:
                psnr_db = metrics.psnr_for_csv(metrics.psnr(original, result.image))
                headers["X-PSNR"] = f"{psnr_db:.3f}"
            cached = (_png_bytes(result.image), headers)
            cache.put((id, beta_key), cached)
        body, headers = cached
        return Response(content=body, media_type="image/png", headers=headers)

    return app


def main(argv=None):
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="serve stored bitstreams over HTTP")
    parser.add_argument("--store", required=True)
    parser.add_argument("--model", required=True)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8600)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(args.store, args.model), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
