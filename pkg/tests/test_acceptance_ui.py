"""Secondary-component acceptance: the UI flow against a live service."""

import os
import shutil
import socket
import subprocess
import threading
import time
from pathlib import Path

import numpy as np
import pytest

from mrcodec import codec
from mrcodec.data import save_image
from mrcodec.synthetic import make_texture_image

FRONTEND = Path(__file__).resolve().parents[1] / "frontend"


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def live_service(tmp_path_factory, toy_run, toy_model):
    uvicorn = pytest.importorskip("uvicorn")
    from mrcodec.service import create_app

    store = tmp_path_factory.mktemp("ui_store")
    rng = np.random.default_rng(77)
    for i in range(3):
        img = make_texture_image(rng, 64)
        res = codec.compress(img, toy_model)
        (store / f"demo{i}.mrc").write_bytes(res.data)
        save_image(img, store / f"demo{i}.png")

    port = _free_port()
    config = uvicorn.Config(create_app(store, toy_run["ckpt"]),
                            host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 30
    import httpx

    url = f"http://127.0.0.1:{port}"
    while time.time() < deadline:
        try:
            if httpx.get(f"{url}/items", timeout=2).status_code == 200:
                break
        except Exception:
            time.sleep(0.2)
    else:
        pytest.fail("service did not come up")
    yield url
    server.should_exit = True
    thread.join(timeout=10)


@pytest.mark.slow
def test_criterion_11_ui_flow(live_service):
    """Scripted UI drive: slider 0 -> 2.56, distinct renders, constant bpp."""
    if not (FRONTEND / "node_modules" / ".bin" / "vitest").exists():
        pytest.skip("frontend toolchain not installed (npm install in frontend/)")
    env = dict(os.environ, MRC_SERVICE_URL=live_service)
    proc = subprocess.run(
        ["node_modules/.bin/vitest", "run", "tests/acceptance_live.test.ts"],
        cwd=FRONTEND, env=env, capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert "1 passed" in proc.stdout
    print(f"\n[PASS] criterion 11: scripted UI flow against {live_service}: "
          "distinct renders across the slider, constant bpp, in-range requests only")
