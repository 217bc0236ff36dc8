"""Regenerate the frozen feature-extractor weights shipped with the package.

Run once; the output is committed so every install scores with identical
features.
"""

from pathlib import Path

import numpy as np


def main():
    rng = np.random.default_rng(20240601)
    shapes = [(16, 3, 3, 3), (16, 16, 3, 3), (32, 16, 3, 3)]
    arrays = {}
    for i, shape in enumerate(shapes):
        fan_in = shape[1] * shape[2] * shape[3]
        arrays[f"w{i}"] = (rng.standard_normal(shape) / np.sqrt(fan_in)).astype(np.float32)
    out = Path(__file__).resolve().parents[1] / "src/mrcodec/assets/fid_extractor_v1.npz"
    out.parent.mkdir(parents=True, exist_ok=True)
    np.savez(out, **arrays)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
