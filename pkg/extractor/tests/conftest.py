import json

import numpy as np
import pytest
from PIL import Image


def paint_image(path, seed, size=(20, 16)):
    rng = np.random.default_rng(seed)
    pixels = rng.integers(0, 256, size=(size[1], size[0], 3), dtype=np.uint8)
    Image.fromarray(pixels).save(path)


@pytest.fixture()
def image_dataset(tmp_path):
    """Tiny on-disk dataset: 2 base, 1 validation, 2 novel classes x 3 images."""
    root = tmp_path / "images"
    spec = {
        "base": {"ant": [], "bee": []},
        "validation": {"cat": []},
        "novel": {"dog": [], "eel": []},
    }
    seed = 0
    for split, classes in spec.items():
        for cls in classes:
            directory = root / cls
            directory.mkdir(parents=True)
            for i in range(3):
                rel = f"{cls}/{cls}_{i}.png"
                paint_image(root / rel, seed)
                classes[cls].append(rel)
                seed += 1
    splits_file = tmp_path / "splits.json"
    splits_file.write_text(json.dumps(spec))
    return root, splits_file, spec
