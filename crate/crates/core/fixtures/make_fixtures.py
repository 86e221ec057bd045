"""Regenerates the clean-image fixture set from scikit-image's bundled sample data.

Only CC0 / public-domain sources are used. Each source is downscaled so its
shorter side is 192 px, then three disjoint 96x96 crops are taken: the first
two go to clean/, the third to holdout/.
"""
import os

import numpy as np
import skimage.data as data
from skimage.color import gray2rgb
from skimage.io import imsave
from skimage.transform import resize

SOURCES = [
    "astronaut", "camera", "coffee", "chelsea", "rocket",
    "hubble_deep_field", "gravel", "brick", "grass", "retina",
]
SIZE = 96
HERE = os.path.dirname(os.path.abspath(__file__))


def main():
    for sub in ("clean", "holdout"):
        os.makedirs(os.path.join(HERE, sub), exist_ok=True)
    for name in SOURCES:
        img = getattr(data, name)()
        if img.ndim == 2:
            img = gray2rgb(img)
        img = img[..., :3]
        h, w = img.shape[:2]
        s = 192 / min(h, w)
        img = resize(img, (round(h * s), round(w * s)), anti_aliasing=True)
        h, w = img.shape[:2]
        spots = [(0, 0), (h - SIZE, w - SIZE), (h // 2 - SIZE // 2, 0 if w < 3 * SIZE else w // 2 - SIZE // 2)]
        if spots[2][0] < SIZE and spots[2][1] < SIZE:
            spots[2] = (0, w - SIZE)
        for k, (y, x) in enumerate(spots):
            crop = (np.clip(img[y:y + SIZE, x:x + SIZE], 0, 1) * 255).round().astype(np.uint8)
            sub = "holdout" if k == 2 else "clean"
            imsave(os.path.join(HERE, sub, f"{name}_{k}.png"), crop, check_contrast=False)


if __name__ == "__main__":
    main()
