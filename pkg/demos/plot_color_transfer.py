"""
Palette-level color transfer between two synthetic images
=========================================================

Two toy images with very different palettes (a warm sunset gradient and a
cool ocean gradient) are quantized to small palettes; the source palette
is then mapped onto the target palette through mini-batch couplings and
the pixels repainted.
"""

from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from mbot import ExactOuter, Image, color_transfer
from mbot.color import write_ppm

out_dir = Path(__file__).parent / "output"
out_dir.mkdir(exist_ok=True)


def sunset(h, w, seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, h)[:, None, None]
    base = (1 - t) * np.array([0.95, 0.55, 0.2]) + t * np.array([0.35, 0.05, 0.3])
    return Image(np.clip(base + 0.05 * rng.standard_normal((h, w, 3)), 0, 1))


def ocean(h, w, seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, h)[:, None, None]
    base = (1 - t) * np.array([0.55, 0.75, 0.9]) + t * np.array([0.0, 0.25, 0.5])
    return Image(np.clip(base + 0.05 * rng.standard_normal((h, w, 3)), 0, 1))


source = sunset(64, 64, seed=1)
target = ocean(64, 64, seed=2)

transferred, src_pal, tgt_pal, new_centers = color_transfer(
    source, target, K=64, k=4, m=16, iterations=10, outer=ExactOuter(), seed=3
)
write_ppm(out_dir / "transferred.ppm", transferred)

fig, axes = plt.subplots(1, 3, figsize=(10, 3.6))
for ax, (title, img) in zip(
    axes, [("source", source), ("target", target), ("transferred", transferred)]
):
    ax.imshow(img.data)
    ax.set_title(title)
    ax.axis("off")
fig.tight_layout()
fig.savefig(out_dir / "color_transfer.png", dpi=120)
print(f"wrote {out_dir / 'color_transfer.png'}")

# %%
# The palettes themselves, sorted by luminance, show the palette moving
# into the target's gamut.

def palette_strip(centers):
    order = np.argsort(centers @ np.array([0.299, 0.587, 0.114]))
    return centers[order][None, :, :]

fig, axes = plt.subplots(3, 1, figsize=(8, 3))
for ax, (title, pal) in zip(
    axes,
    [("source palette", src_pal.centers), ("target palette", tgt_pal.centers),
     ("transferred palette", new_centers)],
):
    ax.imshow(palette_strip(pal), aspect="auto")
    ax.set_ylabel(title, rotation=0, ha="right", va="center", fontsize=8)
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out_dir / "palettes.png", dpi=120)
print(f"wrote {out_dir / 'palettes.png'}")
