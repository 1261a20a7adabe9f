"""Image ingestion, augmentation and block geometry.

Images live as float tensors shaped ``(batch, C, H, W)`` with values in [0, 1].
Blocks are ``(batch, C, l, N)`` with ``l = (H/B)(W/B)`` in row-major block
order and each ``B x B`` block flattened row-major.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import ConfigError, GeometryError

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".pgm", ".ppm", ".gif"}


@dataclass
class ImageBatch:
    data: torch.Tensor
    source_id: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.data.ndim != 4:
            raise GeometryError(f"ImageBatch needs (batch, C, H, W), got shape {tuple(self.data.shape)}")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(self.data.shape)  # type: ignore[return-value]


@dataclass
class BlockSet:
    """Vectorized non-overlapping blocks plus the geometry needed to refold them."""

    blocks: torch.Tensor  # (batch, C, l, N)
    block_size: int
    grid: tuple[int, int]  # (H/B, W/B)

    @property
    def count(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def dim(self) -> int:
        return self.block_size * self.block_size


def check_geometry(height: int, width: int, block_size: int) -> tuple[int, int]:
    if block_size < 1 or height % block_size or width % block_size:
        raise GeometryError(
            f"image of H={height}, W={width} cannot be split into B={block_size} blocks"
        )
    return height // block_size, width // block_size


def unfold(img: torch.Tensor | ImageBatch, block_size: int) -> BlockSet:
    x = img.data if isinstance(img, ImageBatch) else img
    b, c, h, w = x.shape
    hb, wb = check_geometry(h, w, block_size)
    blocks = (
        x.reshape(b, c, hb, block_size, wb, block_size)
        .permute(0, 1, 2, 4, 3, 5)
        .reshape(b, c, hb * wb, block_size * block_size)
    )
    return BlockSet(blocks=blocks, block_size=block_size, grid=(hb, wb))


def fold(blocks: BlockSet) -> torch.Tensor:
    """Exact inverse of :func:`unfold`. No clamping is applied."""
    t = blocks.blocks
    hb, wb = blocks.grid
    bs = blocks.block_size
    if t.ndim != 4 or t.shape[2] != hb * wb or t.shape[3] != bs * bs:
        raise GeometryError(
            f"block tensor {tuple(t.shape)} does not match grid {blocks.grid} with B={bs}"
        )
    b, c = t.shape[:2]
    return (
        t.reshape(b, c, hb, wb, bs, bs)
        .permute(0, 1, 2, 4, 3, 5)
        .reshape(b, c, hb * bs, wb * bs)
    )


def upsample_blocks(grid_map: torch.Tensor, block_size: int) -> torch.Tensor:
    """Nearest-neighbour expansion of a per-block map ``(b, Hb, Wb)`` to ``(b, 1, H, W)``."""
    up = grid_map.repeat_interleave(block_size, dim=-2).repeat_interleave(block_size, dim=-1)
    return up.unsqueeze(1)


def block_means(img: torch.Tensor, block_size: int) -> torch.Tensor:
    """Spatial average per block, ``(b, C, H, W) -> (b, C, Hb, Wb)``."""
    return torch.nn.functional.avg_pool2d(img, block_size)


# --------------------------------------------------------------------------- datasets


def _read_image(path: Path, grayscale: bool) -> np.ndarray:
    with Image.open(path) as im:
        im = im.convert("L" if grayscale else "RGB")
        arr = np.asarray(im, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = arr.transpose(2, 0, 1)
    return np.ascontiguousarray(arr)


class ImageFolder:
    """All decodable images under a directory tree, held in memory.

    Files that fail to decode, or are smaller than the crop, are skipped with a
    warning and counted in ``skipped``.
    """

    def __init__(self, path: str | Path, crop: int, grayscale: bool = True):
        root = Path(path)
        if not root.is_dir():
            raise ConfigError(f"dataset directory does not exist: {root}")
        files = sorted(p for p in root.rglob("*") if p.is_file())
        if not files:
            raise ConfigError(f"dataset directory is empty: {root}")
        self.root = root
        self.crop = int(crop)
        self.grayscale = grayscale
        self.images: list[np.ndarray] = []
        self.names: list[str] = []
        self.skipped = 0
        for p in files:
            try:
                arr = _read_image(p, grayscale)
            except (UnidentifiedImageError, OSError, ValueError) as exc:
                self.skipped += 1
                warnings.warn(f"skipping unreadable image {p}: {exc}", stacklevel=2)
                continue
            if arr.shape[1] < self.crop or arr.shape[2] < self.crop:
                self.skipped += 1
                warnings.warn(f"skipping {p}: smaller than crop {self.crop}", stacklevel=2)
                continue
            self.images.append(arr)
            self.names.append(str(p.relative_to(root)))
        if not self.images:
            raise ConfigError(f"no usable images of size >= {self.crop} in {root}")

    def __len__(self) -> int:
        return len(self.images)

    def _crop(self, idx: int, rng: np.random.Generator | None) -> np.ndarray:
        img = self.images[idx]
        _, h, w = img.shape
        c = self.crop
        if rng is None:
            top, left = (h - c) // 2, (w - c) // 2
            return img[:, top : top + c, left : left + c]
        top = int(rng.integers(0, h - c + 1))
        left = int(rng.integers(0, w - c + 1))
        out = img[:, top : top + c, left : left + c]
        return np.rot90(out, k=int(rng.integers(0, 4)), axes=(1, 2))

    def batches(
        self,
        batch_size: int,
        augment: bool = False,
        seed: int = 0,
        epoch: int = 0,
        shuffle: bool | None = None,
        drop_last: bool = False,
    ) -> Iterator[ImageBatch]:
        """Deterministic batch stream; the order depends only on ``(seed, epoch)``."""
        shuffle = augment if shuffle is None else shuffle
        rng = np.random.default_rng([seed, epoch]) if (augment or shuffle) else None
        order = rng.permutation(len(self)) if shuffle else np.arange(len(self))
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            if drop_last and len(idx) < batch_size:
                break
            crops = [self._crop(int(i), rng if augment else None) for i in idx]
            data = torch.from_numpy(np.ascontiguousarray(np.stack(crops)))
            yield ImageBatch(data=data, source_id=[self.names[int(i)] for i in idx])

    def tensor(self) -> torch.Tensor:
        """All images center-cropped, stacked into one batch tensor."""
        return torch.from_numpy(np.stack([self._crop(i, None) for i in range(len(self))]).copy())


def load_dataset(
    path: str | Path,
    crop: int,
    augment: bool = False,
    seed: int = 0,
    batch_size: int = 1,
    grayscale: bool = True,
) -> Iterator[ImageBatch]:
    folder = ImageFolder(path, crop, grayscale=grayscale)
    if folder.skipped:
        logger.warning("%d file(s) skipped while loading %s", folder.skipped, path)
    yield from folder.batches(batch_size, augment=augment, seed=seed)


# --------------------------------------------------------------------------- desk corpus


def _textured_patch(rng: np.random.Generator, size: int) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size] / size
    f1, f2 = rng.uniform(3, 12, size=2)
    phase = rng.uniform(0, 2 * np.pi, size=2)
    wave = np.sin(2 * np.pi * f1 * xx + phase[0]) * np.cos(2 * np.pi * f2 * yy + phase[1])
    noise = rng.normal(0, 1, (size, size))
    noise = 0.5 * (noise + np.roll(noise, 1, 0))
    return 0.5 + 0.3 * wave + 0.12 * noise


def synthetic_salient_image(
    size: int, block_size: int, rng: np.random.Generator, fraction: float = 0.3
) -> np.ndarray:
    """Flat background with textured content confined to a subset of blocks."""
    g = size // block_size
    img = np.full((size, size), rng.uniform(0.1, 0.9))
    yy, xx = np.mgrid[0:size, 0:size] / size
    img += rng.uniform(-0.05, 0.05) * xx + rng.uniform(-0.05, 0.05) * yy
    n_salient = max(1, int(round(fraction * g * g)))
    cells = rng.choice(g * g, size=n_salient, replace=False)
    tex = _textured_patch(rng, size)
    for cidx in cells:
        r, c = divmod(int(cidx), g)
        sl = (slice(r * block_size, (r + 1) * block_size), slice(c * block_size, (c + 1) * block_size))
        img[sl] = tex[sl]
    return np.clip(img, 0.0, 1.0)


NATURAL_IMAGES = ("camera", "astronaut", "coins", "moon", "coffee", "chelsea", "rocket",
                  "brick", "grass", "gravel", "clock", "immunohistochemistry", "cat", "text")
TRAIN_IMAGES = NATURAL_IMAGES[:10]
HELDOUT_IMAGES = NATURAL_IMAGES[10:]


def natural_images(grayscale: bool = True, names: Sequence[str] = NATURAL_IMAGES) -> list[np.ndarray]:
    """Bundled natural test images from scikit-image, as float arrays in [0, 1]."""
    import skimage.color
    import skimage.data
    import skimage.util

    out = []
    for name in names:
        img = skimage.util.img_as_float(getattr(skimage.data, name)())
        if grayscale and img.ndim == 3:
            img = skimage.color.rgb2gray(img)
        elif not grayscale and img.ndim == 2:
            img = np.stack([img] * 3, axis=-1)
        out.append(img)
    return out


def write_desk_corpus(
    directory: str | Path,
    size: int = 64,
    n_natural: int = 48,
    n_synthetic: int = 16,
    block_size: int = 16,
    seed: int = 0,
    grayscale: bool = True,
    names: Sequence[str] = NATURAL_IMAGES,
) -> Path:
    """Write a small synthetic-plus-natural PNG corpus for desk-scale runs."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    sources = natural_images(grayscale, names) if n_natural else []
    for i in range(n_natural):
        src = sources[i % len(sources)]
        h, w = src.shape[:2]
        span = int(rng.integers(size, max(size + 1, min(h, w) // 2)))
        top = int(rng.integers(0, h - span + 1))
        left = int(rng.integers(0, w - span + 1))
        patch = src[top : top + span, left : left + span]
        pil = Image.fromarray(np.uint8(np.clip(patch, 0, 1) * 255 + 0.5))
        pil = pil.resize((size, size), Image.Resampling.BICUBIC)
        pil.save(out / f"natural_{i:03d}.png")
    for i in range(n_synthetic):
        img = synthetic_salient_image(size, block_size, rng)
        if not grayscale:
            img = np.stack([img] * 3, axis=-1)
        Image.fromarray(np.uint8(img * 255 + 0.5)).save(out / f"synthetic_{i:03d}.png")
    return out
