"""Palette-level color transfer.

Both images are compressed to K cluster centers, the centers are coupled by
a mini-batch transport scheme over T iterations, and each source center is
replaced by its outer-weighted barycentric image in the target palette.
Pixels then follow their cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import seeding
from .errors import ConfigurationError, InvalidInputError
from .measures import MiniBatchIndex, PointCloud
from .schemes import ExactOuter, OuterScheme, _reduce_outer, batch_cost_matrix
from .solvers import ExactW, InnerMetric, Sliced


@dataclass(frozen=True)
class Image:
    """RGB image with values in [0, 1], stored as a (height, width, 3) array."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise InvalidInputError(f"image must have shape (h, w, 3), got {arr.shape}")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise InvalidInputError("image values must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def pixels(self) -> np.ndarray:
        """Row-major n x 3 view of the pixel values."""
        return self.data.reshape(-1, 3)


@dataclass(frozen=True)
class Palette:
    """K cluster centers plus the per-pixel center index."""

    centers: np.ndarray
    assignments: np.ndarray

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        assignments = np.asarray(self.assignments, dtype=np.int64).ravel()
        if centers.ndim != 2:
            raise InvalidInputError("palette centers must be a 2-d array")
        if assignments.size and (assignments.min() < 0 or assignments.max() >= centers.shape[0]):
            raise InvalidInputError("palette assignment index out of range")
        centers = centers.copy()
        assignments = assignments.copy()
        centers.setflags(write=False)
        assignments.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "assignments", assignments)

    @property
    def k(self) -> int:
        return self.centers.shape[0]


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # |p - c|^2 expanded; tiny negatives from cancellation are clipped.
    d2 = (
        (points * points).sum(axis=1)[:, None]
        + (centers * centers).sum(axis=1)[None, :]
        - 2.0 * points @ centers.T
    )
    return np.maximum(d2, 0.0)


def kmeans(pixels, K: int, iters: int = 50, seed: int = 0) -> Palette:
    """Lloyd's algorithm with k-means++ seeding; deterministic given `seed`.

    Empty clusters keep their previous center, so the quantization objective
    never increases across iterations.
    """
    points = np.asarray(pixels, dtype=np.float64)
    if points.ndim != 2:
        raise InvalidInputError("pixels must be a 2-d array")
    n = points.shape[0]
    if K < 1 or K > n:
        raise InvalidInputError(f"K must be in [1, {n}], got {K}")
    if iters < 1:
        raise InvalidInputError(f"iters must be >= 1, got {iters}")
    rng = seeding.derive_rng(seed)

    centers = np.empty((K, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centers[:1]).ravel()
    for i in range(1, K):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[i] = points[idx]
        closest = np.minimum(closest, _sq_dists(points, centers[i : i + 1]).ravel())

    assignments = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        d2 = _sq_dists(points, centers)
        assignments = d2.argmin(axis=1)
        for c in range(K):
            mask = assignments == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
    assignments = _sq_dists(points, centers).argmin(axis=1)
    return Palette(centers, assignments)


def quantization_objective(points, palette: Palette) -> float:
    """Sum of squared distances from points to their assigned centers."""
    pts = np.asarray(points, dtype=np.float64)
    diff = pts - palette.centers[palette.assignments]
    return float((diff * diff).sum())


def transfer_palette(
    src: Palette,
    tgt: Palette,
    k: int,
    m: int,
    iterations: int,
    inner: InnerMetric = ExactW(),
    outer: OuterScheme = ExactOuter(),
    seed: int = 0,
    threads: int = 1,
) -> np.ndarray:
    """Iteratively map source centers onto the target palette.

    Each iteration samples k batches of m centers per side, couples them, and
    rewrites every source center in a touched batch as the barycentric
    combination sum_j (k m gamma_ij) (pi_ij @ target batch j). The weights of
    that combination sum to one, so transferred centers stay inside the
    convex hull of the target centers. A center sampled into several source
    batches in the same iteration gets the average of its batch images;
    centers never sampled keep their previous value.
    """
    if isinstance(inner, Sliced):
        raise ConfigurationError("palette transfer needs a plan-producing inner metric")
    if m > min(src.k, tgt.k):
        raise InvalidInputError(f"batch size {m} exceeds palette size {min(src.k, tgt.k)}")
    if iterations < 1:
        raise InvalidInputError(f"iterations must be >= 1, got {iterations}")
    src_cloud = PointCloud(src.centers)
    tgt_cloud = PointCloud(tgt.centers)
    new_centers = src.centers.copy()
    for t in range(iterations):
        it_seed = seeding.derive_seed(seed, seeding.STEP, t)
        rng_s = seeding.derive_rng(it_seed, seeding.BATCH_X)
        rng_t = seeding.derive_rng(it_seed, seeding.BATCH_Y)
        batches_s = [MiniBatchIndex(rng_s.choice(src.k, size=m, replace=False), src.k) for _ in range(k)]
        batches_t = [MiniBatchIndex(rng_t.choice(tgt.k, size=m, replace=False), tgt.k) for _ in range(k)]
        C, plans = batch_cost_matrix(
            src_cloud, tgt_cloud, batches_s, batches_t, inner,
            seed=it_seed, keep_plans=True, threads=threads,
        )
        _, gamma = _reduce_outer(C, outer)
        acc = np.zeros_like(new_centers)
        weight = np.zeros(src.k)
        for bi, bj, g in zip(gamma.rows, gamma.cols, gamma.mass):
            if g == 0.0:
                continue
            pi = plans[bi][bj]
            rows_global = batches_s[bi].indices[pi.rows]
            scaled = (k * m * g) * pi.mass
            np.add.at(acc, rows_global, scaled[:, None] * tgt.centers[batches_t[bj].indices[pi.cols]])
            np.add.at(weight, rows_global, scaled)
        touched = weight > 0
        new_centers[touched] = acc[touched] / weight[touched, None]
    return new_centers


def apply_palette(img: Image, palette: Palette, new_centers) -> Image:
    """Replace each pixel by its cluster's new center, clamped to [0, 1]."""
    centers = np.asarray(new_centers, dtype=np.float64)
    if centers.shape != palette.centers.shape:
        raise InvalidInputError(
            f"new centers shape {centers.shape} does not match palette {palette.centers.shape}"
        )
    if palette.assignments.shape[0] != img.height * img.width:
        raise InvalidInputError("palette assignments do not cover the image pixels")
    flat = np.clip(centers[palette.assignments], 0.0, 1.0)
    return Image(flat.reshape(img.height, img.width, 3))


def color_transfer(
    source: Image,
    target: Image,
    K: int = 512,
    k: int = 4,
    m: int = 64,
    iterations: int = 20,
    inner: InnerMetric = ExactW(),
    outer: OuterScheme = ExactOuter(),
    seed: int = 0,
    kmeans_iters: int = 50,
    threads: int = 1,
) -> tuple[Image, Palette, Palette, np.ndarray]:
    """Quantize both images, transfer the source palette, repaint the source.

    Returns the transferred image, the source and target palettes, and the
    transferred centers.
    """
    K_src = min(K, source.pixels().shape[0])
    K_tgt = min(K, target.pixels().shape[0])
    src_palette = kmeans(source.pixels(), K_src, iters=kmeans_iters, seed=seeding.derive_seed(seed, 11))
    tgt_palette = kmeans(target.pixels(), K_tgt, iters=kmeans_iters, seed=seeding.derive_seed(seed, 12))
    new_centers = transfer_palette(
        src_palette, tgt_palette, k=k, m=m, iterations=iterations,
        inner=inner, outer=outer, seed=seed, threads=threads,
    )
    return apply_palette(source, src_palette, new_centers), src_palette, tgt_palette, new_centers


# ---------------------------------------------------------------------------
# PPM (P6) image files and palette CSV dumps.


def read_ppm(path) -> Image:
    """Binary P6 with maxval 255; bytes map linearly onto [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4 and pos < len(raw):
        if raw[pos : pos + 1].isspace():
            pos += 1
            continue
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(raw) and not raw[end : end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    if len(fields) < 4 or fields[0] != b"P6":
        raise InvalidInputError(f"{path} is not a binary P6 PPM file")
    try:
        width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    except ValueError as exc:
        raise InvalidInputError(f"malformed PPM header in {path}") from exc
    if maxval != 255:
        raise InvalidInputError(f"only maxval 255 PPMs are supported, got {maxval}")
    pos += 1  # single whitespace after maxval
    body = raw[pos : pos + width * height * 3]
    if len(body) != width * height * 3:
        raise InvalidInputError(f"PPM pixel data truncated in {path}")
    data = np.frombuffer(body, dtype=np.uint8).astype(np.float64) / 255.0
    return Image(data.reshape(height, width, 3))


def write_ppm(path, img: Image) -> None:
    """Round-to-nearest byte quantization of the [0, 1] values."""
    bytes_ = np.rint(np.clip(img.data, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{img.width} {img.height}\n255\n".encode("ascii"))
        fh.write(bytes_.tobytes())


def write_palette_csv(path, centers) -> None:
    """Palette dump as `index,r,g,b`."""
    arr = np.asarray(centers, dtype=np.float64)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# index,r,g,b\n")
        for i, row in enumerate(arr):
            fh.write(f"{i}," + ",".join(format(v, ".17g") for v in row) + "\n")
