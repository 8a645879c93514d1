"""
Visualization artifacts of the latent space: scatter CSV, decision-boundary
raster (binary PPM) and decoder-grid mosaic (binary PGM).

Rasters put the largest latent y in the top row and the smallest latent x in
the left column.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from csae import config
from csae.data import LabeledDataset, nn_resize, write_csv_table
from csae.errors import ConfigError, FileFormatError, LatentDimensionError, TensorShapeError, TruncatedFileError
from csae.network import CsaeModel, classify_latent, decode, encode
from csae.tensor import argmax_rows

PNM_MAXVAL = 255


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    resolution: int = config.GRID["boundary_resolution"]

    def __post_init__(self):
        bounds = (self.x_min, self.x_max, self.y_min, self.y_max)
        if not np.all(np.isfinite(bounds)):
            raise ConfigError(f"Grid ranges must be finite, got {bounds}")
        if self.x_max <= self.x_min or self.y_max <= self.y_min:
            raise ConfigError(f"Grid ranges must be non-empty, got {bounds}")
        if self.resolution < 2:
            raise ConfigError(f"Grid resolution must be >= 2, got {self.resolution}")

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.resolution)

    @property
    def ys(self) -> np.ndarray:
        # top row first
        return np.linspace(self.y_max, self.y_min, self.resolution)


def require_latent_2d(model: CsaeModel, what: str):
    if model.latent_dim != 2:
        raise LatentDimensionError(
            f"{what} needs a two-dimensional latent space (lambda=2); "
            f"this model has lambda={model.latent_dim}"
        )


def grid_from_latents(
    latents: np.ndarray, resolution: int = config.GRID["boundary_resolution"], margin: float = config.GRID["margin"]
) -> GridSpec:
    """Bounding box of 2-D latents widened by ``margin`` of its extent on every side."""
    latents = np.asarray(latents, dtype=np.float64)
    if latents.ndim != 2 or latents.shape[1] != 2 or len(latents) == 0:
        raise TensorShapeError(f"Expected latents [n>=1, 2], got {latents.shape}")
    low, high = latents.min(axis=0), latents.max(axis=0)
    span = high - low
    pad = np.where(span > 0, span * margin, 0.5)
    return GridSpec(low[0] - pad[0], high[0] + pad[0], low[1] - pad[1], high[1] + pad[1], resolution)


def grid_latents(grid: GridSpec) -> np.ndarray:
    """Latent point of every pixel, row-major: [resolution * resolution, 2]."""
    xx, yy = np.meshgrid(grid.xs, grid.ys, indexing="xy")
    return np.column_stack([xx.ravel(), yy.ravel()])


def latent_to_pixel(grid: GridSpec, latents: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(rows, cols) of the pixel nearest to each latent, clipped to the raster."""
    latents = np.asarray(latents, dtype=np.float64)
    last = grid.resolution - 1
    cols = np.rint((latents[:, 0] - grid.x_min) / (grid.x_max - grid.x_min) * last)
    rows = np.rint((grid.y_max - latents[:, 1]) / (grid.y_max - grid.y_min) * last)
    return np.clip(rows, 0, last).astype(np.int64), np.clip(cols, 0, last).astype(np.int64)


# ----------------------------------------------------------------------
# PNM files
# ----------------------------------------------------------------------

def _write_pnm(path, magic: str, pixels: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    height, width = pixels.shape[:2]
    header = f"{magic}\n{width} {height}\n{PNM_MAXVAL}\n".encode("ascii")
    path.write_bytes(header + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes())
    return path


def write_ppm(path, rgb: np.ndarray) -> Path:
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise TensorShapeError(f"PPM needs an [h, w, 3] image, got {rgb.shape}")
    return _write_pnm(path, "P6", rgb)


def write_pgm(path, gray: np.ndarray) -> Path:
    if gray.ndim != 2:
        raise TensorShapeError(f"PGM needs an [h, w] image, got {gray.shape}")
    return _write_pnm(path, "P5", gray)


def read_pnm(path) -> Tuple[str, np.ndarray]:
    """Read a binary P5/P6 file with maxval 255 as written by this module."""
    data = Path(path).read_bytes()
    fields, offset = [], 0
    while len(fields) < 4:
        while offset < len(data) and data[offset:offset + 1].isspace():
            offset += 1
        if offset < len(data) and data[offset:offset + 1] == b"#":
            offset = data.find(b"\n", offset) + 1 or len(data)
            continue
        end = offset
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end == offset:
            raise TruncatedFileError(f"{path}: truncated PNM header")
        fields.append(data[offset:end].decode("ascii"))
        offset = end
    offset += 1  # single whitespace byte before the raster

    magic, width, height, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in ("P5", "P6"):
        raise FileFormatError(f"{path}: unsupported PNM magic {magic!r}")
    if maxval != PNM_MAXVAL:
        raise FileFormatError(f"{path}: only maxval {PNM_MAXVAL} is supported, got {maxval}")
    channels = 3 if magic == "P6" else 1
    size = width * height * channels
    raster = data[offset:offset + size]
    if len(raster) < size:
        raise TruncatedFileError(f"{path}: expected {size} raster bytes, found {len(raster)}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape((height, width, channels) if channels == 3 else (height, width))
    return magic, pixels.copy()


# ----------------------------------------------------------------------
# Artifacts
# ----------------------------------------------------------------------

def palette_colors(num_classes: int) -> np.ndarray:
    """[num_classes, 3] RGB table; the fixed palette repeats past ten classes."""
    return np.array([config.PALETTE[c % len(config.PALETTE)] for c in range(num_classes)], dtype=np.uint8)


def export_latent_scatter(model: CsaeModel, dataset: LabeledDataset, path, batch_size=config.TRAINING["eval_batch_size"], logger=None) -> Path:
    """CSV of latent coordinates x0.. with true and predicted labels, one row per sample."""
    z = encode(model, dataset.images, batch_size=batch_size)
    predicted = argmax_rows(classify_latent(model, z, batch_size=batch_size))
    model.clear_caches()

    header = [f"x{i}" for i in range(model.latent_dim)] + ["true_label", "predicted_label"]
    columns = [z[:, i] for i in range(model.latent_dim)] + [dataset.labels, predicted]
    note = None
    if model.latent_dim > 2:
        note = (
            f"lambda={model.latent_dim}: raw latent coordinates, "
            "reduce to two dimensions before plotting"
        )
    path = write_csv_table(path, header, columns, integer_columns={"true_label", "predicted_label"}, note=note)
    if logger:
        logger.log(f"Latent scatter ({len(dataset)} samples) saved to: {path}")
    return path


@dataclass
class BoundaryImage:
    pixels: np.ndarray  # [resolution, resolution, 3] uint8
    predictions: np.ndarray  # [resolution, resolution] class per pixel
    grid: GridSpec


def decision_boundary_image(
    model: CsaeModel,
    test_latents: np.ndarray,
    path=None,
    grid: Optional[GridSpec] = None,
    overlay: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    batch_size: int = 4096,
    logger=None,
) -> BoundaryImage:
    """
    Color every pixel of the latent grid by the classifier head's argmax.
    ``overlay=(latents, labels)`` adds a 3x3 marker per point in the darkened
    color of its true class.
    """
    require_latent_2d(model, "A decision-boundary image")
    if grid is None:
        grid = grid_from_latents(test_latents)

    probs = classify_latent(model, grid_latents(grid).astype(model.dtype), batch_size=batch_size)
    model.clear_caches()
    predictions = argmax_rows(probs).reshape(grid.resolution, grid.resolution)
    colors = palette_colors(model.num_classes)
    pixels = colors[predictions]

    if overlay is not None:
        points, labels = overlay
        rows, cols = latent_to_pixel(grid, points)
        marker = colors[np.asarray(labels) % len(colors)] // 2
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                r = np.clip(rows + dr, 0, grid.resolution - 1)
                c = np.clip(cols + dc, 0, grid.resolution - 1)
                pixels[r, c] = marker

    if path is not None:
        write_ppm(path, pixels)
        if logger:
            logger.log(f"Decision boundary ({grid.resolution}x{grid.resolution}) saved to: {path}")
    return BoundaryImage(pixels, predictions, grid)


def decoder_grid_image(
    model: CsaeModel,
    grid: GridSpec,
    path=None,
    points: int = config.GRID["decoder_points"],
    tile: Optional[int] = None,
    logger=None,
) -> np.ndarray:
    """
    Decode a points x points lattice spanning ``grid`` and tile the images
    row-major into one grayscale mosaic of (points * tile)^2 bytes.
    """
    require_latent_2d(model, "A decoder grid")
    if points < 2:
        raise ConfigError(f"Decoder grid needs at least 2 points per axis, got {points}")
    side = model.preset.input_side
    tile = tile or side
    if tile < 1:
        raise ConfigError(f"Tile size must be positive, got {tile}")

    lattice = GridSpec(grid.x_min, grid.x_max, grid.y_min, grid.y_max, points)
    decoded = decode(model, grid_latents(lattice).astype(model.dtype))[..., 0]
    model.clear_caches()

    mosaic = np.zeros((points * tile, points * tile), dtype=np.uint8)
    for index, image in enumerate(decoded):
        row, col = divmod(index, points)
        if tile != side:
            image = nn_resize(image, (tile, tile))
        mosaic[row * tile:(row + 1) * tile, col * tile:(col + 1) * tile] = np.clip(
            np.rint(image * PNM_MAXVAL), 0, PNM_MAXVAL
        ).astype(np.uint8)

    if path is not None:
        write_pgm(path, mosaic)
        if logger:
            logger.log(f"Decoder grid ({points}x{points} tiles of {tile}px) saved to: {path}")
    return mosaic
