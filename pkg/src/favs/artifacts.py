# Licensed under the MIT License

"""Writers for the CSV tables and PGM heatmaps produced by the commands."""

import csv
from pathlib import Path

import numpy as np

from .errors import ShapeError
from .logging import info

PGM_MAXVAL = 255


def format_cell(value) -> str:
    """Locale-independent text for one CSV cell (shortest round-trip floats)."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer, np.bool_)):
        return str(value.item())
    return str(value)


def write_csv(path, header: list, rows) -> Path:
    """Write a CSV table with a header row and ``\\n`` line endings."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])
    info(f"Wrote {path}")
    return path


def log_scale(image: np.ndarray) -> np.ndarray:
    """Map a non-negative image to ``0..255`` by ``log1p`` and its own maximum."""
    image = np.log1p(np.abs(np.asarray(image, dtype=np.float64)))
    peak = float(np.max(image)) if image.size else 0.0
    if peak <= 0.0 or not np.isfinite(peak):
        return np.zeros(image.shape, dtype=np.int64)
    return np.rint(image / peak * PGM_MAXVAL).astype(np.int64)


def spectrum_image(band: np.ndarray) -> np.ndarray:
    """Magnitude of a 2D spectrum with DC moved to the center (display only)."""
    return np.fft.fftshift(np.abs(band))


def _write_p2(path, pixels: np.ndarray) -> Path:
    h, w = pixels.shape
    lines = [f"P2\n{w} {h}\n{PGM_MAXVAL}\n"]
    lines.extend(" ".join(str(v) for v in row) + "\n" for row in pixels)
    path = Path(path)
    path.write_text("".join(lines), encoding="ascii")
    info(f"Wrote {path}")
    return path


def write_pgm(path, image: np.ndarray) -> Path:
    """Write a plain (P2) PGM heatmap of a 2D non-negative image, log-scaled."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ShapeError(f"heatmaps must be 2D, got shape {image.shape}")
    return _write_p2(path, log_scale(image))


def write_mask_pgm(path, mask: np.ndarray) -> Path:
    """Write a binary mask as a P2 PGM with values 0 and 255."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ShapeError(f"masks must be 2D, got shape {mask.shape}")
    return _write_p2(path, np.where(mask > 0.5, PGM_MAXVAL, 0))
