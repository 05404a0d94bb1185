"""Flat-color rasterization helpers for the simulated cameras."""
import numpy as np


def blank(size: int, color: tuple[int, ...] = (0, 0, 0)) -> np.ndarray:
    image = np.empty((size, size, len(color)), dtype=np.uint8)
    image[...] = np.asarray(color, dtype=np.uint8)
    return image


def fill_rect(image: np.ndarray, row0: int, col0: int, row1: int, col1: int, color: tuple[int, ...]) -> None:
    """Fill rows ``[row0, row1)`` and columns ``[col0, col1)``, clipped to the image."""
    h, w = image.shape[:2]
    r0, r1 = max(0, row0), min(h, row1)
    c0, c1 = max(0, col0), min(w, col1)
    if r0 < r1 and c0 < c1:
        image[r0:r1, c0:c1] = np.asarray(color, dtype=np.uint8)


def fill_disk(image: np.ndarray, center_row: float, center_col: float, radius: float, color: tuple[int, ...]) -> None:
    """Disk of pixels whose centers lie within ``radius``; invariant under rotation about its center."""
    h, w = image.shape[:2]
    rows, cols = np.mgrid[0:h, 0:w]
    mask = (rows + 0.5 - center_row) ** 2 + (cols + 0.5 - center_col) ** 2 <= radius ** 2
    image[mask] = np.asarray(color, dtype=np.uint8)


def tint(image: np.ndarray, factors: tuple[float, ...]) -> np.ndarray:
    """Multiply channels by ``factors`` and saturate."""
    shifted = image.astype(np.float32) * np.asarray(factors, dtype=np.float32)
    return np.clip(shifted, 0, 255).astype(np.uint8)
