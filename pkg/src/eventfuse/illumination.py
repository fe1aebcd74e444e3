"""Extreme-exposure simulation on normalized RGB/gray images.

The transform is linear in intensity (no gamma), followed by a clamp to
[0, 1] and 8-bit requantization, so information pushed past either end of
the range is gone for good.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ContractViolation, FormatError
from .numerics import read_evmf

RATIO_LADDER: tuple[float, ...] = (
    0.05, 0.08, 0.1, 0.125, 0.2, 0.4, 0.5, 0.75, 1.0,
    2.0, 3.0, 5.0, 7.5, 8.0, 10.0, 15.0, 20.0,
)

COLOR_SPACE = "linear"


def ratio_ladder() -> list[float]:
    return list(RATIO_LADDER)


def validate_image(img) -> np.ndarray:
    a = np.asarray(img, dtype=np.float64)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or a.shape[2] not in (1, 3) or a.shape[0] < 1 or a.shape[1] < 1:
        raise ContractViolation(f"image must be HxWx1 or HxWx3, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
        raise ContractViolation("image values must be finite and within [0, 1]")
    return a


def quantize8(x) -> np.ndarray:
    """round(x * 255) / 255 with halves rounded up."""
    return np.floor(np.asarray(x, dtype=np.float64) * 255.0 + 0.5) / 255.0


def degrade(img, ratio: float) -> np.ndarray:
    if not ratio > 0:
        raise ContractViolation(f"brightness ratio must be > 0, got {ratio}")
    a = validate_image(img)
    return quantize8(np.clip(ratio * a, 0.0, 1.0))


def saturation_fraction(img) -> float:
    a = validate_image(img)
    return float(np.count_nonzero((a == 0.0) | (a == 1.0))) / a.size


def luminance(img) -> np.ndarray:
    """Rec. 601 luma of an RGB image (gray images pass through), H x W."""
    a = validate_image(img)
    if a.shape[2] == 1:
        return a[:, :, 0]
    return np.clip(0.299 * a[:, :, 0] + 0.587 * a[:, :, 1] + 0.114 * a[:, :, 2], 0.0, 1.0)


# --- image files ---------------------------------------------------------------

def read_image(path) -> np.ndarray:
    """Load PPM/PGM (8-bit) or an EVMF float image as HxWxC in [0, 1]."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"EVMF":
        return validate_image(read_evmf(path))
    try:
        with Image.open(path) as im:
            if im.mode not in ("RGB", "L"):
                raise FormatError(f"{path}: unsupported image mode {im.mode}")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: not a readable PPM/PGM image ({exc})") from None
    return validate_image(arr)


def write_image(path, img) -> None:
    """Write binary PPM (3 channels) or PGM (1 channel), quantized to 8 bits."""
    a = validate_image(img)
    codes = np.floor(a * 255.0 + 0.5).astype(np.uint8)
    if a.shape[2] == 1:
        im = Image.fromarray(codes[:, :, 0])
    else:
        im = Image.fromarray(codes)
    im.save(Path(path), format="PPM")
