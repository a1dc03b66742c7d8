"""PNG loading/saving as flat 8-bit rasters.

Only PNG is accepted: embedding works at the bit level, so the carrier must
survive transfer without recompression.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, FormatError, ParameterError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

_MODES = {1: "L", 3: "RGB", 4: "RGBA"}


@dataclass(frozen=True, eq=False)
class Raster:
    """Row-major, channel-interleaved 8-bit samples.

    ``pixels`` is a read-only flat ``uint8`` array; every operation that
    modifies an image returns a new Raster.
    """

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.channels not in _MODES:
            raise ParameterError(f"channels must be 1, 3 or 4, got {self.channels}")
        if self.width < 0 or self.height < 0:
            raise ParameterError("dimensions must be non-negative")
        if isinstance(self.pixels, (bytes, bytearray, memoryview)):
            arr = np.frombuffer(bytes(self.pixels), dtype=np.uint8).copy()
        else:
            arr = np.array(self.pixels, dtype=np.uint8).reshape(-1)
        if arr.size != self.width * self.height * self.channels:
            raise ParameterError(
                f"expected {self.width * self.height * self.channels} bytes, got {arr.size}")
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @classmethod
    def from_bytes(cls, width: int, height: int, channels: int, data: bytes) -> Raster:
        return cls(width, height, channels, bytes(data))

    @property
    def total_slots(self) -> int:
        return int(self.pixels.size)

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def replace_pixels(self, pixels: np.ndarray) -> Raster:
        return Raster(self.width, self.height, self.channels, pixels)

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        return ((self.width, self.height, self.channels) == (other.width, other.height, other.channels)
                and np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.width, self.height, self.channels, self.tobytes()))


def _normalize(img: Image.Image) -> Image.Image:
    mode = img.mode
    if mode in ("L", "RGB", "RGBA"):
        return img
    if mode == "P":
        return img.convert("RGBA" if "transparency" in img.info else "RGB")
    if mode == "LA":
        return img.convert("RGBA")
    if mode == "1":
        return img.convert("L")
    if mode in ("I", "I;16", "I;16B", "I;16L"):
        # 16-bit grayscale: keep the high byte of each sample
        arr = np.asarray(img, dtype=np.uint32) >> 8
        return Image.fromarray(arr.astype(np.uint8))
    return img.convert("RGB")


def load_raster(file_path: str | os.PathLike) -> Raster:
    """Decode a PNG file into a Raster.

    Raises:
        FormatError: the file is not a PNG (e.g. JPEG). Lossy formats would
            alter hidden bits, so they are refused outright.
        DecodeError: the file has a PNG signature but is corrupt.
    """
    with open(file_path, "rb") as fh:
        head = fh.read(len(PNG_SIGNATURE))
    if head != PNG_SIGNATURE:
        raise FormatError(
            f"{os.fspath(file_path)}: not a PNG; a lossless format is required because "
            "lossy encodings change the bit pattern that carries the hidden data")
    try:
        with Image.open(file_path) as img:
            img.load()
            img = _normalize(img)
            arr = np.asarray(img, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"{os.fspath(file_path)}: cannot decode PNG: {exc}") from exc
    channels = 1 if arr.ndim == 2 else arr.shape[2]
    height, width = arr.shape[:2]
    return Raster(width, height, channels, arr.reshape(-1))


def save_raster(raster: Raster, file_path: str | os.PathLike) -> None:
    """Write ``raster`` as a non-interlaced 8-bit PNG (bit-exact round trip)."""
    if raster.width == 0 or raster.height == 0:
        raise ParameterError("cannot save a zero-sized raster")
    shape = (raster.height, raster.width) if raster.channels == 1 else (
        raster.height, raster.width, raster.channels)
    img = Image.fromarray(np.ascontiguousarray(raster.pixels.reshape(shape)))
    img.save(file_path, format="PNG")
