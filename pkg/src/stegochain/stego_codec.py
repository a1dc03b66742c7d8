"""Embed and extract frame bits in a Raster following a keyed plan."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import CapacityError, ParameterError
from .formula_engine import EmbeddingPlan, make_plan
from .image_io import Raster


@dataclass(frozen=True)
class StegoParams:
    # Default fraction taken from the worked example: 1000 of 10000 pixels.
    usage_fraction: Fraction = Fraction(1, 100)
    bit_planes: int = 3

    def __post_init__(self):
        frac = Fraction(self.usage_fraction)
        if not 0 < frac <= 1:
            raise ParameterError(f"usage_fraction must lie in (0, 1], got {frac}")
        if not 1 <= self.bit_planes <= 8:
            raise ParameterError(f"bit_planes must be in [1, 8], got {self.bit_planes}")
        object.__setattr__(self, "usage_fraction", frac)

    def usable_slots(self, total_slots: int) -> int:
        return math.floor(self.usage_fraction * total_slots)


def capacity_chars(used_slots: int, header_bits: int) -> int:
    """Whole 8-bit characters left once the header has taken its slots.

    >>> capacity_chars(1000, 100)
    112
    """
    if used_slots < header_bits:
        raise CapacityError(f"{used_slots} usable slots cannot hold a {header_bits}-bit header")
    return (used_slots - header_bits) // 8


def check_capacity(total_slots: int, frame_bits: int, params: StegoParams) -> None:
    usable = params.usable_slots(total_slots)
    if frame_bits > usable:
        raise CapacityError(
            f"frame of {frame_bits} bits exceeds the {usable} usable slots "
            f"({params.usage_fraction} of {total_slots})")
    # decoys need as many slots again
    if 2 * frame_bits > total_slots:
        raise CapacityError(
            f"frame of {frame_bits} bits plus {frame_bits} decoys exceeds the {total_slots} slots")


def plan_for(cover: Raster, key: int, frame_bits: int, params: StegoParams) -> EmbeddingPlan:
    check_capacity(cover.total_slots, frame_bits, params)
    return make_plan(key, cover.total_slots, frame_bits, params.bit_planes)


def embed(cover: Raster, key: int, frame_bits: Sequence[int], params: StegoParams = StegoParams()) -> Raster:
    """Hide ``frame_bits`` in a copy of ``cover``.

    Data bits overwrite one low bit of each planned slot; afterwards an equal
    number of decoy slots each get one low bit inverted, so a diff against the
    cover cannot tell data changes from noise.
    """
    bits = np.asarray(frame_bits, dtype=np.uint8).reshape(-1)
    if bits.size and bits.max() > 1:
        raise ParameterError("frame bits must be 0 or 1")
    out = cover.pixels.copy()
    if bits.size == 0:
        return cover.replace_pixels(out)
    plan = plan_for(cover, key, int(bits.size), params)

    slots = np.asarray(plan.data_slots, dtype=np.intp)
    pos = np.asarray(plan.bit_positions, dtype=np.uint8)
    out[slots] = (out[slots] & ~(np.uint8(1) << pos)) | (bits << pos)

    dslots = np.asarray(plan.decoy_slots, dtype=np.intp)
    dpos = np.asarray(plan.decoy_positions, dtype=np.uint8)
    out[dslots] ^= np.uint8(1) << dpos
    return cover.replace_pixels(out)


def extract(stego: Raster, key: int, frame_bit_count: int, params: StegoParams = StegoParams()) -> np.ndarray:
    """Read back ``frame_bit_count`` bits; decoy slots are never touched."""
    if frame_bit_count == 0:
        return np.zeros(0, dtype=np.uint8)
    check_capacity(stego.total_slots, frame_bit_count, params)
    plan = make_plan(key, stego.total_slots, frame_bit_count, params.bit_planes, decoys=False)
    slots = np.asarray(plan.data_slots, dtype=np.intp)
    pos = np.asarray(plan.bit_positions, dtype=np.uint8)
    return (stego.pixels[slots] >> pos) & 1


def bytes_to_bits(data: bytes) -> np.ndarray:
    # MSB first within each byte
    return np.unpackbits(np.frombuffer(bytes(data), dtype=np.uint8))


def bits_to_bytes(bits: Sequence[int]) -> bytes:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.size % 8:
        raise ParameterError("bit count must be a multiple of 8")
    return np.packbits(arr).tobytes()


@dataclass(frozen=True)
class DiffReport:
    changed_bytes: int
    bit_histogram: tuple[int, ...]  # index = bit position, value = bytes differing there

    @property
    def highest_changed_bit(self) -> int:
        nonzero = [i for i, n in enumerate(self.bit_histogram) if n]
        return max(nonzero) if nonzero else -1


def diff(cover: Raster, stego: Raster) -> DiffReport:
    if (cover.width, cover.height, cover.channels) != (stego.width, stego.height, stego.channels):
        raise ParameterError("images differ in dimensions or channel count")
    x = cover.pixels ^ stego.pixels
    hist = tuple(int(np.count_nonzero((x >> b) & 1)) for b in range(8))
    return DiffReport(int(np.count_nonzero(x)), hist)
