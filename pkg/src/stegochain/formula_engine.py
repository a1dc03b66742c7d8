"""Keyed formula engine.

One 32-bit transaction key drives every derivation in the stack: the slot
sequence, the per-slot bit positions, decoy placement, the cipher keystream,
session/request identifiers and the next key in the chain. Each derivation
seeds its own keystream from ``expand_key(key, domain)`` so the outputs are
independent of each other but all fixed by the single key.

The generator is splitmix64 (Steele, Lea & Flood) with its published
constants, which keeps the output bit-exact across implementations.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .errors import CapacityError, ParameterError

MASK32 = 0xFFFFFFFF
MASK64 = 0xFFFFFFFFFFFFFFFF

_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


class Domain(enum.IntEnum):
    PIXEL = 0x5049584C53455100
    BIT = 0x4249545345510000
    SESS = 0x5345535349440000
    REQ = 0x5245514944000000
    ENC = 0x454E435259505400
    KEYGEN = 0x4B455947454E0000
    DECOY = 0x4445434F59000000


class KeyMode(str, enum.Enum):
    DETERMINISTIC = "deterministic"
    RANDOM = "random"


def check_key(key: int) -> int:
    if not isinstance(key, int) or isinstance(key, bool) or not 0 <= key <= MASK32:
        raise ParameterError(f"transaction key must be a 32-bit unsigned integer, got {key!r}")
    return key


def _advance(state: int) -> tuple[int, int]:
    state = (state + _GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MUL1) & MASK64
    z = ((z ^ (z >> 27)) * _MUL2) & MASK64
    return z ^ (z >> 31), state


def mix64(x: int) -> int:
    """Output word of one generator step taken from state ``x``."""
    return _advance(x & MASK64)[0]


@dataclass(frozen=True)
class KeystreamState:
    state: int
    domain: int

    def next(self) -> tuple[int, KeystreamState]:
        word, state = _advance(self.state)
        return word, KeystreamState(state, self.domain)

    def words(self) -> Iterator[int]:
        state = self.state
        while True:
            word, state = _advance(state)
            yield word


def expand_key(key: int, domain: int) -> KeystreamState:
    check_key(key)
    domain = int(domain)
    return KeystreamState(mix64(key ^ domain), domain)


def keystream(key: int, domain: Domain) -> Iterator[int]:
    return expand_key(key, domain).words()


def first_word(key: int, domain: Domain) -> int:
    return expand_key(key, domain).next()[0]


def _draw_distinct(words: Iterator[int], total_slots: int, count: int, taken: Iterable[int] = ()) -> list[int]:
    seen = set(taken)
    picked: list[int] = []
    while len(picked) < count:
        candidate = next(words) % total_slots
        if candidate in seen:
            continue
        seen.add(candidate)
        picked.append(candidate)
    return picked


def pixel_sequence(key: int, total_slots: int, needed: int) -> list[int]:
    """Ordered, distinct slot indices in ``[0, total_slots)`` for ``key``.

    Rejection sampling over the PIXEL keystream: each word is reduced modulo
    ``total_slots`` and repeats are skipped. Output for ``needed = n`` is a
    prefix of the output for any larger ``needed``.
    """
    check_key(key)
    if needed < 0:
        raise ParameterError("needed must be non-negative")
    if needed == 0:
        return []
    if needed > total_slots:
        raise CapacityError(f"need {needed} distinct slots but the raster has only {total_slots}")
    return _draw_distinct(keystream(key, Domain.PIXEL), total_slots, needed)


def _check_planes(bit_planes: int) -> None:
    if not 1 <= bit_planes <= 8:
        raise ParameterError(f"bit_planes must be in [1, 8], got {bit_planes}")


def bit_positions(key: int, data_slots: Sequence[int], bit_planes: int) -> list[int]:
    # The slot index is mixed in so positions depend on the pixel formula's output.
    _check_planes(bit_planes)
    words = keystream(key, Domain.BIT)
    return [(slot ^ next(words)) % bit_planes for slot in data_slots]


def derive_session_id(key: int) -> int:
    return first_word(key, Domain.SESS) & MASK32


def derive_request_id(previous_key: int) -> int:
    return first_word(previous_key, Domain.REQ) & MASK32


def derive_next_key(current_key: int, mode: KeyMode | str = KeyMode.DETERMINISTIC,
                    entropy: int | None = None) -> int:
    mode = KeyMode(mode)
    if mode is KeyMode.RANDOM:
        if entropy is None:
            raise ParameterError("random key mode requires an entropy value")
        return check_key(entropy)
    return first_word(current_key, Domain.KEYGEN) & MASK32


@dataclass(frozen=True)
class EmbeddingPlan:
    """Slots and bit positions for one frame, plus the decoy slots."""

    data_slots: tuple[int, ...]
    bit_positions: tuple[int, ...]
    decoy_slots: tuple[int, ...]
    decoy_positions: tuple[int, ...]
    bit_planes: int

    def __post_init__(self):
        if len(self.bit_positions) != len(self.data_slots):
            raise ParameterError("one bit position per data slot is required")
        if len(self.decoy_positions) != len(self.decoy_slots):
            raise ParameterError("one bit position per decoy slot is required")
        if len(set(self.data_slots) | set(self.decoy_slots)) != len(self.data_slots) + len(self.decoy_slots):
            raise ParameterError("plan slots must be pairwise distinct")


def decoy_sequence(key: int, total_slots: int, taken: Sequence[int], count: int,
                   bit_planes: int) -> tuple[list[int], list[int]]:
    """Decoy slots disjoint from ``taken`` and one bit position for each.

    Slots are drawn first from the DECOY keystream; the same stream then
    supplies ``count`` further words for the positions.
    """
    _check_planes(bit_planes)
    if count == 0:
        return [], []
    if len(taken) + count > total_slots:
        raise CapacityError(
            f"{len(taken)} data slots plus {count} decoys exceed the {total_slots} slots available")
    words = keystream(key, Domain.DECOY)
    slots = _draw_distinct(words, total_slots, count, taken)
    positions = [next(words) % bit_planes for _ in range(count)]
    return slots, positions


@lru_cache(maxsize=256)
def _data_plan(key: int, total_slots: int, needed: int, bit_planes: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    slots = pixel_sequence(key, total_slots, needed)
    return tuple(slots), tuple(bit_positions(key, slots, bit_planes))


def make_plan(key: int, total_slots: int, needed: int, bit_planes: int, decoys: bool = True) -> EmbeddingPlan:
    """Full embedding plan; ``decoys=False`` skips decoy derivation (extraction path)."""
    _check_planes(bit_planes)
    slots, positions = _data_plan(key, total_slots, needed, bit_planes)
    if decoys:
        dslots, dpos = decoy_sequence(key, total_slots, slots, needed, bit_planes)
    else:
        dslots, dpos = [], []
    return EmbeddingPlan(slots, positions, tuple(dslots), tuple(dpos), bit_planes)


# Golden-vector file: one "DOMAIN KEYHEX8 WORDHEX16" line per vector.

def golden_vectors(keys: Iterable[int]) -> list[tuple[str, int, int]]:
    keys = list(keys)
    return [(d.name, k, first_word(k, d)) for d in Domain for k in keys]


def format_golden_vectors(vectors: Iterable[tuple[str, int, int]]) -> str:
    return "".join(f"{name} {key:08x} {word:016x}\n" for name, key, word in vectors)


def parse_golden_vectors(text: str) -> list[tuple[str, int, int]]:
    vectors = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] not in Domain.__members__:
            raise ParameterError(f"line {lineno}: expected 'DOMAIN KEY WORD', got {line!r}")
        vectors.append((parts[0], int(parts[1], 16), int(parts[2], 16)))
    return vectors
