"""Payload cipher and integrity check."""

from __future__ import annotations

import enum
import zlib

import numpy as np

from .formula_engine import Domain, expand_key


class CipherMode(str, enum.Enum):
    INVERSION = "inversion"  # every bit complemented
    STREAM = "keyed-stream"

    @classmethod
    def parse(cls, text: str) -> CipherMode:
        if text == "stream":
            return cls.STREAM
        return cls(text)


def keystream_bytes(key: int, length: int) -> bytes:
    """ENC-domain keystream, each 64-bit word emitted least-significant byte first."""
    n_words = -(-length // 8)
    state = expand_key(key, Domain.ENC)
    words = []
    for _ in range(n_words):
        word, state = state.next()
        words.append(word)
    return np.array(words, dtype="<u8").tobytes()[:length]


def encrypt(plain: bytes, key: int, mode: CipherMode = CipherMode.STREAM) -> bytes:
    data = np.frombuffer(bytes(plain), dtype=np.uint8)
    if CipherMode(mode) is CipherMode.INVERSION:
        return (~data).tobytes()
    pad = np.frombuffer(keystream_bytes(key, data.size), dtype=np.uint8)
    return (data ^ pad).tobytes()


def decrypt(cipher: bytes, key: int, mode: CipherMode = CipherMode.STREAM) -> bytes:
    # both modes are involutions
    return encrypt(cipher, key, mode)


def checksum(data: bytes) -> int:
    """CRC-32 (reflected 0xEDB88320, init and final XOR 0xFFFFFFFF)."""
    return zlib.crc32(bytes(data)) & 0xFFFFFFFF
