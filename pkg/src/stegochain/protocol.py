"""Frames, session state and the sender/receiver pipelines.

Wire layout of a frame (all big-endian)::

    0..3    session id
    4..7    request id
    8..11   next transaction key
    12..13  payload length (bytes)
    14..    ciphertext
    last 4  CRC-32 of everything before it

Message ``i`` is embedded with the key established before it; its header
carries the key for message ``i + 1``.
"""

from __future__ import annotations

import enum
import logging
import struct
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ParameterError, StateError
from .formula_engine import (KeyMode, check_key, derive_next_key, derive_request_id,
                             derive_session_id)
from .image_io import Raster
from .payload_crypto import CipherMode, checksum, decrypt, encrypt
from .stego_codec import StegoParams, bits_to_bytes, bytes_to_bits, embed, extract

log = logging.getLogger(__name__)

_HEADER = struct.Struct(">IIIH")
HEADER_BYTES = _HEADER.size  # 14
HEADER_BITS = 8 * HEADER_BYTES
CHECK_BITS = 32
FRAME_OVERHEAD_BITS = HEADER_BITS + CHECK_BITS
MAX_PAYLOAD = 0xFFFF


@dataclass(frozen=True)
class FrameHeader:
    session_id: int
    request_id: int
    next_key: int
    payload_len: int


def serialize_header(h: FrameHeader) -> bytes:
    return _HEADER.pack(h.session_id, h.request_id, h.next_key, h.payload_len)


def parse_header(data: bytes) -> FrameHeader:
    if len(data) < HEADER_BYTES:
        raise ParameterError(f"header needs {HEADER_BYTES} bytes, got {len(data)}")
    return FrameHeader(*_HEADER.unpack(bytes(data[:HEADER_BYTES])))


@dataclass(frozen=True)
class Frame:
    header: FrameHeader
    ciphertext: bytes
    check: int

    def to_bytes(self) -> bytes:
        return serialize_header(self.header) + self.ciphertext + self.check.to_bytes(4, "big")

    def bits(self) -> np.ndarray:
        return bytes_to_bits(self.to_bytes())

    @property
    def bit_length(self) -> int:
        return FRAME_OVERHEAD_BITS + 8 * len(self.ciphertext)

    def is_intact(self) -> bool:
        return checksum(serialize_header(self.header) + self.ciphertext) == self.check


def parse_frame(data: bytes) -> Frame:
    header = parse_header(data)
    end = HEADER_BYTES + header.payload_len
    if len(data) != end + 4:
        raise ParameterError(f"frame length {len(data)} does not match payload_len {header.payload_len}")
    return Frame(header, bytes(data[HEADER_BYTES:end]), int.from_bytes(data[end:], "big"))


def frame_bit_length(payload_len: int) -> int:
    return FRAME_OVERHEAD_BITS + 8 * payload_len


class Phase(str, enum.Enum):
    PRE_AUTH = "pre-auth"
    AUTHENTICATED = "authenticated"
    CLOSED = "closed"


@dataclass
class SessionState:
    """One endpoint's view of a session. Owned by a single endpoint."""

    phase: Phase
    session_id: int
    current_key: int
    message_index: int = 0
    # key of the last processed message; lets the receiver recognise replays
    previous_key: int | None = None

    @property
    def expected_request_id(self) -> int:
        return derive_request_id(self.current_key)

    def snapshot(self) -> SessionState:
        return SessionState(self.phase, self.session_id, self.current_key, self.message_index,
                            self.previous_key)


class Outcome(str, enum.Enum):
    PROCESSED = "processed"
    REJECT_SESSION = "reject-session"
    REJECT_REQUEST = "reject-request"
    RETRANSMIT = "retransmit"
    DECODE_FAILURE = "decode-failure"


@dataclass(frozen=True)
class ReceiverVerdict:
    outcome: Outcome
    plaintext: bytes | None = None
    detail: str = ""

    def __post_init__(self):
        if (self.plaintext is not None) != (self.outcome is Outcome.PROCESSED):
            raise ParameterError("plaintext is present exactly when the outcome is processed")

    @property
    def processed(self) -> bool:
        return self.outcome is Outcome.PROCESSED


def open_session(default_key: int) -> tuple[SessionState, SessionState]:
    """Pre-authentication states for client and server sharing ``default_key``."""
    check_key(default_key)
    temp_id = derive_session_id(default_key)
    return (SessionState(Phase.PRE_AUTH, temp_id, default_key),
            SessionState(Phase.PRE_AUTH, temp_id, default_key))


def authenticate(state: SessionState, auth_key: int) -> SessionState:
    if state.phase is not Phase.PRE_AUTH:
        raise StateError(f"authenticate requires phase pre-auth, session is {state.phase.value}")
    check_key(auth_key)
    state.phase = Phase.AUTHENTICATED
    state.session_id = derive_session_id(auth_key)
    state.current_key = auth_key
    state.message_index = 0
    state.previous_key = None
    return state


def close_session(state: SessionState) -> SessionState:
    state.phase = Phase.CLOSED
    return state


def build_frame(state: SessionState, plaintext: bytes, next_key: int,
                mode: CipherMode = CipherMode.STREAM) -> tuple[Frame, np.ndarray]:
    """Frame for ``plaintext`` under the state's current key. Does not advance the state."""
    if state.phase is not Phase.AUTHENTICATED:
        raise StateError(f"cannot send in phase {state.phase.value}")
    if len(plaintext) > MAX_PAYLOAD:
        raise CapacityError(f"payload of {len(plaintext)} bytes exceeds the {MAX_PAYLOAD}-byte limit")
    check_key(next_key)
    header = FrameHeader(state.session_id, derive_request_id(state.current_key), next_key, len(plaintext))
    ciphertext = encrypt(plaintext, state.current_key, mode)
    frame = Frame(header, ciphertext, checksum(serialize_header(header) + ciphertext))
    return frame, frame.bits()


def send_message(state: SessionState, plaintext: bytes, cover: Raster,
                 params: StegoParams = StegoParams(), mode: CipherMode = CipherMode.STREAM,
                 key_mode: KeyMode | str = KeyMode.DETERMINISTIC,
                 entropy: int | None = None) -> Raster:
    """Sender pipeline: choose next key, build frame, embed with the current key.

    The state advances only after the stego image has been produced, so a
    capacity failure leaves the key chain untouched.
    """
    next_key = derive_next_key(state.current_key, key_mode, entropy)
    _, bits = build_frame(state, plaintext, next_key, mode)
    stego = embed(cover, state.current_key, bits, params)
    state.current_key = next_key
    state.message_index += 1
    return stego


def _is_replay(state: SessionState, stego: Raster, params: StegoParams) -> bool:
    if state.previous_key is None:
        return False
    old = parse_header(bits_to_bytes(extract(stego, state.previous_key, HEADER_BITS, params)))
    return old.session_id == state.session_id and old.request_id == derive_request_id(state.previous_key)


def receive_message(state: SessionState, stego: Raster, params: StegoParams = StegoParams(),
                    mode: CipherMode = CipherMode.STREAM,
                    trace: list[str] | None = None) -> ReceiverVerdict:
    """Receiver pipeline. Every failure is a verdict; only success mutates ``state``.

    Order: session id, request id, length sanity, CRC, decrypt. Stage names
    are appended to ``trace`` when given.

    A header that fails the session check under the current key is re-read
    under the previous key; if it is the last processed request, the image
    is a replay and is rejected on its stale request id.
    """
    def stage(name):
        if trace is not None:
            trace.append(name)

    key = state.current_key
    stage("header")
    try:
        header_bits = extract(stego, key, HEADER_BITS, params)
    except CapacityError as exc:
        return ReceiverVerdict(Outcome.DECODE_FAILURE, detail=str(exc))
    header = parse_header(bits_to_bytes(header_bits))

    stage("session")
    if state.phase is not Phase.AUTHENTICATED:
        return ReceiverVerdict(Outcome.REJECT_SESSION, detail=f"session is {state.phase.value}")
    if header.session_id != state.session_id:
        if _is_replay(state, stego, params):
            stage("request")
            return ReceiverVerdict(Outcome.REJECT_REQUEST,
                                   detail="stale request id of an already processed message")
        return ReceiverVerdict(Outcome.REJECT_SESSION,
                               detail=f"session id {header.session_id:08x} != {state.session_id:08x}")

    stage("request")
    expected = derive_request_id(key)
    if header.request_id != expected:
        return ReceiverVerdict(Outcome.REJECT_REQUEST,
                               detail=f"request id {header.request_id:08x} != {expected:08x}")

    stage("length")
    try:
        frame_bits = extract(stego, key, frame_bit_length(header.payload_len), params)
    except CapacityError as exc:
        return ReceiverVerdict(Outcome.DECODE_FAILURE, detail=f"payload_len {header.payload_len}: {exc}")
    frame = parse_frame(bits_to_bytes(frame_bits))

    stage("integrity")
    if not frame.is_intact():
        return ReceiverVerdict(Outcome.RETRANSMIT, detail="check value mismatch")

    stage("decrypt")
    plaintext = decrypt(frame.ciphertext, key, mode)
    state.previous_key = key
    state.current_key = frame.header.next_key
    state.message_index += 1
    log.debug("processed message %d of session %08x", state.message_index, state.session_id)
    return ReceiverVerdict(Outcome.PROCESSED, plaintext)
