"""In-memory client/server exchange with fault injection.

Scenario script (one directive per line, ``#`` starts a comment)::

    default-key 00000000
    auth-key 00000001
    send PAY 100
    send BALANCE
    expect 2 retransmit processed

``send`` takes the rest of the line as the UTF-8 plaintext. ``expect N v1 v2``
lists the verdicts message N must see, in delivery order; messages without
an ``expect`` line must see exactly ``processed``.

Fault plan (one fault per line, at most one per message)::

    2 flip-bit frame 130        # invert frame bit 130 of message 2 in the image
    2 flip-bit slot 4711 0      # invert bit 0 of raw slot 4711
    3 replay-previous           # re-deliver message 2's image before message 3
    4 drop                      # lose the first delivery of message 4
    5 forge 12345678            # attacker frame under key 0x12345678 before message 5

Retransmit and drop are answered by resending the same stego image.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .formula_engine import KeyMode, check_key
from .image_io import Raster
from .payload_crypto import CipherMode
from .protocol import (Outcome, Phase, ReceiverVerdict, SessionState, authenticate,
                       frame_bit_length, open_session, receive_message, send_message)
from .stego_codec import StegoParams, plan_for

FAULT_KINDS = ("flip-bit", "replay-previous", "drop", "forge")
VERDICTS = tuple(o.value for o in Outcome) + ("dropped",)


@dataclass(frozen=True)
class FaultAction:
    kind: str
    target: int
    slot: int | None = None
    bit: int | None = None
    frame_bit: int | None = None
    key: int | None = None


@dataclass
class Script:
    messages: list[bytes] = field(default_factory=list)
    default_key: int = 0x00000000
    auth_key: int = 0x00000001
    expectations: dict[int, tuple[str, ...]] = field(default_factory=dict)

    def expected(self, ordinal: int) -> tuple[str, ...]:
        return self.expectations.get(ordinal, (Outcome.PROCESSED.value,))


@dataclass(frozen=True)
class SimConfig:
    width: int = 128
    height: int = 128
    channels: int = 3
    cover_seed: int = 0
    params: StegoParams = StegoParams()
    mode: CipherMode = CipherMode.STREAM
    random_keys: bool = False
    key_seed: int = 0
    max_retransmits: int = 3

    @property
    def total_slots(self) -> int:
        return self.width * self.height * self.channels


def make_cover(config: SimConfig, ordinal: int) -> Raster:
    rng = np.random.default_rng((config.cover_seed, ordinal))
    pixels = rng.integers(0, 256, size=config.total_slots, dtype=np.uint8)
    return Raster(config.width, config.height, config.channels, pixels)


@dataclass(frozen=True)
class Event:
    ordinal: int
    direction: str
    kind: str
    verdict: str
    session_id: int
    client_key: int
    server_key: int
    server_index: int
    plaintext: bytes | None = None

    def line(self) -> str:
        text = (f"{self.ordinal:03d} {self.direction} {self.kind} {self.verdict} "
                f"session={self.session_id:08x} client_key={self.client_key:08x} "
                f"server_key={self.server_key:08x} server_index={self.server_index}")
        if self.plaintext is not None:
            text += f" plaintext={self.plaintext.hex()}"
        return text


@dataclass
class Transcript:
    events: list[Event]
    script: Script

    def verdicts(self, ordinal: int) -> tuple[str, ...]:
        return tuple(e.verdict for e in self.events if e.ordinal == ordinal and e.direction == "c2s")

    def unexpected(self) -> list[int]:
        return [n for n in range(1, len(self.script.messages) + 1)
                if self.verdicts(n) != self.script.expected(n)]

    @property
    def ok(self) -> bool:
        return not self.unexpected()

    def to_text(self) -> str:
        return "".join(e.line() + "\n" for e in self.events)


class Channel:
    """FIFO client-to-server image queue and server-to-client verdict queue."""

    def __init__(self, client: SessionState, server: SessionState, config: SimConfig = SimConfig()):
        self.client = client
        self.server = server
        self.config = config
        self.to_server: deque[tuple[int, str, Raster]] = deque()
        self.to_client: deque[tuple[int, ReceiverVerdict]] = deque()
        self.events: list[Event] = []

    def record(self, ordinal: int, kind: str, verdict: str, plaintext: bytes | None = None,
               direction: str = "c2s") -> None:
        self.events.append(Event(ordinal, direction, kind, verdict, self.server.session_id,
                                 self.client.current_key, self.server.current_key,
                                 self.server.message_index, plaintext))

    def push(self, ordinal: int, kind: str, stego: Raster) -> None:
        self.to_server.append((ordinal, kind, stego))

    def deliver(self) -> ReceiverVerdict:
        ordinal, kind, stego = self.to_server.popleft()
        verdict = receive_message(self.server, stego, self.config.params, self.config.mode)
        self.to_client.append((ordinal, verdict))
        self.record(ordinal, kind, verdict.outcome.value, verdict.plaintext)
        return verdict

    def drop(self) -> None:
        ordinal, kind, _ = self.to_server.popleft()
        self.record(ordinal, kind, "dropped")


def inject_forgery(channel: Channel, forged_key: int, plaintext: bytes, ordinal: int = 0,
                   cover: Raster | None = None) -> ReceiverVerdict:
    """Deliver a frame built by an attacker holding ``forged_key``.

    The attacker is granted the server's session id, so only the key chain
    stands between it and a processed verdict.
    """
    check_key(forged_key)
    attacker = SessionState(Phase.AUTHENTICATED, channel.server.session_id, forged_key)
    if cover is None:
        cover = make_cover(channel.config, ordinal)
    stego = send_message(attacker, plaintext, cover, channel.config.params, channel.config.mode)
    channel.push(ordinal, "forge", stego)
    return channel.deliver()


def _flip(stego: Raster, slot: int, bit: int) -> Raster:
    pixels = stego.pixels.copy()
    pixels[slot] ^= np.uint8(1 << bit)
    return stego.replace_pixels(pixels)


def validate(script: Script, faults: list[FaultAction], config: SimConfig) -> None:
    if not script.messages:
        raise ConfigurationError("script sends no messages")
    n = len(script.messages)
    for ordinal, verdicts in script.expectations.items():
        if not 1 <= ordinal <= n:
            raise ConfigurationError(f"expect refers to message {ordinal}, script has {n}")
        for v in verdicts:
            if v not in VERDICTS:
                raise ConfigurationError(f"unknown verdict {v!r}")
    seen = set()
    for f in faults:
        if f.kind not in FAULT_KINDS:
            raise ConfigurationError(f"unknown fault kind {f.kind!r}")
        if not 1 <= f.target <= n:
            raise ConfigurationError(f"fault targets message {f.target}, script has {n}")
        if f.target in seen:
            raise ConfigurationError(f"more than one fault targets message {f.target}")
        seen.add(f.target)
        if f.kind == "replay-previous" and f.target < 2:
            raise ConfigurationError("replay-previous needs an earlier message")
        if f.kind == "forge" and (f.key is None or not 0 <= f.key <= 0xFFFFFFFF):
            raise ConfigurationError("forge needs a 32-bit key guess")
        if f.kind == "flip-bit":
            if f.frame_bit is not None:
                limit = frame_bit_length(len(script.messages[f.target - 1]))
                if not 0 <= f.frame_bit < limit:
                    raise ConfigurationError(f"frame bit {f.frame_bit} outside a {limit}-bit frame")
            elif f.slot is None or f.bit is None:
                raise ConfigurationError("flip-bit needs 'frame I' or 'slot S B'")
            elif not (0 <= f.slot < config.total_slots and 0 <= f.bit < 8):
                raise ConfigurationError(f"flip-bit slot {f.slot} bit {f.bit} outside the raster")


def run_scenario(script: Script, faults: list[FaultAction] = (), config: SimConfig = SimConfig()) -> Transcript:
    faults = list(faults)
    validate(script, faults, config)
    by_target = {f.target: f for f in faults}
    entropy_rng = random.Random(config.key_seed)
    key_mode = KeyMode.RANDOM if config.random_keys else KeyMode.DETERMINISTIC

    client, server = open_session(script.default_key)
    channel = Channel(client, server, config)
    channel.record(0, "setup", "open")
    authenticate(client, script.auth_key)
    authenticate(server, script.auth_key)
    channel.record(0, "setup", "authenticate")

    previous: Raster | None = None
    for ordinal, plaintext in enumerate(script.messages, 1):
        cover = make_cover(config, ordinal)
        key_before = client.current_key
        entropy = entropy_rng.getrandbits(32) if config.random_keys else None
        stego = send_message(client, plaintext, cover, config.params, config.mode, key_mode, entropy)
        fault = by_target.get(ordinal)

        if fault is not None and fault.kind == "replay-previous":
            channel.push(ordinal, "replay", previous)
            channel.deliver()
        elif fault is not None and fault.kind == "forge":
            inject_forgery(channel, fault.key, plaintext, ordinal, cover)

        first = stego
        if fault is not None and fault.kind == "flip-bit":
            if fault.frame_bit is not None:
                plan = plan_for(cover, key_before, frame_bit_length(len(plaintext)), config.params)
                first = _flip(stego, plan.data_slots[fault.frame_bit], plan.bit_positions[fault.frame_bit])
            else:
                first = _flip(stego, fault.slot, fault.bit)
        channel.push(ordinal, "genuine", first)
        if fault is not None and fault.kind == "drop":
            channel.drop()
            outcome = "dropped"
        else:
            outcome = channel.deliver().outcome.value

        resends = 0
        while outcome in (Outcome.RETRANSMIT.value, "dropped") and resends < config.max_retransmits:
            resends += 1
            channel.push(ordinal, "resend", stego)
            outcome = channel.deliver().outcome.value
        previous = stego
    return Transcript(channel.events, script)


# -- text formats -------------------------------------------------------------

def _hex_key(token: str, lineno: int) -> int:
    try:
        return int(token, 16)
    except ValueError:
        raise ConfigurationError(f"line {lineno}: bad hex key {token!r}") from None


def parse_script(text: str) -> Script:
    script = Script()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        word, _, rest = line.partition(" ")
        if word == "send":
            script.messages.append(rest.encode("utf-8"))
        elif word in ("default-key", "auth-key"):
            key = _hex_key(rest.strip(), lineno)
            if not 0 <= key <= 0xFFFFFFFF:
                raise ConfigurationError(f"line {lineno}: key exceeds 32 bits")
            setattr(script, word.replace("-", "_"), key)
        elif word == "expect":
            parts = rest.split()
            if len(parts) < 2 or not parts[0].isdigit():
                raise ConfigurationError(f"line {lineno}: expected 'expect N verdict...'")
            script.expectations[int(parts[0])] = tuple(parts[1:])
        else:
            raise ConfigurationError(f"line {lineno}: unknown directive {word!r}")
    return script


def parse_faults(text: str) -> list[FaultAction]:
    faults = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            target = int(parts[0])
            kind = parts[1]
        except (ValueError, IndexError):
            raise ConfigurationError(f"line {lineno}: expected 'N kind ...'") from None
        args = parts[2:]
        try:
            if kind == "flip-bit" and args[:1] == ["frame"] and len(args) == 2:
                faults.append(FaultAction(kind, target, frame_bit=int(args[1])))
            elif kind == "flip-bit" and args[:1] == ["slot"] and len(args) == 3:
                faults.append(FaultAction(kind, target, slot=int(args[1]), bit=int(args[2])))
            elif kind in ("replay-previous", "drop") and not args:
                faults.append(FaultAction(kind, target))
            elif kind == "forge" and len(args) == 1:
                faults.append(FaultAction(kind, target, key=_hex_key(args[0], lineno)))
            else:
                raise ConfigurationError(f"line {lineno}: malformed fault {line!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"line {lineno}: malformed fault {line!r}") from None
    return faults


def load_script(path: str | Path) -> Script:
    return parse_script(Path(path).read_text(encoding="utf-8"))


def load_faults(path: str | Path) -> list[FaultAction]:
    return parse_faults(Path(path).read_text(encoding="utf-8"))
