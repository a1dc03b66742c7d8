"""Command-line front end: embed, extract, inspect, diff, simulate."""

from __future__ import annotations

import argparse
import logging
import os
import re
import secrets
import sys
from fractions import Fraction
from importlib import resources

from .errors import CapacityError, ConfigurationError, DecodeError, FormatError, StegoError
from .formula_engine import KeyMode, derive_next_key, derive_session_id
from .image_io import load_raster, save_raster
from .payload_crypto import CipherMode, decrypt
from .protocol import (FRAME_OVERHEAD_BITS, Outcome, Phase, SessionState, build_frame, parse_frame,
                       receive_message)
from .stego_codec import StegoParams, bits_to_bytes, capacity_chars, diff, embed, extract
from .transport_sim import SimConfig, parse_faults, parse_script, run_scenario

log = logging.getLogger("stegochain")

_KEY_RE = re.compile(r"[0-9a-fA-F]{8}")
_FRAC_RE = re.compile(r"1/([0-9]+)")


def parse_key(text: str) -> int:
    if not _KEY_RE.fullmatch(text):
        raise argparse.ArgumentTypeError(f"key must be exactly 8 hex digits, got {text!r}")
    return int(text, 16)


def parse_fraction(text: str) -> Fraction:
    m = _FRAC_RE.fullmatch(text)
    if not m or int(m.group(1)) < 1:
        raise argparse.ArgumentTypeError(f"usage must look like 1/N with N >= 1, got {text!r}")
    return Fraction(1, int(m.group(1)))


def parse_mode(text: str) -> CipherMode:
    try:
        return CipherMode.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError("mode must be 'inversion' or 'stream'") from None


def _params(args) -> StegoParams:
    return StegoParams(args.usage, args.bit_planes)


def _session_for(key: int) -> SessionState:
    # Standalone CLI messages act as a one-message authenticated session keyed by --key.
    return SessionState(Phase.AUTHENTICATED, derive_session_id(key), key)


def _read_payload(value: str) -> bytes:
    if os.path.isfile(value):
        with open(value, "rb") as fh:
            return fh.read()
    return value.encode("utf-8")


def cmd_embed(args) -> int:
    params = _params(args)
    cover = load_raster(args.cover)
    payload = _read_payload(args.payload)
    usable = params.usable_slots(cover.total_slots)
    if usable < FRAME_OVERHEAD_BITS:
        raise CapacityError(f"cover offers {usable} usable slots, the frame header and "
                            f"check alone need {FRAME_OVERHEAD_BITS}")
    limit = capacity_chars(usable, FRAME_OVERHEAD_BITS)
    if len(payload) > limit:
        raise CapacityError(f"payload is {len(payload)} bytes but {usable} usable slots "
                            f"minus {FRAME_OVERHEAD_BITS} header bits hold only {limit} characters")
    state = _session_for(args.key)
    if args.random_keys:
        next_key = derive_next_key(args.key, KeyMode.RANDOM, secrets.randbits(32))
    else:
        next_key = derive_next_key(args.key)
    _, bits = build_frame(state, payload, next_key, args.mode)
    stego = embed(cover, args.key, bits, params)
    save_raster(stego, args.out)
    print(f"frame bits: {len(bits)}")
    print(f"slots used: {len(bits)} data + {len(bits)} decoy of {cover.total_slots}")
    print(f"next key: {next_key:08x}")
    return 0


def cmd_extract(args) -> int:
    params = _params(args)
    stego = load_raster(args.stego)
    if args.frame_bits is not None:
        bits = extract(stego, args.key, args.frame_bits, params)
        try:
            frame = parse_frame(bits_to_bytes(bits))
        except ValueError as exc:
            print(f"error: decode: {exc}", file=sys.stderr)
            return 1
        if not frame.is_intact():
            print("error: integrity: check value mismatch, retransmission required", file=sys.stderr)
            return 1
        plaintext = decrypt(frame.ciphertext, args.key, args.mode)
        next_key = frame.header.next_key
    else:
        state = _session_for(args.key)
        verdict = receive_message(state, stego, params, args.mode)
        if verdict.outcome is not Outcome.PROCESSED:
            stage = {
                Outcome.REJECT_SESSION: "session",
                Outcome.REJECT_REQUEST: "request",
                Outcome.RETRANSMIT: "integrity",
                Outcome.DECODE_FAILURE: "capacity",
            }[verdict.outcome]
            print(f"error: {stage}: {verdict.outcome.value} ({verdict.detail})", file=sys.stderr)
            return 1
        plaintext = verdict.plaintext
        next_key = state.current_key
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(plaintext)
    else:
        sys.stdout.buffer.write(plaintext + b"\n")
        sys.stdout.flush()
    print(f"next key: {next_key:08x}", file=sys.stderr)
    return 0


def cmd_inspect(args) -> int:
    total = None
    if args.image:
        raster = load_raster(args.image)
        total = raster.total_slots
        print(f"image: {raster.width}x{raster.height}x{raster.channels}")
        print(f"total slots: {total}")
    elif args.used_slots is None:
        raise ConfigurationError("inspect needs an image or --used-slots")
    used = args.used_slots if args.used_slots is not None else StegoParams(args.usage).usable_slots(total)
    print(f"used slots: {used}" + ("" if args.used_slots is not None else f" (usage {args.usage})"))
    print(f"header bits: {args.header_bits}")
    print(f"capacity chars: {capacity_chars(used, args.header_bits)}")
    return 0


def cmd_diff(args) -> int:
    report = diff(load_raster(args.cover), load_raster(args.stego))
    print(f"differing bytes: {report.changed_bytes}")
    for bit, n in enumerate(report.bit_histogram):
        print(f"bit {bit}: {n}")
    if args.bit_planes is not None and report.highest_changed_bit >= args.bit_planes:
        print(f"changes reach bit {report.highest_changed_bit}, above bit_planes {args.bit_planes}")
        return 1
    return 0


def _open_text(source: str) -> str:
    if source.startswith("bundled:"):
        name = source.split(":", 1)[1]
        try:
            return resources.files("stegochain.scenarios").joinpath(name + ".txt").read_text("utf-8")
        except FileNotFoundError:
            raise ConfigurationError(f"no bundled scenario named {name!r}") from None
    with open(source, encoding="utf-8") as fh:
        return fh.read()


def cmd_simulate(args) -> int:
    script = parse_script(_open_text(args.script))
    faults = parse_faults(_open_text(args.faults)) if args.faults else []
    config = SimConfig(cover_seed=args.seed, key_seed=args.seed, random_keys=args.random_keys,
                       params=_params(args), mode=args.mode)
    transcript = run_scenario(script, faults, config)
    sys.stdout.write(transcript.to_text())
    bad = transcript.unexpected()
    if bad:
        for n in bad:
            print(f"unexpected: message {n} saw {' '.join(transcript.verdicts(n))}, "
                  f"expected {' '.join(script.expected(n))}")
        return 1
    print("result: ok")
    return 0


def _add_stego_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--bit-planes", type=int, default=3)
    p.add_argument("--usage", type=parse_fraction, default=Fraction(1, 100))
    p.add_argument("--mode", type=parse_mode, default=CipherMode.STREAM)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stegochain", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed", help="hide a payload frame in a PNG cover")
    p.add_argument("--cover", required=True)
    p.add_argument("--key", type=parse_key, required=True)
    p.add_argument("--payload", required=True, help="file path, or literal text if no such file")
    p.add_argument("--out", required=True)
    p.add_argument("--random-keys", action="store_true", help="draw the next key from system entropy")
    _add_stego_flags(p)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("extract", help="recover the payload from a stego PNG")
    p.add_argument("--stego", required=True)
    p.add_argument("--key", type=parse_key, required=True)
    p.add_argument("--out")
    p.add_argument("--frame-bits", type=int, help="skip the header-first read and take this many bits")
    _add_stego_flags(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("inspect", help="report slot counts and character capacity")
    p.add_argument("image", nargs="?")
    p.add_argument("--usage", type=parse_fraction, default=Fraction(1, 100))
    p.add_argument("--header-bits", type=int, default=FRAME_OVERHEAD_BITS)
    p.add_argument("--used-slots", type=int)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("diff", help="compare a cover with its stego image")
    p.add_argument("--cover", required=True)
    p.add_argument("--stego", required=True)
    p.add_argument("--bit-planes", type=int)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("simulate", help="run a client/server scenario with fault injection")
    p.add_argument("--script", required=True, help="script path or bundled:NAME")
    p.add_argument("--faults", help="fault plan path or bundled:NAME")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--random-keys", action="store_true")
    _add_stego_flags(p)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"error: format: {exc}", file=sys.stderr)
    except DecodeError as exc:
        print(f"error: decode: {exc}", file=sys.stderr)
    except CapacityError as exc:
        print(f"error: capacity: {exc}", file=sys.stderr)
    except StegoError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
