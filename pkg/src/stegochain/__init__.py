"""Keyed steganographic messaging over lossless images."""

from .errors import (CapacityError, ConfigurationError, DecodeError, FormatError, ParameterError,
                     StateError, StegoError)
from .formula_engine import (Domain, EmbeddingPlan, KeyMode, derive_next_key, derive_request_id,
                             derive_session_id, expand_key, make_plan, mix64, pixel_sequence)
from .image_io import Raster, load_raster, save_raster
from .payload_crypto import CipherMode, checksum, decrypt, encrypt
from .protocol import (Frame, FrameHeader, Outcome, Phase, ReceiverVerdict, SessionState,
                       authenticate, build_frame, open_session, receive_message, send_message)
from .stego_codec import StegoParams, capacity_chars, embed, extract
from .transport_sim import Channel, FaultAction, Script, SimConfig, inject_forgery, run_scenario

__version__ = "0.1.0"
