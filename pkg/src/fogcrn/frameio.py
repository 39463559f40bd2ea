"""Binary frame files.

Layout (all little-endian)::

    offset  size  field
    0       4     magic  b"CRFR"
    4       2     version (uint16, currently 1)
    6       4     channel_id (uint32)
    10      4     N (uint32)
    14      8     sample_rate (float64)
    22      16*N  interleaved (re, im) float64 pairs
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import WireFormatError
from .signalgen import SignalFrame

MAGIC = b"CRFR"
VERSION = 1
_HEADER = struct.Struct("<4sHIId")
HEADER_SIZE = _HEADER.size


def encode_frame(frame: SignalFrame) -> bytes:
    head = _HEADER.pack(MAGIC, VERSION, frame.channel_id, frame.n, frame.sample_rate)
    body = np.ascontiguousarray(frame.samples, dtype="<c16").tobytes()
    return head + body


def decode_frame(buf: bytes, sample_index_origin: int = 0) -> SignalFrame:
    if len(buf) < HEADER_SIZE:
        raise WireFormatError("truncated frame header")
    magic, version, channel_id, n, rate = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise WireFormatError(f"bad frame magic {magic!r}")
    if version != VERSION:
        raise WireFormatError(f"unsupported frame version {version}")
    if n < 1:
        raise WireFormatError("frame declares zero samples")
    body = buf[HEADER_SIZE:]
    if len(body) != 16 * n:
        raise WireFormatError(f"expected {16 * n} payload bytes, got {len(body)}")
    samples = np.frombuffer(body, dtype="<c16").astype(np.complex128)
    try:
        return SignalFrame(samples, sample_index_origin, channel_id, rate)
    except ValueError as exc:
        raise WireFormatError(str(exc)) from exc


def write_frame(path, frame: SignalFrame) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_frame(frame))


def read_frame(path) -> SignalFrame:
    with open(path, "rb") as fh:
        return decode_frame(fh.read())
