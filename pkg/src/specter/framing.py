"""Payload framing: payload bits followed by their SHA-256 digest."""
from __future__ import annotations

import hashlib

import numpy as np

from .errors import EmptyPayload, IntegrityError, LengthError

DIGEST_BITS = 256


def frame_length(payload_len: int) -> int:
    return 8 * payload_len + DIGEST_BITS


def to_bits(data: bytes) -> np.ndarray:
    return np.unpackbits(np.frombuffer(data, dtype=np.uint8))


def from_bits(bits: np.ndarray) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def frame(payload: bytes) -> np.ndarray:
    """Return payload bits (MSB-first per byte) followed by the 256 digest bits."""
    if len(payload) == 0:
        raise EmptyPayload("payload must contain at least one byte")
    digest = hashlib.sha256(payload).digest()
    return to_bits(bytes(payload) + digest)


def split(bits: np.ndarray, payload_len: int) -> tuple[bytes, bytes]:
    """Cut a bit string into ``(payload, digest)`` without checking anything."""
    bits = np.asarray(bits, dtype=np.uint8)
    need = frame_length(payload_len)
    if bits.size < need:
        raise LengthError(f"need {need} bits, got {bits.size}")
    payload = from_bits(bits[: 8 * payload_len])
    digest = from_bits(bits[8 * payload_len : need])
    return payload, digest


def verify(bits: np.ndarray, payload_len: int) -> bytes:
    """Check the embedded digest and return the payload.

    Bits past the framed message are ignored.
    """
    if payload_len < 1:
        raise EmptyPayload("payload length must be >= 1")
    payload, digest = split(bits, payload_len)
    if hashlib.sha256(payload).digest() != digest:
        raise IntegrityError("SHA-256 mismatch: payload corrupted or wrong seed/length")
    return payload
