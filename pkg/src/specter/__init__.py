"""Spread-spectrum payload embedding in float tensor stores, with LDPC coding,
robustness attacks and detectability statistics."""

from .cdma import EmbedParams
from .errors import (
    CapacityError,
    EmptyPayload,
    FormatError,
    IntegrityError,
    LengthError,
    SignalNotFound,
    SpecterError,
)
from .pipeline import embed, extract, probe

__all__ = [
    "EmbedParams",
    "CapacityError",
    "EmptyPayload",
    "FormatError",
    "IntegrityError",
    "LengthError",
    "SignalNotFound",
    "SpecterError",
    "embed",
    "extract",
    "probe",
]

__version__ = "0.1.0"
