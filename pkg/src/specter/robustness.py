"""Perturbations applied to an embedded host, and the survival report.

Every transform takes a flat float64 vector and returns a new one.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cdma, pipeline
from .cdma import PREAMBLE_LEN, EmbedParams
from .errors import IntegrityError, LengthError, SignalNotFound
from .keystream import CHIP_DOMAIN, NOISE_BASE, PRUNE_BASE, ChipStream

OK = "ok"
INTEGRITY_ERROR = "integrity_error"
SIGNAL_NOT_FOUND = "signal_not_found"


@dataclass
class AttackReport:
    attack: str
    params: dict = field(default_factory=dict)
    pre_snr_db: float | None = None
    post_snr_db: float | None = None
    outcome: str = SIGNAL_NOT_FOUND
    raw_bit_errors: int | None = None
    n_bits: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _prune_count(n: int, ratio: float) -> int:
    if not 0 <= ratio < 1:
        raise ValueError("ratio must be in [0, 1)")
    return math.floor(ratio * n)


def prune_magnitude(values: np.ndarray, ratio: float) -> np.ndarray:
    """Zero the ``floor(ratio * L)`` smallest-magnitude weights (lower index first on ties)."""
    values = np.asarray(values, dtype=np.float64)
    r = _prune_count(values.size, ratio)
    out = values.copy()
    if r:
        order = np.argsort(np.abs(values), kind="stable")
        out[order[:r]] = 0.0
    return out


def prune_random(values: np.ndarray, ratio: float, seed: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    r = _prune_count(values.size, ratio)
    out = values.copy()
    if r:
        perm = ChipStream(seed, CHIP_DOMAIN).permutation(PRUNE_BASE, values.size)
        out[perm[:r]] = 0.0
    return out


def shuffle(values: np.ndarray, seed: int) -> np.ndarray:
    """Permute all weights; stands in for architectural pruning, which breaks ordering."""
    values = np.asarray(values, dtype=np.float64)
    perm = ChipStream(seed, CHIP_DOMAIN).permutation(PRUNE_BASE, values.size)
    return values[perm]


def add_noise(values: np.ndarray, std: float, seed: int) -> np.ndarray:
    if std < 0:
        raise ValueError("std must be non-negative")
    values = np.asarray(values, dtype=np.float64)
    if std == 0:
        return values.copy()
    return values + std * ChipStream(seed, CHIP_DOMAIN).normal(NOISE_BASE, values.size)


def quantize_roundtrip(values: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return np.asarray(values, dtype=np.float64).astype(np.float16).astype(np.float64)


def fedavg_round(global_w: np.ndarray, updates, alpha: float = 1.0) -> np.ndarray:
    """``W + alpha/n' * sum(updates)``."""
    updates = list(updates)
    if not updates:
        raise LengthError("need at least one update")
    total = np.zeros_like(np.asarray(global_w, dtype=np.float64))
    for u in updates:
        u = np.asarray(u, dtype=np.float64)
        if u.shape != total.shape:
            raise LengthError(f"update has {u.size} values, global has {total.size}")
        total += u
    return global_w + (alpha / len(updates)) * total


def snr_or_none(values: np.ndarray, params: EmbedParams) -> float | None:
    try:
        return pipeline.probe_values(values, params).snr_db
    except SignalNotFound:
        return None


def raw_bit_errors(values: np.ndarray, payload: bytes, params: EmbedParams) -> int:
    """Hard-decision errors in the codeword region, before LDPC decoding."""
    truth = pipeline.encode_payload(payload, params)
    n_transmit = PREAMBLE_LEN + truth.size
    layout = cdma.plan(values.size, n_transmit, params)
    y = cdma.despread(values, params, layout, n_transmit)
    # sign of the preamble correlation fixes the polarity, as the estimator would
    gain = float(np.mean(y[:PREAMBLE_LEN] * cdma.preamble(params.seed)))
    hard = (y[PREAMBLE_LEN:] * (1.0 if gain >= 0 else -1.0) > 0).astype(np.uint8)
    return int(np.count_nonzero(hard != truth))


def outcome_of(values: np.ndarray, payload: bytes, params: EmbedParams) -> str:
    try:
        got = pipeline.extract_values(values, len(payload), params).payload
    except SignalNotFound:
        return SIGNAL_NOT_FOUND
    except IntegrityError:
        return INTEGRITY_ERROR
    # a verified digest over different bytes would mean a SHA-256 collision
    assert got == payload
    return OK


def assess(
    attack: str, attack_params: dict, before: np.ndarray, after: np.ndarray,
    payload: bytes, params: EmbedParams,
) -> AttackReport:
    return AttackReport(
        attack=attack,
        params=attack_params,
        pre_snr_db=snr_or_none(before, params),
        post_snr_db=snr_or_none(after, params),
        outcome=outcome_of(after, payload, params),
        raw_bit_errors=raw_bit_errors(after, payload, params),
        n_bits=pipeline.codeword_bits(len(payload), params),
    )


def fedavg_survival(
    n_participants: int,
    rounds: int,
    boost: float,
    benign_update_std: float,
    params: EmbedParams,
    host: np.ndarray,
    payload: bytes,
    alpha: float = 1.0,
    noise_seed: int = 1,
) -> AttackReport:
    """Simulate ``rounds`` of federated averaging with one adversarial participant.

    In the first round participant 0 submits its benign update plus
    ``boost`` times the pure spread-spectrum signal; every other update is
    Gaussian noise. The payload is extracted from the final global model.
    """
    if boost <= 0:
        raise ValueError("boost must be positive")
    if n_participants < 1 or rounds < 1:
        raise ValueError("need at least one participant and one round")
    host = np.asarray(host, dtype=np.float64)
    signal, _ = pipeline.embed_values(np.zeros_like(host), payload, params)
    stream = ChipStream(noise_seed, CHIP_DOMAIN)

    global_w = host
    for r in range(rounds):
        # summing in place keeps memory at two host-sized buffers
        total = np.zeros_like(host)
        for p in range(n_participants):
            start = NOISE_BASE + (r * n_participants + p) * 2 * host.size
            total += benign_update_std * stream.normal(start, host.size)
            if r == 0 and p == 0:
                total += boost * signal
        # one pre-summed update scaled by alpha/n' is the same average
        global_w = fedavg_round(global_w, [total], alpha / n_participants)

    report = assess(
        "fedavg",
        {
            "participants": n_participants,
            "rounds": rounds,
            "boost": boost,
            "update_std": benign_update_std,
            "alpha": alpha,
        },
        host + signal,
        global_w,
        payload,
        params,
    )
    return report
