"""End-to-end embedding and extraction.

Embedding: frame -> LDPC-encode in k-bit chunks -> prepend the preamble ->
map bits to +/-1 -> spread into the host. Extraction runs the same steps
backwards, estimating gain and noise from the preamble.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cdma, framing, ldpc
from .cdma import PREAMBLE_LEN, ChannelEstimate, EmbedParams
from .detect import distribution_report
from .errors import IntegrityError
from .keystream import CHIP_DOMAIN, HOST_BASE, ChipStream
from .tensorstore import F32, Tensor, TensorStore, gather, scatter

log = logging.getLogger(__name__)

MAX_ITER = 50


@dataclass
class EmbedRecord:
    params: dict
    payload_len: int
    codeword_bits: int
    blocks_used: int
    weights_touched: int
    snr_db_predicted: float | None = None
    pre: dict = field(default_factory=dict)
    post: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Extraction:
    payload: bytes
    estimate: ChannelEstimate
    blocks_converged: int
    n_blocks: int
    verified: bool


def n_ldpc_blocks(payload_len: int, params: EmbedParams) -> int:
    k = params.n_ldpc // 2
    return -(-framing.frame_length(payload_len) // k)


def codeword_bits(payload_len: int, params: EmbedParams) -> int:
    return n_ldpc_blocks(payload_len, params) * params.n_ldpc


def encode_payload(payload: bytes, params: EmbedParams) -> np.ndarray:
    """Framed payload as concatenated LDPC codewords (zero-padded last chunk)."""
    bits = framing.frame(payload)
    code = ldpc.build(params.seed, params.n_ldpc)
    n_blocks = n_ldpc_blocks(len(payload), params)
    msgs = np.zeros(n_blocks * code.k, dtype=np.uint8)
    msgs[: bits.size] = bits
    return ldpc.encode(code, msgs.reshape(n_blocks, code.k)).ravel()


def transmit_symbols(payload: bytes, params: EmbedParams) -> np.ndarray:
    codeword = encode_payload(payload, params)
    return np.concatenate([cdma.preamble(params.seed), 2.0 * codeword - 1.0])


def embed_values(values: np.ndarray, payload: bytes, params: EmbedParams):
    """Embed into a flat float64 vector; returns ``(new_values, EmbedRecord)``."""
    transmit = transmit_symbols(payload, params)
    layout = cdma.plan(values.size, transmit.size, params)
    out = cdma.inject(values, transmit, params, layout)
    touched = slice(0, layout.weights_touched)
    record = EmbedRecord(
        params=asdict(params),
        payload_len=len(payload),
        codeword_bits=transmit.size - PREAMBLE_LEN,
        blocks_used=layout.blocks_used,
        weights_touched=layout.weights_touched,
        pre=distribution_report(values[touched]),
        post=distribution_report(out[touched]),
    )
    host_std = float(np.std(values[touched]))
    if host_std > 0:
        record.snr_db_predicted = cdma.predicted_snr_db(host_std, params.gamma, params.s, params.d)
    log.info(
        "embedded %d bytes: %d blocks, %d weights touched",
        len(payload), layout.blocks_used, layout.weights_touched,
    )
    return out, record


def extract_values(
    values: np.ndarray, payload_len: int, params: EmbedParams, force: bool = False,
    max_iter: int = MAX_ITER,
) -> Extraction:
    """Recover a payload of known length from a flat vector.

    Raises ``SignalNotFound`` when the preamble is absent and ``IntegrityError``
    when the digest does not match, unless ``force`` is set, in which case
    the best-effort bytes are returned with ``verified=False``.
    """
    n_blocks = n_ldpc_blocks(payload_len, params)
    n_transmit = PREAMBLE_LEN + n_blocks * params.n_ldpc
    layout = cdma.plan(values.size, n_transmit, params)
    y = cdma.despread(values, params, layout, n_transmit)
    est = cdma.estimate(y, params.seed)

    code = ldpc.build(params.seed, params.n_ldpc)
    soft = est.soft_data.reshape(n_blocks, params.n_ldpc)
    bits, converged, _ = ldpc.decode_batch(code, soft, est.sigma, max_iter)
    message = code.message(bits).ravel()
    log.info(
        "gain %.4g sigma %.4g snr %.2f dB, %d/%d LDPC blocks converged",
        est.gain, est.sigma, est.snr_db, converged.sum(), n_blocks,
    )
    try:
        payload = framing.verify(message, payload_len)
        verified = True
    except IntegrityError:
        if not force:
            raise
        payload, _ = framing.split(message, payload_len)
        verified = False
    return Extraction(payload, est, int(converged.sum()), n_blocks, verified)


def probe_values(values: np.ndarray, params: EmbedParams) -> ChannelEstimate:
    """Channel estimate from the preamble alone (no payload length needed)."""
    layout = cdma.plan(values.size, PREAMBLE_LEN, params)
    y = cdma.despread(values, params, layout, PREAMBLE_LEN)
    return cdma.estimate(y, params.seed)


def embed(store: TensorStore, payload: bytes, params: EmbedParams, include: str | None = None):
    view = gather(store, include)
    values, record = embed_values(view.values, payload, params)
    return scatter(store, view.with_values(values)), record


def extract(
    store: TensorStore, payload_len: int, params: EmbedParams,
    include: str | None = None, force: bool = False,
) -> bytes:
    return extract_values(gather(store, include).values, payload_len, params, force).payload


def probe(store: TensorStore, params: EmbedParams, include: str | None = None) -> dict:
    est = probe_values(gather(store, include).values, params)
    return {"gain": est.gain, "sigma": est.sigma, "snr_db": est.snr_db}


def synthetic_values(length: int, std: float, seed: int) -> np.ndarray:
    return std * ChipStream(seed, CHIP_DOMAIN).normal(HOST_BASE, length)


def gen_host(length: int, std: float, seed: int, dtype: int = F32) -> TensorStore:
    """Gaussian host with a single tensor ``w``."""
    values = synthetic_values(length, std, seed)
    return TensorStore([Tensor("w", dtype, (length,), values)])


def keystream_payload(n: int = 1024, seed: int = 42) -> bytes:
    return ChipStream(seed, CHIP_DOMAIN).take_bytes(n)
