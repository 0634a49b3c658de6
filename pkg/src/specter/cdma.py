"""Spread-spectrum injection and despreading over a flat weight vector.

Transmitted element ``k`` lives in block ``k // d`` and is spread with chips
``[PREAMBLE_LEN + k*s, PREAMBLE_LEN + (k+1)*s)`` of the chip stream; chips
``0 .. PREAMBLE_LEN-1`` are the preamble symbols themselves.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, LengthError, SignalNotFound
from .keystream import CHIP_DOMAIN, ChipStream

PREAMBLE_LEN = 200
GAMMA_RANGE = (1e-5, 9e-3)
SIGMA_FLOOR = 1e-6
# A preamble correlation below this many standard errors is treated as no
# signal; the t-statistic of the gain equals sqrt(PREAMBLE_LEN) / sigma.
DETECTION_Z = 4.0

_CHUNK_CHIPS = 1 << 22


@dataclass(frozen=True)
class EmbedParams:
    seed: int
    gamma: float = 2e-3
    sf: int = 6
    d: int = 100
    n_ldpc: int = 2048
    unsafe_gamma: bool = False

    def __post_init__(self):
        lo, hi = GAMMA_RANGE
        if not self.unsafe_gamma and not lo <= self.gamma <= hi:
            raise ValueError(f"gamma {self.gamma} outside [{lo}, {hi}] (use unsafe_gamma)")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.sf < 2:
            raise ValueError("spreading factor must be >= 2")
        if self.d < 1:
            raise ValueError("bits per block must be >= 1")

    @property
    def s(self) -> int:
        return self.sf * self.d


@dataclass(frozen=True)
class Layout:
    host_len: int
    d: int
    sf: int
    n_transmit: int

    @property
    def s(self) -> int:
        return self.sf * self.d

    @property
    def n_blocks(self) -> int:
        return self.host_len // self.s

    @property
    def capacity_bits(self) -> int:
        return self.n_blocks * self.d

    @property
    def blocks_used(self) -> int:
        return -(-self.n_transmit // self.d)

    @property
    def weights_touched(self) -> int:
        return self.blocks_used * self.s

    def chip_start(self, k: int) -> int:
        return PREAMBLE_LEN + k * self.s


@dataclass(frozen=True)
class ChannelEstimate:
    gain: float
    sigma: float
    snr_db: float
    soft_preamble: np.ndarray
    soft_data: np.ndarray


def plan(host_len: int, n_transmit: int, params: EmbedParams) -> Layout:
    layout = Layout(host_len=host_len, d=params.d, sf=params.sf, n_transmit=n_transmit)
    if host_len < layout.s:
        raise CapacityError(0, n_transmit)
    if n_transmit > layout.capacity_bits:
        raise CapacityError(layout.capacity_bits, n_transmit)
    return layout


def preamble(seed: int) -> np.ndarray:
    return ChipStream(seed, CHIP_DOMAIN).chips(0, PREAMBLE_LEN).astype(np.float64)


def predicted_sigma(host_std: float, gamma: float, s: int, d: int) -> float:
    """Normalised despread noise std for a Gaussian host.

    Host term ``host_std**2 / (s * gamma**2)`` plus the multi-access term
    ``(d - 1) / s`` from the other symbols sharing the block.
    """
    return math.sqrt(host_std**2 / (s * gamma**2) + (d - 1) / s)


def predicted_snr_db(host_std: float, gamma: float, s: int, d: int) -> float:
    return -20.0 * math.log10(predicted_sigma(host_std, gamma, s, d))


def _workers() -> int:
    cap = os.environ.get("SPECTER_THREADS")
    n = os.cpu_count() or 1
    if cap and cap.strip().isdigit():
        n = max(1, min(n, int(cap)))
    return n


def _block_chunks(layout: Layout, n_elems: int):
    """Yield ``(first_block, n_blocks)`` spans covering elements ``0..n_elems-1``."""
    per = max(1, _CHUNK_CHIPS // (layout.d * layout.s))
    n_blocks = -(-n_elems // layout.d)
    for b0 in range(0, n_blocks, per):
        yield b0, min(per, n_blocks - b0)


def _chunk_chips(stream: ChipStream, layout: Layout, b0: int, nb: int, n_elems: int):
    # chips for every slot of blocks b0..b0+nb, zero rows for slots past n_elems
    k0 = b0 * layout.d
    k1 = min((b0 + nb) * layout.d, n_elems)
    chips = np.zeros((nb * layout.d, layout.s), dtype=np.float64)
    chips[: k1 - k0] = stream.chips(layout.chip_start(k0), (k1 - k0) * layout.s).reshape(
        -1, layout.s
    )
    return chips.reshape(nb, layout.d, layout.s), k0, k1


def _map(fn, items):
    workers = _workers()
    if workers == 1:
        return [fn(*it) for it in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda it: fn(*it), items))


def inject(
    host: np.ndarray, transmit: np.ndarray, params: EmbedParams, layout: Layout
) -> np.ndarray:
    """Add ``gamma * chips * symbol`` for every transmitted element.

    ``transmit`` holds +/-1 symbols. Returns a new float64 vector; weights
    outside the used blocks are copied unchanged.
    """
    transmit = np.asarray(transmit, dtype=np.float64)
    if transmit.size > layout.capacity_bits:
        raise LengthError(f"{transmit.size} symbols exceed capacity {layout.capacity_bits}")
    if host.size != layout.host_len:
        raise LengthError("host length does not match layout")
    out = np.array(host, dtype=np.float64, copy=True)
    stream = ChipStream(params.seed, CHIP_DOMAIN)
    n = transmit.size
    s, d = layout.s, layout.d

    def work(b0, nb):
        chips, k0, k1 = _chunk_chips(stream, layout, b0, nb, n)
        sym = np.zeros(nb * d)
        sym[: k1 - k0] = transmit[k0:k1]
        # integer-valued chip sums are exact; gamma is applied once per weight
        spread = (sym.reshape(nb, 1, d) @ chips)[:, 0, :]
        out[b0 * s : (b0 + nb) * s] += params.gamma * spread.ravel()

    _map(work, list(_block_chunks(layout, n)))
    return out


def despread(
    host: np.ndarray, params: EmbedParams, layout: Layout, n_transmit: int
) -> np.ndarray:
    """Correlate each element's chips with its block: ``y_k = c_k . w_j``."""
    if n_transmit > layout.capacity_bits:
        raise LengthError(f"{n_transmit} symbols exceed capacity {layout.capacity_bits}")
    host = np.asarray(host, dtype=np.float64)
    stream = ChipStream(params.seed, CHIP_DOMAIN)
    s, d = layout.s, layout.d
    y = np.empty(n_transmit)

    def work(b0, nb):
        chips, k0, k1 = _chunk_chips(stream, layout, b0, nb, n_transmit)
        w = host[b0 * s : (b0 + nb) * s].reshape(nb, s)
        y[k0:k1] = (chips @ w[:, :, None]).ravel()[: k1 - k0]

    _map(work, list(_block_chunks(layout, n_transmit)))
    return y


def estimate(y: np.ndarray, seed: int) -> ChannelEstimate:
    """Gain and noise level from the known preamble, then normalise the data."""
    y = np.asarray(y, dtype=np.float64)
    if y.size < PREAMBLE_LEN:
        raise LengthError(f"need at least {PREAMBLE_LEN} soft values")
    corr = y[:PREAMBLE_LEN] * preamble(seed)
    gain = float(corr.mean())
    if not gain > 0:
        raise SignalNotFound(f"preamble gain {gain:.3g} is not positive")
    sigma = max(float(np.std(corr / gain)), SIGMA_FLOOR)
    if math.sqrt(PREAMBLE_LEN) / sigma < DETECTION_Z:
        raise SignalNotFound(
            f"preamble correlation not significant (sigma {sigma:.3g}, "
            f"snr {-20 * math.log10(sigma):.1f} dB)"
        )
    return ChannelEstimate(
        gain=gain,
        sigma=sigma,
        snr_db=-20.0 * math.log10(sigma),
        soft_preamble=y[:PREAMBLE_LEN] / gain,
        soft_data=y[PREAMBLE_LEN:] / gain,
    )
