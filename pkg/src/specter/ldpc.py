"""Rate-1/2 (3,6)-regular LDPC code: seeded Gallager construction, systematic
encoding over GF(2) and sum-product belief propagation for AWGN channels.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, LengthError
from .keystream import LDPC_DOMAIN, ChipStream

COL_WEIGHT = 3
ROW_WEIGHT = 6
TANH_CLAMP = 1.0 - 1e-12


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """Parity-check structure plus a systematic generator.

    ``checks[i]`` lists the (sorted) columns of check ``i``. The generator is
    ``[I_k | parity]`` in the column order ``perm``: positions ``perm[:k]``
    carry the message, ``perm[k:k + n_pivot]`` the parity bits, and any
    remaining positions (free columns left over because a Gallager matrix is
    never full rank) are frozen to zero.
    """

    n: int
    checks: np.ndarray
    perm: np.ndarray
    parity: np.ndarray
    n_pivot: int

    @property
    def m(self) -> int:
        return self.checks.shape[0]

    @property
    def k(self) -> int:
        return self.n // 2

    @property
    def n_edges(self) -> int:
        return self.checks.size

    @property
    def H(self) -> np.ndarray:
        return _dense(self.checks, self.n)

    @property
    def G(self) -> np.ndarray:
        g = np.zeros((self.k, self.n), dtype=np.uint8)
        g[np.arange(self.k), self.perm[: self.k]] = 1
        g[:, self.perm[self.k : self.k + self.n_pivot]] = self.parity
        return g

    def message(self, codeword: np.ndarray) -> np.ndarray:
        """Systematic part of a codeword (works on batches too)."""
        return np.asarray(codeword)[..., self.perm[: self.k]]


def _gallager_checks(seed: int, n: int) -> np.ndarray:
    # Three column bands (identity, then two seeded permutations) laid end to
    # end and cut into rows of six. With 12 | n no row straddles two bands and
    # this is the textbook Gallager ensemble; otherwise a straddling row may
    # repeat a column, which stays as two distinct Tanner edges.
    stream = ChipStream(seed, LDPC_DOMAIN)
    sockets = np.concatenate(
        [np.arange(n), stream.permutation(0, n), stream.permutation(2 * n, n)]
    )
    return np.sort(sockets.reshape(-1, ROW_WEIGHT), axis=1)


def _dense(checks: np.ndarray, n: int) -> np.ndarray:
    h = np.zeros((checks.shape[0], n), dtype=np.uint8)
    rows = np.repeat(np.arange(checks.shape[0]), checks.shape[1])
    np.bitwise_xor.at(h, (rows, checks.ravel()), 1)
    return h


def _rref_gf2(h: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2), scanning columns left to right.

    Returns the unpacked nonzero rows and their pivot columns.
    """
    m, n = h.shape
    packed = np.packbits(h.astype(np.uint8), axis=1)
    pivots = []
    r = 0
    for c in range(n):
        if r == m:
            break
        byte, shift = c >> 3, 7 - (c & 7)
        col = (packed[r:, byte] >> shift) & 1
        hits = np.flatnonzero(col)
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            packed[[r, p]] = packed[[p, r]]
        rows = np.flatnonzero((packed[:, byte] >> shift) & 1)
        rows = rows[rows != r]
        packed[rows] ^= packed[r]
        pivots.append(c)
        r += 1
    return np.unpackbits(packed[:r], axis=1, count=n), pivots


@functools.lru_cache(maxsize=16)
def build(seed: int, n: int = 2048) -> LdpcCode:
    """Build the code for ``(seed, n)``; ``n`` must be even and at least 12."""
    if n < 12 or n % 2:
        raise ConstructionError(f"block length must be an even number >= 12, got {n}")
    checks = _gallager_checks(seed, n)
    h = _dense(checks, n)

    reduced, pivots = _rref_gf2(h)
    k = n // 2
    free = np.setdiff1d(np.arange(n), pivots)
    if free.size < k:
        # rank above n - k cannot happen for an n/2-row matrix
        raise ConstructionError("parity-check matrix has too few free columns")
    info, frozen = free[:k], free[k:]
    pivots = np.asarray(pivots)
    perm = np.concatenate([info, pivots, frozen])
    parity = np.ascontiguousarray(reduced[:, info].T)

    code = LdpcCode(n=n, checks=checks, perm=perm, parity=parity, n_pivot=len(pivots))
    for arr in (checks, perm, parity):
        arr.setflags(write=False)
    if np.any(code.G[:, checks].sum(axis=2) % 2):
        raise ConstructionError("generator is not orthogonal to the parity checks")
    return code


def encode(code: LdpcCode, message: np.ndarray) -> np.ndarray:
    """Encode one message (``k`` bits) or a batch of shape ``(B, k)``."""
    message = np.asarray(message, dtype=np.uint8)
    if message.shape[-1] != code.k:
        raise LengthError(f"message must have {code.k} bits, got {message.shape[-1]}")
    batch = np.atleast_2d(message)
    out = np.zeros((batch.shape[0], code.n), dtype=np.uint8)
    out[:, code.perm[: code.k]] = batch
    # float32 matmul is exact here: sums never exceed k < 2**24
    par = batch.astype(np.float32) @ code.parity.astype(np.float32)
    out[:, code.perm[code.k : code.k + code.n_pivot]] = par.astype(np.int64) & 1
    return out if message.ndim > 1 else out[0]


def syndrome(code: LdpcCode, word: np.ndarray) -> np.ndarray:
    word = np.asarray(word, dtype=np.uint8)
    if word.shape[-1] != code.n:
        raise LengthError(f"word must have {code.n} bits, got {word.shape[-1]}")
    return word[..., code.checks].sum(axis=-1, dtype=np.int64).astype(np.uint8) & 1


def _exclusive_product(t: np.ndarray) -> np.ndarray:
    left = np.ones_like(t)
    right = np.ones_like(t)
    left[..., 1:] = np.cumprod(t[..., :-1], axis=-1)
    right[..., :-1] = np.cumprod(t[..., :0:-1], axis=-1)[..., ::-1]
    return left * right


def decode_batch(
    code: LdpcCode, values: np.ndarray, sigma: float, max_iter: int = 50
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sum-product decoding of a batch of soft words.

    ``values`` holds normalised channel outputs (nominally +/-1, +1 meaning
    bit 1). Returns hard decisions ``(B, n)``, a convergence mask and the
    iteration at which each word first satisfied every check (``max_iter``
    when it never did).
    """
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if values.shape[-1] != code.n:
        raise LengthError(f"soft word must have {code.n} values, got {values.shape[-1]}")
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    n_words, n = values.shape
    checks = code.checks

    llr = 2.0 * values / sigma**2
    bits = (llr > 0).astype(np.uint8)
    converged = np.zeros(n_words, dtype=bool)
    iterations = np.full(n_words, max_iter, dtype=np.int64)

    ok = ~syndrome(code, bits).any(axis=1)
    converged[ok] = True
    iterations[ok] = 0
    active = np.flatnonzero(~ok)
    c2v = np.zeros((active.size, code.m, ROW_WEIGHT))

    for it in range(1, max_iter + 1):
        if active.size == 0:
            break
        a_llr = llr[active]
        offsets = (np.arange(active.size) * n)[:, None, None]
        total = a_llr + np.bincount(
            (checks + offsets).ravel(), weights=c2v.ravel(), minlength=active.size * n
        ).reshape(active.size, n)
        v2c = total[:, checks] - c2v
        t = np.clip(np.tanh(0.5 * v2c), -TANH_CLAMP, TANH_CLAMP)
        c2v = 2.0 * np.arctanh(_exclusive_product(t))

        total = a_llr + np.bincount(
            (checks + offsets).ravel(), weights=c2v.ravel(), minlength=active.size * n
        ).reshape(active.size, n)
        hard = (total > 0).astype(np.uint8)
        bits[active] = hard
        done = ~syndrome(code, hard).any(axis=1)
        if done.any():
            converged[active[done]] = True
            iterations[active[done]] = it
            active = active[~done]
            c2v = c2v[~done]
    return bits, converged, iterations


def decode(code: LdpcCode, values: np.ndarray, sigma: float, max_iter: int = 50):
    """Decode a single soft word; returns ``(bits, converged)``."""
    bits, converged, _ = decode_batch(code, values, sigma, max_iter)
    return bits[0], bool(converged[0])
