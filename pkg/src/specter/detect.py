"""Detectability statistics: two-sample Kolmogorov-Smirnov and moment reports."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import TooFewSamples
from .keystream import CHIP_DOMAIN, ChipStream

QUANTILES = (0.001, 0.01, 0.25, 0.5, 0.75, 0.99, 0.999)


@dataclass(frozen=True)
class KsResult:
    d_stat: float
    p_value: float
    n1: int
    n2: int

    def to_dict(self) -> dict:
        return asdict(self)


def kolmogorov_q(lam: float, tol: float = 1e-12) -> float:
    """Asymptotic survival function Q(lam) = 2 sum (-1)^(k-1) exp(-2 k^2 lam^2)."""
    if lam < 1e-3:
        return 1.0
    total = 0.0
    sign = 1.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < tol:
            break
        sign = -sign
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """sup |F_a - F_b| evaluated after each distinct value in the pooled sample."""
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    points = np.concatenate([a, b])
    # side="right" moves both CDFs past every tie before they are compared
    fa = np.searchsorted(a, points, side="right") / a.size
    fb = np.searchsorted(b, points, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_two_sample(a, b) -> KsResult:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.size < 2 or b.size < 2:
        raise TooFewSamples("each sample needs at least two values")
    d = ks_statistic(a, b)
    ne = a.size * b.size / (a.size + b.size)
    sq = math.sqrt(ne)
    p = kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)
    return KsResult(d_stat=d, p_value=p, n1=int(a.size), n2=int(b.size))


def distribution_report(samples) -> dict:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 2:
        raise TooFewSamples("need at least two samples")
    mean = float(x.mean())
    dev = x - mean
    var = float(np.mean(dev**2))
    std = math.sqrt(var)
    if var > 0:
        skew = float(np.mean(dev**3)) / var**1.5
        kurt = float(np.mean(dev**4)) / var**2 - 3.0
    else:
        skew = kurt = 0.0
    qs = np.quantile(x, QUANTILES)
    return {
        "n": int(x.size),
        "mean": mean,
        "std": std,
        "skewness": skew,
        "excess_kurtosis": kurt,
        "quantiles": {f"{q:g}": float(v) for q, v in zip(QUANTILES, qs)},
    }


def pure_signal_sample(n: int, gamma: float, d: int, seed: int) -> np.ndarray:
    """Per-weight perturbations of a full block: gamma times a sum of d random +/-1."""
    stream = ChipStream(seed, CHIP_DOMAIN)
    chips = stream.chips(0, n * d).reshape(n, d).astype(np.int64)
    return gamma * chips.sum(axis=1)


def binomiality_probe(samples, gamma: float, d: int, seed: int) -> KsResult:
    """KS distance between suspect weights and a scaled pure-signal sample."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    return ks_two_sample(samples, pure_signal_sample(samples.size, gamma, d, seed))
