"""
BPSK over AWGN: symbol mapping, noise, matched-filter LLRs, the J-function
of consistent Gaussian LLRs and the BPSK-input capacity limit.

Gaussian noise uses numpy's PCG64 generator and its ziggurat
``standard_normal``; independent streams come from ``SeedSequence`` spawning
(or an explicit ``SeedSequence([master, ...])`` key).
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .errors import ContractError, DomainError, NonConvergenceError

logger = logging.getLogger(__name__)

LLR_CLAMP = 50.0
GH_NODES = 96
J_SIGMA_MAX = 60.0

_gh_x, _gh_w = np.polynomial.hermite.hermgauss(GH_NODES)


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ChannelParams:
    eb_n0_db: float
    rate: float

    def __post_init__(self):
        if not 0 < float(self.rate) <= 1:
            raise DomainError(f"Rate must lie in (0, 1], got {self.rate}")

    @property
    def sigma2(self) -> float:
        return 1.0 / (2.0 * float(self.rate) * db_to_linear(self.eb_n0_db))

    @property
    def es_n0_db(self) -> float:
        return self.eb_n0_db + 10.0 * math.log10(float(self.rate))


def sigma2_from_es_n0(es_n0_db: float) -> float:
    return 1.0 / (2.0 * db_to_linear(es_n0_db))


def rng_for(seed) -> np.random.Generator:
    """Generator from an int, a SeedSequence or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def bpsk(bits) -> np.ndarray:
    """0 -> +1, 1 -> -1."""
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def transmit(bits, params: ChannelParams | float, seed) -> np.ndarray:
    """
    Received matched-filter samples y = x + n. ``params`` may be a
    ChannelParams or a noise variance; a variance of 0 is noiseless.
    """
    sigma2 = params.sigma2 if isinstance(params, ChannelParams) else float(params)
    x = bpsk(bits)
    if sigma2 <= 0:
        return x
    return x + math.sqrt(sigma2) * rng_for(seed).standard_normal(x.shape)


def channel_llrs(y, sigma2: float) -> np.ndarray:
    if sigma2 <= 0:
        raise DomainError(f"Noise variance must be positive, got {sigma2}")
    return np.clip(2.0 * np.asarray(y, dtype=np.float64) / sigma2, -LLR_CLAMP, LLR_CLAMP)


def q_function(x):
    """Gaussian tail Q(x) = erfc(x / sqrt(2)) / 2."""
    return 0.5 * special.erfc(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


def one_minus_j(sigma: float) -> float:
    """
    E[log2(1 + exp(-L))] for L ~ N(sigma^2 / 2, sigma^2), evaluated by
    Gauss-Hermite quadrature. Equals 1 - J(sigma).
    """
    if sigma <= 0:
        return 1.0
    if sigma >= J_SIGMA_MAX:
        return 0.0
    mean = sigma * sigma / 2.0
    llr = mean + math.sqrt(2.0) * sigma * _gh_x
    values = np.logaddexp(0.0, -llr) / math.log(2.0)
    return float(np.dot(_gh_w, values) / math.sqrt(math.pi))


def J(sigma: float) -> float:
    """Mutual information between a bit and its consistent Gaussian LLR."""
    return min(max(1.0 - one_minus_j(sigma), 0.0), 1.0)


@lru_cache(maxsize=8192)
def _j_inv_cached(mi: float) -> float:
    return optimize.brentq(lambda s: J(s) - mi, 0.0, J_SIGMA_MAX, xtol=1e-12, rtol=1e-14)


def J_inv(mi: float) -> float:
    """sigma with J(sigma) = mi; 0 for mi <= 0 and inf for mi >= 1."""
    mi = float(mi)
    if mi <= 0.0:
        return 0.0
    if mi >= 1.0:
        return math.inf
    return _j_inv_cached(round(mi, 15))


def bpsk_capacity(es_n0_db: float) -> float:
    """BPSK-input AWGN mutual information in bits per channel use."""
    sigma2 = sigma2_from_es_n0(es_n0_db)
    # channel LLRs at unit symbol energy are consistent Gaussian with sigma_L^2 = 4 / sigma2
    return J(2.0 / math.sqrt(sigma2))


def bpsk_limit_db(rate: float, bracket: tuple[float, float] = (-1.6, 30.0), xtol: float = 1e-4) -> float:
    """Smallest Eb/N0 (dB) at which the BPSK capacity reaches ``rate``."""
    rate = float(rate)
    if not 0 < rate <= 1:
        raise DomainError(f"Rate must lie in (0, 1], got {rate}")

    def excess(eb_n0_db):
        return bpsk_capacity(eb_n0_db + 10.0 * math.log10(rate)) - rate

    lo, hi = bracket
    if excess(lo) > 0:
        # Shannon limit for rate -> 0 sits just above -1.6 dB
        lo = 10.0 * math.log10(math.log(2.0)) - 1e-6
    if excess(lo) > 0 or excess(hi) < 0:
        raise NonConvergenceError(f"No BPSK capacity root for rate {rate} in [{lo}, {hi}] dB")
    return float(optimize.brentq(excess, lo, hi, xtol=xtol))


def bpsk_capacity_gap(rate: float, eb_n0_db: float) -> float:
    return float(eb_n0_db) - bpsk_limit_db(rate)


def measure_mi(llrs, bits) -> float:
    """
    Time-average estimate I = 1 - mean(log2(1 + exp(-x L))) with x = +1 for
    bit 0 and -1 for bit 1, clipped to [0, 1].
    """
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    bits = np.asarray(bits).ravel()
    if llrs.size == 0:
        raise ContractError("Cannot measure mutual information of an empty frame")
    if llrs.size != bits.size:
        raise ContractError(f"{llrs.size} LLRs but {bits.size} reference bits")
    loss = np.logaddexp(0.0, -bpsk(bits) * llrs) / math.log(2.0)
    return float(min(max(1.0 - loss.mean(), 0.0), 1.0))
