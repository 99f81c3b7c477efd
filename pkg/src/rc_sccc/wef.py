"""
Weight enumerators of the punctured constituent codes and the
uniform-interleaver union bound on the bit error probability.

Enumeration is a dynamic program over trellis stages whose state is the
trellis state plus the accumulated weights; branches that exceed the
truncation limits are dropped. Trellises are not terminated, matching the
codec, so all end states are accepted.

The bound is the standard uniform-interleaver assembly

    Pb <= sum (w/K) A_U(w, h_t, l) A_L(l, h2) / C(N, l) Q(sqrt(2 R (h_t + h2) Eb/N0))

restricted to h_t + h2 <= h_max.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import comb

from .channel import db_to_linear, q_function
from .convcode import Trellis
from .errors import ContractError, DomainError, EnumerationError, NonConvergenceError, TruncationMismatchError
from .parallel import map_ordered
from .puncturing import CodeDimensions, CodeFamily, PuncturePattern, d2_grid, feasible_d2, length_for_rate
from .sccc import PARITY_TRELLIS

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnumLimits:
    w_max: int = 8
    h_max: int = 40
    l_max: int = 40

    def __post_init__(self):
        if min(self.w_max, self.h_max, self.l_max) < 1:
            raise DomainError(f"Enumerator limits must be positive: {self}")

    def widened(self, extra_h: int) -> "EnumLimits":
        return EnumLimits(self.w_max, self.h_max + extra_h, self.l_max)


@dataclass(frozen=True, eq=False)
class UpperWef:
    """A[w, h_t, l]: multiplicities by info weight, transmitted weight and weight of v."""

    A: np.ndarray
    K: int
    limits: EnumLimits

    @property
    def l_max(self) -> int:
        return self.A.shape[2] - 1

    @property
    def d_min(self) -> int:
        nz = np.flatnonzero(self.A[1:].sum(axis=(0, 2)))
        return int(nz[0]) if nz.size else self.limits.h_max + 1

    @property
    def multiplicity_at_dmin(self) -> float:
        d = self.d_min
        return float(self.A[1:, d, :].sum()) if d <= self.limits.h_max else 0.0

    def to_frame(self) -> pd.DataFrame:
        w, h, l = np.nonzero(self.A)
        return pd.DataFrame({"w": w, "h_t": h, "l": l, "mult": self.A[w, h, l]})


@dataclass(frozen=True, eq=False)
class LowerWef:
    """A[l, h2]: multiplicities by input weight over z and weight of x2."""

    A: np.ndarray
    N: int
    limits: EnumLimits

    @property
    def l_max(self) -> int:
        return self.A.shape[0] - 1

    @property
    def d_min(self) -> int:
        nz = np.flatnonzero(self.A[1:].sum(axis=0))
        return int(nz[0]) if nz.size else self.limits.h_max + 1

    @property
    def multiplicity_at_dmin(self) -> float:
        d = self.d_min
        return float(self.A[1:, d].sum()) if d <= self.limits.h_max else 0.0

    def to_frame(self) -> pd.DataFrame:
        l, h = np.nonzero(self.A)
        return pd.DataFrame({"l": l, "h2": h, "mult": self.A[l, h]})


def _shift_add(dst: np.ndarray, src: np.ndarray, shifts: tuple[int, ...]) -> None:
    """dst[a + da, b + db, ...] += src[a, b, ...], dropping what falls outside."""
    dst_idx = tuple(slice(d, None) for d in shifts)
    src_idx = tuple(slice(0, n - d) for n, d in zip(src.shape, shifts))
    dst[dst_idx] += src[src_idx]


def enumerate_upper(pattern: PuncturePattern, K: int, limits: EnumLimits = EnumLimits(), trellis: Trellis = PARITY_TRELLIS) -> UpperWef:
    """
    C_U: input u (weight w), v = [u | even-step parity] (weight l),
    transmitted x0 = u plus the parity bits kept by ``pattern`` (weight h_t).
    """
    if K < 2 or K % 2:
        raise ContractError(f"K must be a positive even number, got {K}")
    x1_mask = pattern.mask(K // 2)
    S = trellis.n_states
    W, H, L = limits.w_max, limits.h_max, limits.l_max
    state = np.zeros((S, W + 1, H + 1, L + 1))
    state[0, 0, 0, 0] = 1.0

    edges = [(s, u, int(trellis.next_state[s, u]), int(trellis.outputs[s, u, -1])) for s in range(S) for u in (0, 1)]
    for t in range(K):
        sent = t % 2 == 0
        kept = sent and bool(x1_mask[t // 2])
        new = np.zeros_like(state)
        for s, u, ns, p in edges:
            dl = u + (p if sent else 0)
            dh = u + (p if kept else 0)
            if u > W or dh > H or dl > L:
                continue
            _shift_add(new[ns], state[s], (u, dh, dl))
        state = new

    A = state.sum(axis=0)
    if not A[1:].any():
        raise EnumerationError(f"Upper enumerator limits {limits} hold no nonzero-input term for K={K}")
    return UpperWef(A, K, limits)


def enumerate_lower(pattern: PuncturePattern, N: int, limits: EnumLimits = EnumLimits(), trellis: Trellis = PARITY_TRELLIS) -> LowerWef:
    """C_L: input z (weight l), transmitted parity kept by ``pattern`` (weight h2)."""
    x2_mask = pattern.mask(N)
    S = trellis.n_states
    H, L = limits.h_max, limits.l_max
    state = np.zeros((S, L + 1, H + 1))
    state[0, 0, 0] = 1.0

    edges = [(s, u, int(trellis.next_state[s, u]), int(trellis.outputs[s, u, -1])) for s in range(S) for u in (0, 1)]
    for t in range(N):
        kept = bool(x2_mask[t])
        new = np.zeros_like(state)
        for s, u, ns, p in edges:
            dh = p if kept else 0
            if u > L or dh > H:
                continue
            _shift_add(new[ns], state[s], (u, dh))
        state = new

    A = state.sum(axis=0)
    if not A[1:].any():
        raise EnumerationError(f"Lower enumerator limits {limits} hold no nonzero-input term for N={N}")
    return LowerWef(A, N, limits)


def enumerators_for(family: CodeFamily, dims: CodeDimensions, K: int, limits: EnumLimits = EnumLimits()):
    upper = enumerate_upper(family.upper_pattern(dims.d1), K, limits)
    lower = enumerate_lower(family.lower_pattern(dims.d2), 3 * K // 2, limits)
    return upper, lower


def total_spectrum(upper: UpperWef, lower: LowerWef, K: int, N: int) -> np.ndarray:
    """
    T[h]: information-weighted multiplicity of total transmitted weight h
    under the uniform interleaver, for h <= h_max.
    """
    if N != 3 * K // 2:
        raise ContractError(f"N={N} is not 3K/2 for K={K}")
    if upper.K != K or lower.N != N:
        raise ContractError(f"Enumerators built for K={upper.K}, N={lower.N}, bound asked for K={K}, N={N}")
    if lower.l_max < upper.l_max:
        raise TruncationMismatchError(f"Lower l_max={lower.l_max} is below upper l_max={upper.l_max}")

    h_max = min(upper.limits.h_max, lower.limits.h_max)
    w = np.arange(upper.A.shape[0])
    M = np.einsum("w,whl->lh", w / K, upper.A)
    T = np.zeros(h_max + 1)
    for l in range(1, upper.l_max + 1):
        if not M[l].any() or not lower.A[l].any():
            continue
        conv = np.convolve(M[l], lower.A[l] / comb(N, l))
        n = min(conv.size, h_max + 1)
        T[:n] += conv[:n]
    return T


def union_bound(upper: UpperWef, lower: LowerWef, K: int, N: int, R: float, eb_n0_db):
    """Bit error probability bound at one or several Eb/N0 values (dB)."""
    T = total_spectrum(upper, lower, K, N)
    h = np.arange(T.size)
    ebn0 = db_to_linear(np.atleast_1d(np.asarray(eb_n0_db, dtype=np.float64)))
    pb = (T[None, :] * q_function(np.sqrt(2.0 * float(R) * h[None, :] * ebn0[:, None]))).sum(axis=1)
    return float(pb[0]) if np.ndim(eb_n0_db) == 0 else pb


@dataclass
class BoundCurve:
    eb_n0_db: np.ndarray
    pb_bound: np.ndarray
    dims: CodeDimensions
    K: int
    limits: EnumLimits

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"eb_n0_db": self.eb_n0_db, "pb_bound": self.pb_bound})

    def metadata(self) -> dict:
        return {
            **self.dims.as_dict(),
            "K": self.K,
            "w_max": self.limits.w_max,
            "h_max": self.limits.h_max,
            "l_max": self.limits.l_max,
            "bound": "uniform-interleaver union bound, truncated at h_t + h2 <= h_max",
        }


def bound_curve(family: CodeFamily, dims: CodeDimensions, K: int, eb_grid, limits: EnumLimits = EnumLimits()) -> BoundCurve:
    upper, lower = enumerators_for(family, dims, K, limits)
    eb_grid = np.asarray(eb_grid, dtype=np.float64)
    pb = union_bound(upper, lower, K, 3 * K // 2, float(dims.R), eb_grid)
    return BoundCurve(eb_grid, np.asarray(pb), dims, K, limits)


def ub_required_snr(
    family: CodeFamily,
    dims: CodeDimensions,
    K: int,
    target_pb: float = 1e-9,
    limits: EnumLimits = EnumLimits(),
    lo: float = 0.0,
    hi: float = 14.0,
    tol: float = 0.05,
) -> float:
    """Bisection on the bound; returns ``lo`` when the target already holds there."""
    upper, lower = enumerators_for(family, dims, K, limits)
    N = 3 * K // 2
    R = float(dims.R)

    def bound(eb):
        return union_bound(upper, lower, K, N, R, eb)

    if bound(lo) <= target_pb:
        return lo
    if bound(hi) > target_pb:
        raise NonConvergenceError(f"{dims}: bound does not reach Pb={target_pb} within [{lo}, {hi}] dB")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bound(mid) <= target_pb:
            hi = mid
        else:
            lo = mid
    logger.info(f"{dims}, K={K}: union bound reaches Pb={target_pb} at {hi:.3f} dB")
    return hi


def truncation_check(family: CodeFamily, dims: CodeDimensions, K: int, eb_n0_db: float, limits: EnumLimits = EnumLimits(), extra_h: int = 10) -> float:
    """Relative change of the bound when h_max grows by ``extra_h``."""
    N = 3 * K // 2
    R = float(dims.R)
    base = union_bound(*enumerators_for(family, dims, K, limits), K, N, R, eb_n0_db)
    wide = union_bound(*enumerators_for(family, dims, K, limits.widened(extra_h)), K, N, R, eb_n0_db)
    change = abs(wide - base) / base if base > 0 else 0.0
    logger.info(f"{dims}: bound changes by {100 * change:.3f}% when h_max grows by {extra_h}")
    return change


def choose_d2_ef(rate) -> int:
    """Largest feasible d2, min(300, L - 200)."""
    L = length_for_rate(rate)
    return feasible_d2(L)[1]


def _ub_cell(family, L, d2, K, target_pb, limits):
    dims = CodeDimensions(d1=L - 200 - d2, d2=d2)
    try:
        return ub_required_snr(family, dims, K, target_pb, limits)
    except NonConvergenceError as e:
        logger.warning(f"d2={d2}: {e}")
        return math.nan


def ub_grid(
    family: CodeFamily,
    rate,
    K: int,
    target_pb: float = 1e-9,
    d2_step: int = 10,
    limits: EnumLimits = EnumLimits(),
    client=None,
) -> list[tuple[int, float]]:
    """Required Eb/N0 from the union bound for every feasible d2 at the given step."""
    L = length_for_rate(rate)
    values = d2_grid(L, d2_step)
    jobs = [(family, L, d2, K, target_pb, limits) for d2 in values]
    return list(zip(values, map_ordered(_ub_cell, jobs, client, desc=f"UB grid R={rate}")))
