"""
Puncturing patterns, rate-compatible index tables and the (d0, d1, d2) rate
bookkeeping of the code family.

Dimensions are counted per 200 information bits: the systematic stream x0 has
200 positions, the punctured upper parity x1 has 100 and the lower parity x2
has 300. Longer frames tile the same patterns.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from pathlib import Path

import numpy as np

from .errors import ContractError, DomainError, InfeasibleDimensionsError, UndefinedRateError

logger = logging.getLogger(__name__)

NP_SYSTEMATIC = 200
NP_UPPER = 100
NP_LOWER = 300
K_REF = 200


@dataclass(frozen=True, eq=False)
class PuncturePattern:
    """Periodic keep mask; position i of a stream is sent iff keep[i % n_p]."""

    keep: np.ndarray

    def __post_init__(self):
        keep = np.asarray(self.keep, dtype=bool).ravel().copy()
        if keep.size == 0:
            raise ContractError("Puncture pattern must have at least one position")
        keep.setflags(write=False)
        object.__setattr__(self, "keep", keep)

    @classmethod
    def all_ones(cls, n_p: int) -> "PuncturePattern":
        return cls(np.ones(n_p, dtype=bool))

    @classmethod
    def from_zeros(cls, n_p: int, zeros) -> "PuncturePattern":
        keep = np.ones(n_p, dtype=bool)
        keep[list(zeros)] = False
        return cls(keep)

    @property
    def n_p(self) -> int:
        return self.keep.size

    @property
    def zeros(self) -> list[int]:
        return np.flatnonzero(~self.keep).tolist()

    @property
    def n_kept(self) -> int:
        return int(self.keep.sum())

    def mask(self, length: int) -> np.ndarray:
        """Keep mask tiled to ``length`` (the last period may be partial)."""
        reps = -(-length // self.n_p)
        return np.tile(self.keep, reps)[:length]

    def kept_count(self, length: int) -> int:
        return int(self.mask(length).sum())

    def __eq__(self, other):
        return isinstance(other, PuncturePattern) and np.array_equal(self.keep, other.keep)

    def __hash__(self):
        return hash(self.keep.tobytes())

    def __repr__(self):
        return f"PuncturePattern(n_p={self.n_p}, zeros={self.zeros})"


def apply_pattern(pattern: PuncturePattern, frame) -> np.ndarray:
    """Keep the transmitted positions of the last axis, in order."""
    frame = np.asarray(frame)
    return frame[..., pattern.mask(frame.shape[-1])]


def depuncture(pattern: PuncturePattern, punctured, full_length: int) -> np.ndarray:
    """Scatter received LLRs back to ``full_length`` positions; erased ones are 0."""
    punctured = np.asarray(punctured, dtype=np.float64)
    mask = pattern.mask(full_length)
    if punctured.shape[-1] != int(mask.sum()):
        raise ContractError(
            f"Punctured length {punctured.shape[-1]} does not match {int(mask.sum())} kept positions of {full_length}"
        )
    full = np.zeros(punctured.shape[:-1] + (full_length,), dtype=np.float64)
    full[..., mask] = punctured
    return full


@dataclass(frozen=True)
class RateCompatibleTable:
    """Order in which positions of an Np-periodic stream get punctured."""

    order: tuple[int, ...]
    n_p: int
    code: str

    def __post_init__(self):
        order = tuple(int(i) for i in self.order)
        object.__setattr__(self, "order", order)
        if self.code not in ("upper", "lower"):
            raise ContractError(f"Table code must be 'upper' or 'lower', got {self.code!r}")
        if len(set(order)) != len(order) or any(not 0 <= i < self.n_p for i in order):
            raise ContractError(f"Table order is not a permutation prefix of 0..{self.n_p - 1}")

    @property
    def complete(self) -> bool:
        return len(self.order) == self.n_p

    def pattern_at(self, n_punctured: int) -> PuncturePattern:
        return pattern_at(self, n_punctured)

    def to_text(self) -> str:
        lines = [f"# np={self.n_p} code={self.code}"]
        lines.extend(str(i) for i in self.order)
        return "\n".join(lines) + "\n"

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_text())
        logger.info(f"Wrote {self.code} table ({len(self.order)}/{self.n_p} indices) to {path}")

    @classmethod
    def from_text(cls, text: str) -> "RateCompatibleTable":
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ContractError("Table file is missing its '# np=<Np> code=<upper|lower>' header")
        try:
            header = dict(item.split("=", 1) for item in lines[0].lstrip("#").split())
            n_p = int(header["np"])
            code = header["code"]
        except (KeyError, ValueError) as e:
            raise ContractError(f"Malformed table header: {lines[0]!r}") from e
        try:
            order = tuple(int(line) for line in lines[1:])
        except ValueError as e:
            raise ContractError(f"Table lists a non-integer index: {e}") from e
        return cls(order, n_p, code)

    @classmethod
    def load(cls, path: Path) -> "RateCompatibleTable":
        return cls.from_text(Path(path).read_text())


def pattern_at(table: RateCompatibleTable, n_punctured: int) -> PuncturePattern:
    """Puncture the first ``n_punctured`` positions of the table's order."""
    if not 0 <= n_punctured <= len(table.order):
        raise DomainError(f"n_punctured={n_punctured} outside 0..{len(table.order)} for {table.code} table")
    return PuncturePattern.from_zeros(table.n_p, table.order[:n_punctured])


def spread_table(n_p: int, code: str) -> RateCompatibleTable:
    """
    Baseline order that keeps punctured positions evenly spread: each step
    punctures the kept position farthest (circularly) from all punctured ones,
    ties to the smallest index.
    """
    idx = np.arange(n_p)
    dist = np.full(n_p, n_p, dtype=np.int64)
    available = np.ones(n_p, dtype=bool)
    order = []
    for _ in range(n_p):
        score = np.where(available, dist, -1)
        pick = int(np.argmax(score))
        order.append(pick)
        available[pick] = False
        gap = np.abs(idx - pick)
        dist = np.minimum(dist, np.minimum(gap, n_p - gap))
    return RateCompatibleTable(tuple(order), n_p, code)


def _as_exact(value):
    if isinstance(value, (Fraction, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    return value


def rate_from_dimensions(rho0, rho1, rho2):
    """
    R = 1 / (rho0 + rho1/2 + 3 rho2/2). Rational inputs (int, Fraction or
    strings like "1/5") give an exact Fraction, anything else a float.
    """
    rhos = [_as_exact(r) for r in (rho0, rho1, rho2)]
    for r in rhos:
        if not 0 <= r <= 1:
            raise DomainError(f"Permeability {r} outside [0, 1]")
    denom = rhos[0] + rhos[1] / 2 + 3 * rhos[2] / 2
    if denom == 0:
        raise UndefinedRateError("All permeabilities are zero; rate undefined")
    if all(isinstance(r, Rational) for r in rhos):
        return Fraction(1) / Fraction(denom)
    return 1.0 / float(denom)


@dataclass(frozen=True)
class CodeDimensions:
    """Transmitted counts per 200 information bits plus the frame length K."""

    d1: int
    d2: int
    d0: int = NP_SYSTEMATIC
    K: int = K_REF

    def __post_init__(self):
        if self.d0 != NP_SYSTEMATIC:
            raise DomainError(f"Systematic bits are never punctured: d0 must be {NP_SYSTEMATIC}, got {self.d0}")
        if not 0 <= self.d1 <= NP_UPPER:
            raise InfeasibleDimensionsError(f"d1={self.d1} outside [0, {NP_UPPER}]")
        if not 0 <= self.d2 <= NP_LOWER:
            raise InfeasibleDimensionsError(f"d2={self.d2} outside [0, {NP_LOWER}]")
        if self.K < 2 or self.K % 2:
            raise DomainError(f"K must be a positive even number, got {self.K}")

    @property
    def N(self) -> int:
        return 3 * self.K // 2

    @property
    def L(self) -> int:
        return self.d0 + self.d1 + self.d2

    @property
    def D(self) -> list[int]:
        return [self.d0, self.d1, self.d2]

    @property
    def rho0(self) -> Fraction:
        return Fraction(self.d0, NP_SYSTEMATIC)

    @property
    def rho1(self) -> Fraction:
        return Fraction(self.d1, NP_UPPER)

    @property
    def rho2(self) -> Fraction:
        return Fraction(self.d2, NP_LOWER)

    @property
    def R(self) -> Fraction:
        return rate_from_dimensions(self.rho0, self.rho1, self.rho2)

    def with_K(self, K: int) -> "CodeDimensions":
        return CodeDimensions(d1=self.d1, d2=self.d2, d0=self.d0, K=K)

    def as_dict(self) -> dict:
        return {"d0": self.d0, "d1": self.d1, "d2": self.d2, "K": self.K, "N": self.N, "L": self.L, "rate": str(self.R)}

    def __str__(self):
        return f"D=[{self.d0}, {self.d1}, {self.d2}] K={self.K} N={self.N} L={self.L} R={self.R}"


def length_for_rate(rate) -> int:
    """L = 200 / R, which must be an integer in [200, 600]."""
    rate = _as_exact(rate)
    if isinstance(rate, float):
        rate = Fraction(rate).limit_denominator(600)
    if rate <= 0:
        raise DomainError(f"Rate must be positive, got {rate}")
    L = Fraction(K_REF) / rate
    if L.denominator != 1:
        raise DomainError(f"Rate {rate} does not give an integer number of transmitted bits per {K_REF}")
    L = int(L)
    if not K_REF <= L <= K_REF + NP_UPPER + NP_LOWER:
        raise DomainError(f"Rate {rate} outside [1/3, 1] (L={L})")
    return L


def feasible_d2(L: int) -> tuple[int, int]:
    """Closed interval of d2 values with d1 = L - 200 - d2 inside [0, 100]."""
    lo = max(0, L - K_REF - NP_UPPER)
    hi = min(NP_LOWER, L - K_REF)
    if lo > hi:
        raise DomainError(f"No feasible d2 for L={L}")
    return lo, hi


def dimensions_for(rate=None, d2: int = 0, L: int | None = None, K: int = K_REF) -> CodeDimensions:
    if L is None:
        if rate is None:
            raise DomainError("Either a rate or L is required")
        L = length_for_rate(rate)
    elif not K_REF <= L <= K_REF + NP_UPPER + NP_LOWER:
        raise DomainError(f"L={L} outside [{K_REF}, {K_REF + NP_UPPER + NP_LOWER}]")

    lo, hi = feasible_d2(L)
    if not lo <= d2 <= hi:
        raise InfeasibleDimensionsError(f"d2={d2} infeasible for L={L}", feasible=(lo, hi))
    return CodeDimensions(d1=L - K_REF - d2, d2=d2, K=K)


def d2_compromise(L: int) -> int:
    """
    d2 = (3L - 600) / 4, i.e. rho2 = (1 - R) / (2R). Non-integer values go to the
    next even integer above, then are clamped to the feasible interval.
    """
    if not K_REF <= L <= K_REF + NP_UPPER + NP_LOWER:
        raise DomainError(f"L={L} outside [{K_REF}, {K_REF + NP_UPPER + NP_LOWER}]")
    value = Fraction(3 * L - 600, 4)
    if value.denominator == 1:
        d2 = int(value)
    else:
        d2 = math.ceil(value)
        if d2 % 2:
            d2 += 1
    lo, hi = feasible_d2(L)
    return min(max(d2, lo), hi)


class CodeFamily:
    """Upper (Np=100) and lower (Np=300) tables of one rate-compatible family."""

    def __init__(self, upper: RateCompatibleTable, lower: RateCompatibleTable, name: str = "custom"):
        if upper.n_p != NP_UPPER or upper.code != "upper":
            raise ContractError(f"Upper table must be an Np={NP_UPPER} 'upper' table")
        if lower.n_p != NP_LOWER or lower.code != "lower":
            raise ContractError(f"Lower table must be an Np={NP_LOWER} 'lower' table")
        self.upper = upper
        self.lower = lower
        self.name = name

    def upper_pattern(self, d1: int) -> PuncturePattern:
        return pattern_at(self.upper, NP_UPPER - d1)

    def lower_pattern(self, d2: int) -> PuncturePattern:
        return pattern_at(self.lower, NP_LOWER - d2)

    @classmethod
    def spread(cls) -> "CodeFamily":
        return cls(spread_table(NP_UPPER, "upper"), spread_table(NP_LOWER, "lower"), name="spread")

    @classmethod
    def load(cls, tables_dir: Path) -> "CodeFamily":
        tables_dir = Path(tables_dir)
        upper = RateCompatibleTable.load(tables_dir / "upper.txt")
        lower = RateCompatibleTable.load(tables_dir / "lower.txt")
        logger.info(f"Loaded puncturing tables from {tables_dir}")
        return cls(upper, lower, name=str(tables_dir))

    @classmethod
    def from_config(cls, tables_dir: str | Path | None) -> "CodeFamily":
        if tables_dir and Path(tables_dir).exists():
            return cls.load(Path(tables_dir))
        if tables_dir:
            logger.warning(f"Tables directory {tables_dir} not found, using evenly spread baseline tables")
        return cls.spread()


def d2_grid(L: int, d2_step: int) -> list[int]:
    """Feasible d2 values from the low end at ``d2_step``, always ending on the high end."""
    lo, hi = feasible_d2(L)
    values = list(range(lo, hi + 1, max(1, d2_step)))
    if values[-1] != hi:
        values.append(hi)
    return values
