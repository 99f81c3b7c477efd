"""
Seeded random and S-random interleavers between the upper codeword v and the
lower code input z.

All randomness comes from numpy's PCG64 bit generator, so a (N, seed) pair
reproduces the same permutation on every platform numpy supports.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConstructionError, ContractError, DomainError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Interleaver:
    """
    Permutation with out[i] = x[perm[i]].
    kind is "random" or "s_random"; s is the spread used by s_random.
    """

    perm: np.ndarray
    kind: str = "random"
    seed: int | None = None
    s: int | None = None

    def __post_init__(self):
        perm = np.asarray(self.perm, dtype=np.int64).ravel().copy()
        if not np.array_equal(np.sort(perm), np.arange(perm.size)):
            raise ContractError("Interleaver permutation is not a bijection")
        inverse = np.empty_like(perm)
        inverse[perm] = np.arange(perm.size)
        perm.setflags(write=False)
        inverse.setflags(write=False)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "_inverse", inverse)

    @property
    def N(self) -> int:
        return self.perm.size

    @property
    def inverse(self) -> np.ndarray:
        return self._inverse

    def describe(self) -> dict:
        return {"kind": self.kind, "n": self.N, "seed": self.seed, "s": self.s}

    def to_text(self) -> str:
        header = f"# n={self.N} kind={self.kind} seed={self.seed}"
        if self.s is not None:
            header += f" s={self.s}"
        return "\n".join([header, *map(str, self.perm.tolist())]) + "\n"

    def save(self, path: Path) -> None:
        Path(path).write_text(self.to_text())
        logger.info(f"Wrote interleaver ({self.kind}, N={self.N}) to {path}")

    @classmethod
    def load(cls, path: Path) -> "Interleaver":
        lines = [line.strip() for line in Path(path).read_text().splitlines() if line.strip()]
        if not lines or not lines[0].startswith("#"):
            raise ContractError(f"{path} is missing its '# n=<N> kind=<...> seed=<...>' header")
        try:
            header = dict(item.split("=", 1) for item in lines[0].lstrip("#").split())
            perm = np.array([int(line) for line in lines[1:]], dtype=np.int64)
            n = int(header.get("n", perm.size))
            seed = header.get("seed")
            s = header.get("s")
            seed = None if seed in (None, "None") else int(seed)
            s = None if s in (None, "None") else int(s)
        except ValueError as e:
            raise ContractError(f"Malformed interleaver file {path}: {e}") from e
        if n != perm.size:
            raise ContractError(f"{path} declares n={n} but lists {perm.size} indices")
        return cls(perm, kind=header.get("kind", "random"), seed=seed, s=s)


def _generator(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def make_identity(N: int) -> Interleaver:
    return Interleaver(np.arange(N), kind="identity")


def make_random(N: int, seed: int) -> Interleaver:
    if N < 1:
        raise DomainError(f"Interleaver length must be >= 1, got {N}")
    perm = _generator(seed).permutation(N)
    return Interleaver(perm, kind="random", seed=seed)


def default_spread(N: int) -> int:
    """Usual S-random spread, floor(sqrt(N / 2))."""
    return int(math.isqrt(N // 2))


def satisfies_spread(perm, S: int) -> bool:
    """Exhaustive check: |i - j| <= S, i != j implies |perm[i] - perm[j]| > S."""
    perm = np.asarray(perm)
    for lag in range(1, min(S, perm.size - 1) + 1):
        if np.any(np.abs(perm[lag:] - perm[:-lag]) <= S):
            return False
    return True


def make_s_random(N: int, S: int, seed: int, max_restarts: int = 100) -> Interleaver:
    """
    Randomized greedy construction: walk a shuffled candidate list and accept
    the first value that is more than S away from each of the last S accepted
    values. A dead end restarts with a fresh shuffle.
    """
    if N < 1:
        raise DomainError(f"Interleaver length must be >= 1, got {N}")
    if S < 0:
        raise DomainError(f"S must be >= 0, got {S}")
    if S >= N:
        raise ConstructionError(f"S={S} cannot be satisfied for N={N}")

    rng = _generator(seed)
    for attempt in range(max_restarts + 1):
        pool = list(rng.permutation(N))
        perm: list[int] = []
        while pool:
            recent = np.asarray(perm[max(0, len(perm) - S):], dtype=np.int64)
            candidates = np.asarray(pool, dtype=np.int64)
            if recent.size:
                ok = np.all(np.abs(candidates[:, None] - recent[None, :]) > S, axis=1)
                hits = np.flatnonzero(ok)
                if hits.size == 0:
                    break
                pick = int(hits[0])
            else:
                pick = 0
            perm.append(pool.pop(pick))
        if len(perm) == N:
            logger.debug(f"S-random interleaver N={N} S={S} built after {attempt} restarts")
            return Interleaver(np.asarray(perm), kind="s_random", seed=seed, s=S)

    raise ConstructionError(f"No S-random interleaver with N={N}, S={S} after {max_restarts} restarts; reduce S")


def permute(ilv: Interleaver, frame) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.shape[-1] != ilv.N:
        raise ContractError(f"Frame length {frame.shape[-1]} does not match interleaver length {ilv.N}")
    return frame[..., ilv.perm]


def inverse_permute(ilv: Interleaver, frame) -> np.ndarray:
    frame = np.asarray(frame)
    if frame.shape[-1] != ilv.N:
        raise ContractError(f"Frame length {frame.shape[-1]} does not match interleaver length {ilv.N}")
    return frame[..., ilv.inverse]
