"""
The serially concatenated code in its equivalent two-code form.

Upper code C_U: u -> v = [u | P(C1-parity(u))], with P = [1 0] keeping the
parity of even steps; x0 = u and x1 = P1(P(C1-parity(u))) are transmitted.
Lower code C_L: z = pi(v) -> x2 = P2(C2-parity(z)).
Both constituents are the 4-state code CC(1,5/7); C_L only sends parity.

One decoder iteration is a lower SISO pass followed by an upper SISO pass.
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .channel import measure_mi
from .convcode import CC_1_5_7, CC_5_7, build_trellis, encode as cc_encode, siso_decode
from .errors import ContractError
from .interleaving import Interleaver, default_spread, inverse_permute, make_random, make_s_random, permute
from .puncturing import NP_LOWER, NP_UPPER, CodeDimensions, CodeFamily, PuncturePattern, depuncture

logger = logging.getLogger(__name__)

UPPER_TRELLIS = build_trellis(CC_1_5_7)
PARITY_TRELLIS = build_trellis(CC_5_7)


@dataclass(frozen=True, eq=False)
class ScccConfig:
    dims: CodeDimensions
    upper_pattern: PuncturePattern
    lower_pattern: PuncturePattern
    interleaver: Interleaver

    def __post_init__(self):
        if self.interleaver.N != self.dims.N:
            raise ContractError(f"Interleaver length {self.interleaver.N} != N={self.dims.N}")
        object.__setattr__(self, "_x1_mask", self.upper_pattern.mask(self.K // 2))
        object.__setattr__(self, "_x2_mask", self.lower_pattern.mask(self.N))

    @classmethod
    def build(
        cls,
        family: CodeFamily,
        dims: CodeDimensions,
        interleaver: Interleaver | None = None,
        seed: int = 0,
        kind: str = "random",
        s: int = 0,
    ) -> "ScccConfig":
        if interleaver is None:
            if kind == "s_random":
                interleaver = make_s_random(dims.N, s or default_spread(dims.N), seed)
            else:
                interleaver = make_random(dims.N, seed)
        return cls(dims, family.upper_pattern(dims.d1), family.lower_pattern(dims.d2), interleaver)

    @property
    def K(self) -> int:
        return self.dims.K

    @property
    def N(self) -> int:
        return self.dims.N

    @property
    def x1_mask(self) -> np.ndarray:
        return self._x1_mask

    @property
    def x2_mask(self) -> np.ndarray:
        return self._x2_mask

    @property
    def n_x1(self) -> int:
        return int(self._x1_mask.sum())

    @property
    def n_x2(self) -> int:
        return int(self._x2_mask.sum())

    @property
    def frame_length(self) -> int:
        return self.K + self.n_x1 + self.n_x2

    @property
    def rate(self) -> Fraction:
        """Realized rate K / L from the kept counts."""
        return Fraction(self.K, self.frame_length)

    def v_mask(self) -> np.ndarray:
        """Which positions of v reach the channel (through x0 or x1)."""
        return np.concatenate([np.ones(self.K, dtype=bool), self._x1_mask])

    def describe(self) -> dict:
        return {
            **self.dims.as_dict(),
            "frame_length": self.frame_length,
            "realized_rate": str(self.rate),
            "upper_zeros": self.upper_pattern.zeros if self.upper_pattern.n_p == NP_UPPER else None,
            "lower_zeros": self.lower_pattern.zeros if self.lower_pattern.n_p == NP_LOWER else None,
            "interleaver": self.interleaver.describe(),
            "iteration": "one lower SISO pass followed by one upper SISO pass",
        }


@dataclass(frozen=True, eq=False)
class Codeword:
    x0: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    v: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)

    @property
    def bits(self) -> np.ndarray:
        return np.concatenate([self.x0, self.x1, self.x2])

    @property
    def L(self) -> int:
        return self.x0.size + self.x1.size + self.x2.size


def upper_codeword(u) -> np.ndarray:
    """v = [u | parity of C1 at even steps]."""
    parity, _ = cc_encode(PARITY_TRELLIS, u)
    return np.concatenate([np.asarray(u, dtype=np.uint8), parity[0::2]])


def encode(config: ScccConfig, u) -> Codeword:
    u = np.asarray(u, dtype=np.uint8).ravel()
    if u.size != config.K:
        raise ContractError(f"Expected {config.K} information bits, got {u.size}")
    v = upper_codeword(u)
    z = permute(config.interleaver, v)
    parity2, _ = cc_encode(PARITY_TRELLIS, z)
    return Codeword(
        x0=u.copy(),
        x1=v[config.K:][config.x1_mask],
        x2=parity2[config.x2_mask],
        v=v,
        z=z,
    )


@dataclass
class DecodeResult:
    """
    bits: hard decisions on u, shape (..., K).
    app: systematic APP LLRs per iteration, shape (iterations, ..., K).
    mi_trace: per-iteration measured MI when a reference frame was given,
    keys "lower_out" (E_L on z), "upper_out" (lambda_ch(v) + E_U on v), "app" (u).
    """

    bits: np.ndarray
    app: np.ndarray
    iterations: int
    mi_trace: dict[str, list[float]] | None = None

    def decisions(self, iteration: int) -> np.ndarray:
        return (self.app[iteration] < 0).astype(np.uint8)


def demultiplex(config: ScccConfig, llrs) -> tuple[np.ndarray, np.ndarray]:
    """Channel LLRs over x -> (lambda_ch(v), lambda_ch(C2 parity)), zeros where punctured."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if llrs.shape[-1] != config.frame_length:
        raise ContractError(f"Channel frame has {llrs.shape[-1]} values, expected L={config.frame_length}")
    K, n1 = config.K, config.n_x1
    lam_p = depuncture(PuncturePattern(config.x1_mask), llrs[..., K:K + n1], K // 2)
    lam_v = np.concatenate([llrs[..., :K], lam_p], axis=-1)
    lam_q = depuncture(PuncturePattern(config.x2_mask), llrs[..., K + n1:], config.N)
    return lam_v, lam_q


def upper_output_priors(lam_v: np.ndarray, K: int) -> np.ndarray:
    """Per-step [systematic, parity] priors for CC(1,5/7); odd-step parity is never sent."""
    lead = lam_v.shape[:-1]
    priors = np.zeros(lead + (K, 2))
    priors[..., 0] = lam_v[..., :K]
    priors[..., 0::2, 1] = lam_v[..., K:]
    return priors.reshape(lead + (2 * K,))


def upper_siso(lam_v: np.ndarray, K: int, max_log: bool = False):
    """
    Run C_U with all knowledge about v as output priors.
    Returns (extrinsic on v, APP on u).
    """
    lead = lam_v.shape[:-1]
    res = siso_decode(UPPER_TRELLIS, np.zeros(lead + (K,)), upper_output_priors(lam_v, K), 0, max_log)
    ext = res.extrinsic_out.reshape(lead + (K, 2))
    e_u = np.concatenate([ext[..., 0], ext[..., 0::2, 1]], axis=-1)
    return e_u, res.app_in


def lower_siso(prior_z: np.ndarray, lam_q: np.ndarray, max_log: bool = False) -> np.ndarray:
    """Run C_L and return the extrinsic on its input z."""
    return siso_decode(PARITY_TRELLIS, prior_z, lam_q, 0, max_log).extrinsic_in


def decode(
    config: ScccConfig,
    llrs,
    n_iterations: int,
    max_log: bool = False,
    early_stop: bool = False,
    reference=None,
) -> DecodeResult:
    """
    Iterative decoding of one frame (shape (L,)) or a batch (shape (B, L)).

    ``early_stop`` ends when the hard decisions of every frame in the batch
    repeat between two consecutive iterations. ``reference`` (the transmitted
    u, same leading shape) turns on the mutual-information trace.
    """
    if n_iterations < 1:
        raise ContractError(f"n_iterations must be >= 1, got {n_iterations}")
    lam_v, lam_q = demultiplex(config, llrs)
    ilv = config.interleaver
    K = config.K

    trace = None
    if reference is not None:
        u_ref = np.asarray(reference, dtype=np.uint8).reshape(lam_v.shape[:-1] + (K,))
        v_ref = np.apply_along_axis(upper_codeword, -1, u_ref)
        z_ref = permute(ilv, v_ref)
        trace = {"lower_out": [], "upper_out": [], "app": []}

    e_u = np.zeros_like(lam_v)
    apps = []
    for it in range(n_iterations):
        to_lower = lam_v + e_u
        e_l = lower_siso(permute(ilv, to_lower), lam_q, max_log)
        e_u, app = upper_siso(lam_v + inverse_permute(ilv, e_l), K, max_log)
        apps.append(app)

        if trace is not None:
            trace["lower_out"].append(measure_mi(e_l, z_ref))
            trace["upper_out"].append(measure_mi(lam_v + e_u, v_ref))
            trace["app"].append(measure_mi(app, u_ref))

        if early_stop and it > 0 and np.array_equal(app < 0, apps[-2] < 0):
            logger.debug(f"Decisions stable after {it + 1} iterations, stopping")
            break

    app_stack = np.stack(apps)
    return DecodeResult(
        bits=(app_stack[-1] < 0).astype(np.uint8),
        app=app_stack,
        iterations=len(apps),
        mi_trace=trace,
    )


def dump_frame(path: Path, config: ScccConfig, u, codeword: Codeword, seed: int | None = None) -> None:
    """Debug dump: JSON with u, x0, x1, x2, seed and dims."""
    doc = {
        "u": np.asarray(u).astype(int).tolist(),
        "x0": codeword.x0.astype(int).tolist(),
        "x1": codeword.x1.astype(int).tolist(),
        "x2": codeword.x2.astype(int).tolist(),
        "seed": seed,
        "dims": config.describe(),
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
    logger.info(f"Saved frame dump to {path}")


def load_frame(path: Path) -> dict:
    with open(path) as f:
        doc = json.load(f)
    for key in ("u", "x0", "x1", "x2"):
        doc[key] = np.asarray(doc[key], dtype=np.uint8)
    return doc
