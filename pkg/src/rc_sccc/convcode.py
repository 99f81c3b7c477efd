"""
Binary recursive convolutional codes as trellises, with encoding and a
batched BCJR soft-in/soft-out decoder.

Polynomials are given as octal numbers, most significant bit first: for a code
of memory m, bit (m - k) of a polynomial is the coefficient of D^k. The
feedback polynomial must therefore have bit m set (its constant term).

LLRs follow LLR(b) = ln P(b = +1) / P(b = -1) with the bit map 0 -> +1, 1 -> -1.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigurationError, ContractError

logger = logging.getLogger(__name__)

LLR_CLAMP = 50.0
NEG_INF = -1.0e30


def parse_octal(value: int | str) -> int:
    """Accept ``"13"``/``"0o13"`` strings or an already converted integer."""
    if isinstance(value, int):
        return value
    text = str(value).strip().lower().removeprefix("0o")
    try:
        return int(text, 8)
    except ValueError as e:
        raise ConfigurationError(f"Not an octal polynomial: {value!r}") from e


@dataclass(frozen=True)
class ConvCodeSpec:
    memory: int
    feedback_poly: int
    feedforward_polys: tuple[int, ...]
    systematic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "feedback_poly", parse_octal(self.feedback_poly))
        object.__setattr__(self, "feedforward_polys", tuple(parse_octal(p) for p in self.feedforward_polys))

        if self.memory < 1:
            raise ConfigurationError(f"memory must be >= 1, got {self.memory}")
        limit = 1 << (self.memory + 1)
        for poly in (self.feedback_poly, *self.feedforward_polys):
            if not 0 <= poly < limit:
                raise ConfigurationError(f"Polynomial {poly:o} has degree > memory {self.memory}")
        if not (self.feedback_poly >> self.memory) & 1:
            raise ConfigurationError(f"Feedback polynomial {self.feedback_poly:o} has no constant term")
        if not self.feedforward_polys and not self.systematic:
            raise ConfigurationError("Code without systematic output needs at least one feedforward polynomial")

    @property
    def n_outputs(self) -> int:
        return int(self.systematic) + len(self.feedforward_polys)

    def taps(self, poly: int) -> list[int]:
        """Coefficients of D^0 .. D^m."""
        return [(poly >> (self.memory - k)) & 1 for k in range(self.memory + 1)]

    def describe(self) -> str:
        ff = "/".join(f"{p:o}" for p in self.feedforward_polys)
        head = "1," if self.systematic else ""
        return f"CC({head}{ff}/{self.feedback_poly:o})"


# The rate-1/2, 4-state constituent and its parity-only variant.
CC_1_5_7 = ConvCodeSpec(memory=2, feedback_poly=0o7, feedforward_polys=(0o5,), systematic=True)
CC_5_7 = ConvCodeSpec(memory=2, feedback_poly=0o7, feedforward_polys=(0o5,), systematic=False)


@dataclass(frozen=True, eq=False)
class Trellis:
    """
    State machine of a binary convolutional code.

    next_state[s, u] is the successor of state s on input u and
    outputs[s, u] the output bits of that edge (systematic bit first).
    prev_state/prev_input list the two edges entering every state.
    """

    spec: ConvCodeSpec
    next_state: np.ndarray
    outputs: np.ndarray
    prev_state: np.ndarray = field(repr=False)
    prev_input: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.outputs.shape[2]

    @property
    def n_edges(self) -> int:
        return self.next_state.size


def shift_register_step(spec: ConvCodeSpec, register: list[int], bit: int) -> tuple[list[int], list[int]]:
    """
    One clock of the controller-form encoder.

    ``register`` holds w_{t-1} .. w_{t-m}. Returns (output bits, new register).
    """
    fb = spec.taps(spec.feedback_poly)
    w = bit
    for k in range(1, spec.memory + 1):
        w ^= fb[k] & register[k - 1]
    window = [w] + register
    out = [bit] if spec.systematic else []
    for poly in spec.feedforward_polys:
        g = spec.taps(poly)
        y = 0
        for k in range(spec.memory + 1):
            y ^= g[k] & window[k]
        out.append(y)
    return out, window[:-1]


def _state_to_register(state: int, memory: int) -> list[int]:
    # bit (m - k) of the state holds w_{t-k}
    return [(state >> (memory - k)) & 1 for k in range(1, memory + 1)]


def _register_to_state(register: list[int]) -> int:
    state = 0
    for bit in register:
        state = (state << 1) | bit
    return state


def build_trellis(spec: ConvCodeSpec) -> Trellis:
    n_states = 1 << spec.memory
    next_state = np.zeros((n_states, 2), dtype=np.int64)
    outputs = np.zeros((n_states, 2, spec.n_outputs), dtype=np.uint8)

    for s in range(n_states):
        register = _state_to_register(s, spec.memory)
        for u in (0, 1):
            out, new_register = shift_register_step(spec, register, u)
            next_state[s, u] = _register_to_state(new_register)
            outputs[s, u] = out

    prev_state = np.zeros((n_states, 2), dtype=np.int64)
    prev_input = np.zeros((n_states, 2), dtype=np.int64)
    fill = np.zeros(n_states, dtype=np.int64)
    for s in range(n_states):
        for u in (0, 1):
            t = next_state[s, u]
            prev_state[t, fill[t]] = s
            prev_input[t, fill[t]] = u
            fill[t] += 1
    if not np.all(fill == 2):
        raise ConfigurationError(f"{spec.describe()} does not yield a binary trellis with in-degree 2")

    for arr in (next_state, outputs, prev_state, prev_input):
        arr.setflags(write=False)

    logger.debug(f"Built trellis for {spec.describe()}: {n_states} states, {2 * n_states} edges")
    return Trellis(spec, next_state, outputs, prev_state, prev_input)


def encode(trellis: Trellis, info_bits, start_state: int = 0) -> tuple[np.ndarray, int]:
    """
    Encode without termination. Output bits are serialized per step,
    so its length is len(info_bits) * n_outputs.
    """
    if not 0 <= start_state < trellis.n_states:
        raise ContractError(f"start_state {start_state} outside 0..{trellis.n_states - 1}")
    bits = np.asarray(info_bits, dtype=np.uint8).ravel()

    next_state = trellis.next_state.tolist()
    states = np.empty(bits.size, dtype=np.int64)
    state = start_state
    for t, u in enumerate(bits.tolist()):
        states[t] = state
        state = next_state[state][u]

    coded = trellis.outputs[states, bits] if bits.size else np.zeros((0, trellis.n_outputs), dtype=np.uint8)
    return coded.reshape(-1), int(state)


@dataclass(frozen=True)
class SisoResult:
    extrinsic_in: np.ndarray
    extrinsic_out: np.ndarray
    app_in: np.ndarray


def _maxstar_pair(a: np.ndarray, b: np.ndarray, max_log: bool) -> np.ndarray:
    return np.maximum(a, b) if max_log else np.logaddexp(a, b)


def _maxstar_reduce(x: np.ndarray, axis, max_log: bool) -> np.ndarray:
    return np.max(x, axis=axis) if max_log else logsumexp(x, axis=axis)


def siso_decode(
    trellis: Trellis,
    prior_in,
    prior_out,
    start_state: int | None = 0,
    max_log: bool = False,
) -> SisoResult:
    """
    BCJR a-posteriori decoder in the log domain.

    prior_in has shape (..., K), prior_out (..., K * n_outputs); leading axes
    are independent frames decoded together. ``start_state=None`` means an
    unknown start; the end of the trellis is always left open.

    app_in equals prior_in + extrinsic_in exactly; extrinsic values are
    clamped to +/-50.
    """
    prior_in = np.asarray(prior_in, dtype=np.float64)
    prior_out = np.asarray(prior_out, dtype=np.float64)
    n_out = trellis.n_outputs
    lead = prior_in.shape[:-1]
    K = prior_in.shape[-1]

    if prior_out.shape[:-1] != lead or prior_out.shape[-1] != K * n_out:
        raise ContractError(
            f"prior_out shape {prior_out.shape} does not match prior_in {prior_in.shape} x {n_out} outputs"
        )
    if start_state is not None and not 0 <= start_state < trellis.n_states:
        raise ContractError(f"start_state {start_state} outside 0..{trellis.n_states - 1}")

    lin = np.clip(prior_in.reshape(-1, K), -LLR_CLAMP, LLR_CLAMP)
    lout = np.clip(prior_out.reshape(-1, K, n_out), -LLR_CLAMP, LLR_CLAMP)
    B = lin.shape[0]
    S = trellis.n_states

    sign_in = np.array([1.0, -1.0])
    sign_out = 1.0 - 2.0 * trellis.outputs.astype(np.float64)  # (S, 2, n)

    # gamma[b, t, s, u]
    gamma = 0.5 * lin[:, :, None, None] * sign_in[None, None, None, :]
    gamma = gamma + 0.5 * (lout[:, :, None, None, :] * sign_out[None, None]).sum(axis=-1)

    alpha = np.empty((B, K + 1, S))
    if start_state is None:
        alpha[:, 0] = 0.0
    else:
        alpha[:, 0] = NEG_INF
        alpha[:, 0, start_state] = 0.0
    ps, pu = trellis.prev_state, trellis.prev_input
    for t in range(K):
        cand = alpha[:, t][:, ps] + gamma[:, t][:, ps, pu]  # (B, S, 2)
        a = _maxstar_pair(cand[..., 0], cand[..., 1], max_log)
        alpha[:, t + 1] = a - a.max(axis=1, keepdims=True)

    beta = np.empty((B, K + 1, S))
    beta[:, K] = 0.0
    ns = trellis.next_state
    for t in range(K - 1, -1, -1):
        cand = gamma[:, t] + beta[:, t + 1][:, ns]  # (B, S, 2)
        b = _maxstar_pair(cand[..., 0], cand[..., 1], max_log)
        beta[:, t] = b - b.max(axis=1, keepdims=True)

    # edge metric[b, t, s, u]
    metric = alpha[:, :K, :, None] + gamma + beta[:, 1:][:, :, ns]

    app_raw = _maxstar_reduce(metric[..., 0], -1, max_log) - _maxstar_reduce(metric[..., 1], -1, max_log)
    ext_in = np.clip(app_raw - lin, -LLR_CLAMP, LLR_CLAMP)

    flat = metric.reshape(B, K, 2 * S)
    edge_bits = trellis.outputs.reshape(2 * S, n_out)  # edge index s*2 + u
    app_out = np.empty((B, K, n_out))
    for j in range(n_out):
        zero = edge_bits[:, j] == 0
        app_out[..., j] = _maxstar_reduce(flat[..., zero], -1, max_log) - _maxstar_reduce(flat[..., ~zero], -1, max_log)
    ext_out = np.clip(app_out - lout, -LLR_CLAMP, LLR_CLAMP)

    ext_in = ext_in.reshape(*lead, K)
    return SisoResult(
        extrinsic_in=ext_in,
        extrinsic_out=ext_out.reshape(*lead, K * n_out),
        app_in=prior_in + ext_in,
    )


def encode_frames(trellis: Trellis, info_bits, start_state: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """
    Vectorized ``encode`` over a batch of frames, shape (B, K).
    Returns coded bits (B, K * n_outputs) and end states (B,).
    """
    if not 0 <= start_state < trellis.n_states:
        raise ContractError(f"start_state {start_state} outside 0..{trellis.n_states - 1}")
    bits = np.atleast_2d(np.asarray(info_bits, dtype=np.int64))
    B, K = bits.shape
    coded = np.empty((B, K, trellis.n_outputs), dtype=np.uint8)
    state = np.full(B, start_state, dtype=np.int64)
    for t in range(K):
        u = bits[:, t]
        coded[:, t] = trellis.outputs[state, u]
        state = trellis.next_state[state, u]
    return coded.reshape(B, K * trellis.n_outputs), state
