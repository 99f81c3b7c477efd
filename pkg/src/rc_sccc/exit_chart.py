"""
EXIT analysis of the code family.

Two decompositions are supported:

* equivalent: C_U (upper code, sees x0/x1) and C_L (lower code, sees x2).
  Both curves depend on the SNR. The upper curve maps I_A(v) to the
  information of the message sent to the lower code, lambda_ch(v) + E_U(v);
  the lower curve maps I_A(z) to the information of E_L(z).
* classical: outer C_0 (no channel input) and inner C_1 with punctured
  systematic and parity outputs. Only the inner curve depends on the SNR.

Curves are Monte Carlo estimates with consistent Gaussian a-priori LLRs. Each
ia point uses its own stream ``SeedSequence([seed, index])``, so curves at
different SNRs share their random numbers.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator

from .channel import ChannelParams, J_inv, LLR_CLAMP, bpsk, channel_llrs, measure_mi, q_function, rng_for
from .convcode import encode_frames, siso_decode
from .errors import ContractError, DomainError, NonConvergenceError
from .interleaving import make_random, permute
from .parallel import map_ordered
from .puncturing import CodeDimensions, CodeFamily, PuncturePattern, d2_grid, length_for_rate
from .sccc import PARITY_TRELLIS, UPPER_TRELLIS, lower_siso, upper_siso

logger = logging.getLogger(__name__)

__all__ = [
    "ExitCurve",
    "ThresholdResult",
    "Trajectory",
    "choose_d2_wf",
    "default_ia_grid",
    "exit_curve_classical",
    "exit_curve_lower",
    "exit_curve_upper",
    "gen_prior",
    "measure_mi",
    "pick_d2",
    "predict_ber",
    "threshold_search",
    "trajectory",
    "tunnel_gap",
    "wf_grid",
]

DEFAULT_FRAME_LENGTH = 2000
DEFAULT_SAMPLES = 200_000


def default_ia_grid(points: int = 21) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def gen_prior(ia: float, n, seed, bits=None) -> tuple[np.ndarray, np.ndarray]:
    """
    Consistent Gaussian a-priori LLRs with mutual information ``ia``:
    L ~ N(x sigma_A^2 / 2, sigma_A^2), x = +1 for bit 0, sigma_A = J^-1(ia).
    ``n`` is a length or shape; reference bits are drawn when not given.
    """
    if not 0.0 <= ia <= 1.0:
        raise DomainError(f"ia={ia} outside [0, 1]")
    rng = rng_for(seed)
    if bits is None:
        bits = rng.integers(0, 2, size=n, dtype=np.uint8)
    x = bpsk(bits)
    if ia <= 0.0:
        return np.zeros(x.shape), bits
    if ia >= 1.0:
        return LLR_CLAMP * x, bits
    sigma = J_inv(ia)
    llrs = x * sigma * sigma / 2.0 + sigma * rng.standard_normal(x.shape)
    return np.clip(llrs, -LLR_CLAMP, LLR_CLAMP), bits


def _noisy_llrs(bits, mask, sigma2, rng) -> np.ndarray:
    y = bpsk(bits) + math.sqrt(sigma2) * rng.standard_normal(np.shape(bits))
    return np.where(mask, channel_llrs(y, sigma2), 0.0)


def upper_exit_point(pattern: PuncturePattern, K: int, sigma2: float, ia: float, n_frames: int, key, max_log=False):
    """One C_U measurement -> (ie, app MI on u, MI of lambda_ch(v))."""
    rng = rng_for(np.random.SeedSequence(list(key)))
    u = rng.integers(0, 2, size=(n_frames, K), dtype=np.uint8)
    parity, _ = encode_frames(PARITY_TRELLIS, u)
    v = np.concatenate([u, parity[:, 0::2]], axis=1)
    v_mask = np.concatenate([np.ones(K, dtype=bool), pattern.mask(K // 2)])

    lam_ch = _noisy_llrs(v, v_mask, sigma2, rng)
    prior, _ = gen_prior(ia, v.shape, rng, bits=v)
    e_u, app = upper_siso(lam_ch + prior, K, max_log)
    return measure_mi(lam_ch + e_u, v), measure_mi(app, u), measure_mi(lam_ch, v)


def lower_exit_point(pattern: PuncturePattern, N: int, sigma2: float, ia: float, n_frames: int, key, max_log=False):
    """One C_L measurement -> ie = MI(E_L(z))."""
    rng = rng_for(np.random.SeedSequence(list(key)))
    z = rng.integers(0, 2, size=(n_frames, N), dtype=np.uint8)
    q, _ = encode_frames(PARITY_TRELLIS, z)
    lam_q = _noisy_llrs(q, pattern.mask(N), sigma2, rng)
    prior, _ = gen_prior(ia, z.shape, rng, bits=z)
    e_l = lower_siso(prior, lam_q, max_log)
    return measure_mi(e_l, z)


def outer_exit_point(K: int, ia: float, n_frames: int, key, max_log=False):
    """Classical outer code: no channel input -> (ie on v, app MI on u)."""
    rng = rng_for(np.random.SeedSequence(list(key)))
    u = rng.integers(0, 2, size=(n_frames, K), dtype=np.uint8)
    parity, _ = encode_frames(PARITY_TRELLIS, u)
    v = np.concatenate([u, parity[:, 0::2]], axis=1)
    prior, _ = gen_prior(ia, v.shape, rng, bits=v)
    e, app = upper_siso(prior, K, max_log)
    return measure_mi(e, v), measure_mi(app, u)


def inner_exit_point(sys_mask, parity_mask, sigma2: float, ia: float, n_frames: int, key, max_log=False):
    """Classical inner code CC(1,5/7) with punctured systematic and parity outputs."""
    rng = rng_for(np.random.SeedSequence(list(key)))
    N = sys_mask.size
    z = rng.integers(0, 2, size=(n_frames, N), dtype=np.uint8)
    q, _ = encode_frames(PARITY_TRELLIS, z)
    lam_sys = _noisy_llrs(z, sys_mask, sigma2, rng)
    lam_par = _noisy_llrs(q, parity_mask, sigma2, rng)
    prior, _ = gen_prior(ia, z.shape, rng, bits=z)
    prior_out = np.stack([lam_sys, lam_par], axis=-1).reshape(n_frames, 2 * N)
    res = siso_decode(UPPER_TRELLIS, prior, prior_out, 0, max_log)
    return measure_mi(res.extrinsic_in, z)


@dataclass
class ExitCurve:
    """
    Transfer samples ie(ia) at one Eb/N0. ``app`` (upper/outer curves only)
    is the MI of the APP on u at each ia; ``channel_mi`` is the MI the upper
    code forwards before any lower-code information arrives.
    """

    ia: np.ndarray
    ie: np.ndarray
    component: str
    variable: str
    eb_n0_db: float
    dims: CodeDimensions | None = None
    app: np.ndarray | None = None
    channel_mi: float = 0.0
    _interp: PchipInterpolator = field(init=False, repr=False)
    _app_interp: PchipInterpolator | None = field(init=False, repr=False)

    def __post_init__(self):
        self.ia = np.asarray(self.ia, dtype=np.float64)
        self.ie = np.clip(np.asarray(self.ie, dtype=np.float64), 0.0, 1.0)
        if self.ia.size < 2 or np.any(np.diff(self.ia) <= 0):
            raise ContractError("ExitCurve ia grid must be strictly increasing with at least two points")
        if self.ie.shape != self.ia.shape:
            raise ContractError("ExitCurve ia and ie differ in length")
        self._interp = PchipInterpolator(self.ia, self.ie)
        self._app_interp = None
        if self.app is not None:
            self.app = np.clip(np.asarray(self.app, dtype=np.float64), 0.0, 1.0)
            self._app_interp = PchipInterpolator(self.ia, self.app)

    @property
    def covers_unit_interval(self) -> bool:
        return self.ia[0] <= 1e-9 and self.ia[-1] >= 1.0 - 1e-9

    def __call__(self, x):
        x = np.clip(x, self.ia[0], self.ia[-1])
        return np.clip(self._interp(x), 0.0, 1.0)

    def app_at(self, x):
        if self._app_interp is None:
            raise ContractError(f"{self.component} curve carries no APP information")
        x = np.clip(x, self.ia[0], self.ia[-1])
        return np.clip(self._app_interp(x), 0.0, 1.0)

    def to_frame(self) -> pd.DataFrame:
        d0, d1, d2 = self.dims.D if self.dims is not None else (None, None, None)
        return pd.DataFrame(
            {
                "ia": self.ia,
                "ie": self.ie,
                "component": self.component,
                "eb_n0_db": self.eb_n0_db,
                "d0": d0,
                "d1": d1,
                "d2": d2,
            }
        )


def curves_to_frame(curves) -> pd.DataFrame:
    """CSV schema ia,ie,component,eb_n0_db,d0,d1,d2."""
    return pd.concat([c.to_frame() for c in curves], ignore_index=True)


def _sigma2(dims: CodeDimensions, eb_n0_db: float) -> float:
    return ChannelParams(eb_n0_db, float(dims.R)).sigma2


def _n_frames(n_samples: int, length: int) -> int:
    return max(1, math.ceil(n_samples / length))


def _call(func, *args):
    return func(*args)


def exit_curve_upper(
    family: CodeFamily,
    dims: CodeDimensions,
    eb_n0_db: float,
    ia_grid=None,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    frame_length: int = DEFAULT_FRAME_LENGTH,
    client=None,
    max_log: bool = False,
) -> ExitCurve:
    ia_grid = default_ia_grid() if ia_grid is None else np.asarray(ia_grid, dtype=np.float64)
    K = frame_length
    pattern = family.upper_pattern(dims.d1)
    sigma2 = _sigma2(dims, eb_n0_db)
    n_frames = _n_frames(n_samples, 3 * K // 2)
    jobs = [(upper_exit_point, pattern, K, sigma2, float(ia), n_frames, (seed, idx), max_log) for idx, ia in enumerate(ia_grid)]
    results = map_ordered(_call, jobs, client, desc=f"C_U {eb_n0_db:.2f} dB", progress=client is not None)
    ie, app, ch = (np.array(col) for col in zip(*results))
    return ExitCurve(ia_grid, ie, "upper", "v", eb_n0_db, dims, app=app, channel_mi=float(ch.mean()))


def exit_curve_lower(
    family: CodeFamily,
    dims: CodeDimensions,
    eb_n0_db: float,
    ia_grid=None,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    frame_length: int = DEFAULT_FRAME_LENGTH,
    client=None,
    max_log: bool = False,
) -> ExitCurve:
    ia_grid = default_ia_grid() if ia_grid is None else np.asarray(ia_grid, dtype=np.float64)
    N = 3 * frame_length // 2
    pattern = family.lower_pattern(dims.d2)
    sigma2 = _sigma2(dims, eb_n0_db)
    n_frames = _n_frames(n_samples, N)
    jobs = [(lower_exit_point, pattern, N, sigma2, float(ia), n_frames, (seed, idx), max_log) for idx, ia in enumerate(ia_grid)]
    ie = map_ordered(_call, jobs, client, desc=f"C_L {eb_n0_db:.2f} dB", progress=client is not None)
    return ExitCurve(ia_grid, np.array(ie), "lower", "z", eb_n0_db, dims)


def exit_curve_classical(
    family: CodeFamily,
    dims: CodeDimensions,
    eb_n0_db: float,
    ia_grid=None,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    frame_length: int = DEFAULT_FRAME_LENGTH,
    client=None,
    max_log: bool = False,
) -> tuple[ExitCurve, ExitCurve]:
    """(outer C_0, inner C_1) curves of the classical decomposition."""
    ia_grid = default_ia_grid() if ia_grid is None else np.asarray(ia_grid, dtype=np.float64)
    K = frame_length
    N = 3 * K // 2
    upper_pattern = family.upper_pattern(dims.d1)
    v_mask = np.concatenate([np.ones(K, dtype=bool), upper_pattern.mask(K // 2)])
    sys_mask = permute(make_random(N, seed), v_mask)
    parity_mask = family.lower_pattern(dims.d2).mask(N)
    sigma2 = _sigma2(dims, eb_n0_db)
    n_frames = _n_frames(n_samples, N)

    outer_jobs = [(outer_exit_point, K, float(ia), n_frames, (seed, idx), max_log) for idx, ia in enumerate(ia_grid)]
    inner_jobs = [
        (inner_exit_point, sys_mask, parity_mask, sigma2, float(ia), n_frames, (seed, idx), max_log)
        for idx, ia in enumerate(ia_grid)
    ]
    results = map_ordered(_call, outer_jobs + inner_jobs, client, desc=f"classical {eb_n0_db:.2f} dB", progress=client is not None)
    outer_ie, outer_app = (np.array(col) for col in zip(*results[: len(ia_grid)]))
    inner_ie = np.array(results[len(ia_grid):])
    outer = ExitCurve(ia_grid, outer_ie, "outer", "v", eb_n0_db, dims, app=outer_app, channel_mi=0.0)
    inner = ExitCurve(ia_grid, inner_ie, "inner", "z", eb_n0_db, dims)
    return outer, inner


@dataclass
class Trajectory:
    """
    Staircase of the iterative decoder. Each step records the MI entering
    the lower (inner) decoder, what it returns, what the upper (outer)
    decoder forwards, and the APP information on u.
    """

    steps: list[dict]
    final_ie: float
    final_app: float

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.steps)


def trajectory(upper: ExitCurve, lower: ExitCurve, n_iterations: int, start: float | None = None) -> Trajectory:
    """
    Alternate lower then upper transfers for n_iterations. The first lower
    activation sees ``start`` (default: upper.channel_mi, the information in
    lambda_ch(v) alone).
    """
    if n_iterations < 1:
        raise ContractError(f"n_iterations must be >= 1, got {n_iterations}")
    if not (upper.covers_unit_interval and lower.covers_unit_interval):
        raise ContractError("EXIT curves must cover ia in [0, 1]")

    x = upper.channel_mi if start is None else float(start)
    steps = []
    app = 0.0
    for it in range(n_iterations):
        y = float(lower(x))
        x_next = float(upper(y))
        app = float(upper.app_at(y))
        steps.append({"iteration": it + 1, "ia_lower": x, "ie_lower": y, "ie_upper": x_next, "app": app})
        x = x_next
    return Trajectory(steps, final_ie=x, final_app=app)


def predict_ber(i_app: float) -> float:
    """Pb = Q(sigma_app / 2) with sigma_app = J^-1(I_app) (Gaussian APP model)."""
    sigma = J_inv(i_app)
    if math.isinf(sigma):
        return 0.0
    return float(q_function(sigma / 2.0))


def tunnel_gap(upper: ExitCurve, lower: ExitCurve, start: float | None = None, stop: float = 0.98, points: int = 400) -> float:
    """Minimum of upper(lower(x)) - x over [start, stop]; positive means an open tunnel."""
    lo = upper.channel_mi if start is None else float(start)
    if lo >= stop:
        return 1.0 - lo
    x = np.linspace(lo, stop, points)
    return float(np.min(upper(lower(x)) - x))


@dataclass
class ThresholdResult:
    dims: CodeDimensions
    target_pb: float
    n_iterations: int
    eb_n0_db_min: float
    converged: bool = True

    def to_row(self) -> dict:
        return {
            "rate": str(self.dims.R),
            "d2": self.dims.d2,
            "eb_n0_db_min": self.eb_n0_db_min,
            "target_pb": self.target_pb,
            "iters": self.n_iterations,
        }


def thresholds_to_frame(results) -> pd.DataFrame:
    """CSV schema rate,d2,eb_n0_db_min,target_pb,iters."""
    return pd.DataFrame([r.to_row() for r in results], columns=["rate", "d2", "eb_n0_db_min", "target_pb", "iters"])


def bisect_threshold(model, dims, target_pb, n_iterations, lo=-2.0, hi=12.0, tol=0.05) -> ThresholdResult:
    """
    Bisection for the smallest Eb/N0 whose predicted trajectory reaches
    ``target_pb`` within ``n_iterations``. ``model(eb_n0_db)`` returns the
    (upper, lower) curves at that SNR.
    """
    if not 0.0 < target_pb < 0.5:
        raise DomainError(f"target_pb={target_pb} outside (0, 0.5)")

    def reaches(eb_n0_db):
        upper, lower = model(eb_n0_db)
        pb = predict_ber(trajectory(upper, lower, n_iterations).final_app)
        logger.debug(f"{dims}: Eb/N0={eb_n0_db:.3f} dB -> predicted Pb={pb:.3e}")
        return pb <= target_pb

    if not reaches(hi):
        raise NonConvergenceError(f"{dims}: target Pb={target_pb} not reached at {hi} dB")
    if reaches(lo):
        return ThresholdResult(dims, target_pb, n_iterations, lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if reaches(mid):
            hi = mid
        else:
            lo = mid
    logger.info(f"{dims}: threshold {hi:.3f} dB for Pb={target_pb} after {n_iterations} iterations")
    return ThresholdResult(dims, target_pb, n_iterations, hi)


def threshold_search(
    family: CodeFamily,
    dims: CodeDimensions,
    target_pb: float = 1e-5,
    n_iterations: int = 10,
    n_samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    ia_grid=None,
    frame_length: int = DEFAULT_FRAME_LENGTH,
    lo: float = -2.0,
    hi: float = 12.0,
    tol: float = 0.05,
    client=None,
    max_log: bool = False,
    classical: bool = False,
) -> ThresholdResult:
    """Curves are re-estimated at every probe."""
    kwargs = dict(ia_grid=ia_grid, n_samples=n_samples, seed=seed, frame_length=frame_length, client=client, max_log=max_log)

    def model(eb_n0_db):
        if classical:
            return exit_curve_classical(family, dims, eb_n0_db, **kwargs)
        return exit_curve_upper(family, dims, eb_n0_db, **kwargs), exit_curve_lower(family, dims, eb_n0_db, **kwargs)

    return bisect_threshold(model, dims, target_pb, n_iterations, lo, hi, tol)


def _wf_cell(family, L, d2, target_pb, n_iterations, estimation):
    dims = CodeDimensions(d1=L - 200 - d2, d2=d2, K=estimation.get("frame_length", DEFAULT_FRAME_LENGTH))
    try:
        return threshold_search(family, dims, target_pb, n_iterations, **estimation).eb_n0_db_min
    except NonConvergenceError as e:
        logger.warning(f"d2={d2}: {e}")
        return math.nan


def wf_grid(
    family: CodeFamily,
    rate,
    target_pb: float = 1e-5,
    n_iterations: int = 10,
    d2_step: int = 10,
    client=None,
    **estimation,
) -> list[tuple[int, float]]:
    """Required Eb/N0 per feasible d2 (NaN where the bracket holds no threshold)."""
    L = length_for_rate(rate)
    values = d2_grid(L, d2_step)
    logger.info(f"WF grid for R={rate}: {len(values)} d2 values in [{values[0]}, {values[-1]}]")
    jobs = [(family, L, d2, target_pb, n_iterations, estimation) for d2 in values]
    thresholds = map_ordered(_wf_cell, jobs, client, desc=f"WF grid R={rate}")
    return list(zip(values, thresholds))


def pick_d2(grid: list[tuple[int, float]]) -> int:
    """Argmin of the required SNR, ties to the larger d2."""
    finite = [(d2, eb) for d2, eb in grid if not math.isnan(eb)]
    if not finite:
        raise NonConvergenceError("No d2 value reached the target inside the search bracket")
    best = min(eb for _, eb in finite)
    return max(d2 for d2, eb in finite if eb == best)


def choose_d2_wf(
    family: CodeFamily,
    rate,
    target_pb: float = 1e-5,
    n_iterations: int = 10,
    d2_step: int = 10,
    client=None,
    grid: list[tuple[int, float]] | None = None,
    **estimation,
) -> int:
    if grid is None:
        grid = wf_grid(family, rate, target_pb, n_iterations, d2_step, client, **estimation)
    return pick_d2(grid)
