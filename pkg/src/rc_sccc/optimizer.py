"""
Greedy construction of the rate-compatible puncturing tables.

Positions are punctured one at a time. At every step all still-kept
positions are tried on top of the ones already chosen, the resulting
constituent enumerator is scored, and the best candidate is appended to the
table. The lower table orders the 300 parity positions of C_L (N = 300),
the upper table the 100 positions of P1 (K = 200).

Scoring is the constituent's uniform-interleaver bound contribution at a
reference operating point, with ties broken by larger d_min, then smaller
multiplicity at d_min, then smaller index.
"""

import json
import logging
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import comb

from .channel import db_to_linear, q_function
from .errors import ContractError, EnumerationError
from .parallel import map_ordered
from .puncturing import K_REF, NP_LOWER, NP_UPPER, CodeFamily, PuncturePattern, RateCompatibleTable
from .wef import EnumLimits, LowerWef, UpperWef, enumerate_lower, enumerate_upper

logger = logging.getLogger(__name__)

REF_SNR_DB = 4.0
REF_RATE = 0.5
N_REF = 3 * K_REF // 2


class Score(NamedTuple):
    primary: float
    neg_dmin: int
    multiplicity: float
    index: int


def _round_sig(x: float, digits: int = 12) -> float:
    return float(f"{x:.{digits}g}")


def score(enumerator: UpperWef | LowerWef, ref_snr_db: float = REF_SNR_DB, ref_rate: float = REF_RATE, index: int = 0) -> Score:
    """Ordered score; smaller is better."""
    ebn0 = db_to_linear(ref_snr_db)
    if isinstance(enumerator, UpperWef):
        A = enumerator.A
        if not A[1:].any():
            raise EnumerationError("Cannot score an enumerator without nonzero-input terms")
        w = np.arange(A.shape[0])[:, None]
        h = np.arange(A.shape[1])[None, :]
        per_wh = A.sum(axis=2)
        primary = float((w / enumerator.K * per_wh * q_function(np.sqrt(2.0 * ref_rate * h * ebn0))).sum())
    elif isinstance(enumerator, LowerWef):
        A = enumerator.A
        if not A[1:].any():
            raise EnumerationError("Cannot score an enumerator without nonzero-input terms")
        N = enumerator.N
        l = np.arange(A.shape[0])
        weight = (l / N / comb(N, l))[:, None]
        h = np.arange(A.shape[1])[None, :]
        primary = float((weight * A * q_function(np.sqrt(2.0 * ref_rate * h * ebn0))).sum())
    else:
        raise ContractError(f"Cannot score {type(enumerator).__name__}")
    return Score(_round_sig(primary), -enumerator.d_min, enumerator.multiplicity_at_dmin, int(index))


def _candidate_score(code, zeros, limits, ref_snr_db, ref_rate, index):
    if code == "upper":
        wef = enumerate_upper(PuncturePattern.from_zeros(NP_UPPER, zeros), K_REF, limits)
    else:
        wef = enumerate_lower(PuncturePattern.from_zeros(NP_LOWER, zeros), N_REF, limits)
    return score(wef, ref_snr_db, ref_rate, index)


def _greedy_table(code, n_p, limits, ref_snr_db, ref_rate, n_steps, client):
    n_steps = n_p if n_steps is None else min(n_steps, n_p)
    chosen: list[int] = []
    steps = []
    for step in range(n_steps):
        taken = set(chosen)
        candidates = [i for i in range(n_p) if i not in taken]
        jobs = [(code, chosen + [c], limits, ref_snr_db, ref_rate, c) for c in candidates]
        scores = map_ordered(_candidate_score, jobs, client, desc=f"{code} step {step + 1}/{n_steps}", progress=False)
        best = min(scores)
        chosen.append(best.index)
        steps.append(
            {
                "step": step + 1,
                "n_candidates": len(candidates),
                "chosen": best.index,
                "scores": [list(s) for s in scores],
            }
        )
        logger.debug(f"{code} step {step + 1}: punctured {best.index} (score {best.primary:.6e}, d_min {-best.neg_dmin})")
        if (step + 1) % 25 == 0:
            logger.info(f"{code} table: {step + 1}/{n_steps} positions ordered")

    table = RateCompatibleTable(tuple(chosen), n_p, code)
    log = {
        "code": code,
        "np": n_p,
        "ref_snr_db": ref_snr_db,
        "ref_rate": ref_rate,
        "limits": {"w_max": limits.w_max, "h_max": limits.h_max, "l_max": limits.l_max},
        "criterion": "constituent uniform-interleaver bound at reference SNR, ties: larger d_min, smaller multiplicity, smaller index",
        "steps": steps,
    }
    return table, log


def greedy_lower_table(
    limits: EnumLimits = EnumLimits(6, 20, 20),
    ref_snr_db: float = REF_SNR_DB,
    ref_rate: float = REF_RATE,
    n_steps: int | None = None,
    client=None,
) -> tuple[RateCompatibleTable, dict]:
    """Order of the 300 lower-code parity positions plus the search log."""
    return _greedy_table("lower", NP_LOWER, limits, ref_snr_db, ref_rate, n_steps, client)


def greedy_upper_table(
    limits: EnumLimits = EnumLimits(6, 20, 20),
    ref_snr_db: float = REF_SNR_DB,
    ref_rate: float = REF_RATE,
    n_steps: int | None = None,
    client=None,
) -> tuple[RateCompatibleTable, dict]:
    """Order of the 100 upper-code parity positions plus the search log."""
    return _greedy_table("upper", NP_UPPER, limits, ref_snr_db, ref_rate, n_steps, client)


def audit_search_log(log: dict) -> list[int]:
    """
    Steps whose chosen candidate does not have the smallest score.
    An empty list means the log is greedy-consistent.
    """
    bad = []
    for step in log["steps"]:
        scores = [Score(*s) for s in step["scores"]]
        chosen = next(s for s in scores if s.index == step["chosen"])
        if any(s < chosen for s in scores):
            bad.append(step["step"])
    return bad


def generate_tables(
    out_dir: Path,
    limits: EnumLimits = EnumLimits(6, 20, 20),
    ref_snr_db: float = REF_SNR_DB,
    ref_rate: float = REF_RATE,
    n_steps: int | None = None,
    client=None,
) -> CodeFamily | None:
    """Run both searches and write upper.txt, lower.txt and search_log.json."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    upper, upper_log = greedy_upper_table(limits, ref_snr_db, ref_rate, n_steps, client)
    lower, lower_log = greedy_lower_table(limits, ref_snr_db, ref_rate, n_steps, client)
    for log in (upper_log, lower_log):
        bad = audit_search_log(log)
        if bad:
            logger.warning(f"{log['code']} search log fails the greedy audit at steps {bad}")

    upper.save(out_dir / "upper.txt")
    lower.save(out_dir / "lower.txt")
    with open(out_dir / "search_log.json", "w") as f:
        json.dump({"upper": upper_log, "lower": lower_log}, f, indent=1)
    logger.info(f"Saved search log to {out_dir / 'search_log.json'}")

    if upper.complete and lower.complete:
        return CodeFamily(upper, lower, name=str(out_dir))
    return None


def upper_dmin_profile(table: RateCompatibleTable, limits: EnumLimits = EnumLimits(6, 20, 20)) -> list[int]:
    """d_min of C_U after puncturing each prefix of the table."""
    return [
        enumerate_upper(table.pattern_at(n), K_REF, limits).d_min
        for n in range(len(table.order) + 1)
    ]
