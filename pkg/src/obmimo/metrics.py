"""Performance metrics: sum-rate lower bound, error rates, receiver power.

The sum-rate lower bound treats the combined quantization distortion and
filtered thermal noise as Gaussian; expectations over channel
realizations are Monte Carlo means taken by the experiment harness, with
recorded standard errors.
"""

import math
from dataclasses import dataclass

import numpy as np

from .flops import PHASE_DESIGN, PHASE_DETECT, PHASE_REDUCE, FlopCounter
from .quantization import QuantizedStatistics
from .reduction import ReductionMatrix, reduce_cov

__all__ = [
    "TrialRecord",
    "PowerModel",
    "ConditioningError",
    "sum_rate_lb",
    "power_consumption",
    "ser",
    "nmse",
    "wilson_interval",
    "flop_report",
]

LOG2 = math.log(2.0)


class ConditioningError(ArithmeticError):
    """A log-determinant stayed non-finite even after diagonal loading."""


@dataclass(frozen=True)
class TrialRecord:
    """Outputs of one Monte Carlo trial.

    ``nmse_num``/``nmse_den`` carry the squared-error and signal-energy
    masses so trial records aggregate exactly; ``sum_rate`` is filled by
    rate experiments, the error fields by detection experiments.
    """

    n_symbols: int = 0
    n_errors: int = 0
    nmse_num: float = 0.0
    nmse_den: float = 0.0
    sum_rate: float | None = None
    decisions: np.ndarray | None = None
    flops: FlopCounter | None = None
    seed: int | None = None


def _logdet_hermitian(s: np.ndarray) -> float:
    """log det of a Hermitian positive definite matrix via Cholesky.

    Falls back once to a trace-scaled diagonal load before giving up.
    """
    for load in (0.0, 1e-10 * np.trace(s).real / s.shape[0] + 1e-300):
        try:
            chol = np.linalg.cholesky(s + (load * np.eye(s.shape[0]) if load else 0.0))
        except np.linalg.LinAlgError:
            continue
        val = 2.0 * float(np.sum(np.log(np.real(np.diag(chol)))))
        if math.isfinite(val):
            return val
    raise ConditioningError("log-determinant is not finite after loading")


def sum_rate_lb(stats: QuantizedStatistics, delta: ReductionMatrix,
                n_symbols: int | None = None,
                counter: FlopCounter | None = None) -> float:
    """Sum-rate lower bound of one realization, in bits/s/Hz.

    (1/N) log2 det( D C_yQ D^H (D C_n' D^H)^-1 ); with the identity
    reduction this is the unreduced log2 det(C_yQ C_n'^-1) / N.
    """
    n = stats.n_symbols if n_symbols is None else n_symbols
    s_yq = reduce_cov(delta, stats.c_yq, counter)
    s_np = reduce_cov(delta, stats.c_nprime, counter)
    if counter is not None:
        counter.add_solve(PHASE_DESIGN, s_yq.shape[0], s_yq.shape[0])
    val = _logdet_hermitian(s_yq) - _logdet_hermitian(s_np)
    return val / (n * LOG2)


@dataclass(frozen=True)
class PowerModel:
    """Receiver front-end power parameters.

    ``fom_w`` is the converter figure of merit in J per conversion step,
    ``f_nyquist`` the Nyquist sampling rate in Hz and ``p_agc`` the gain
    control power in W (bypassed by 1-bit converters).
    """

    p_agc: float = 2e-3
    fom_w: float = 200e-15
    f_nyquist: float = 1e8

    def __post_init__(self):
        if min(self.p_agc, self.fom_w, self.f_nyquist) <= 0:
            raise ValueError("power model parameters must be positive")


def power_consumption(pm: PowerModel, m_init: int, n_rx: int, bits: int) -> float:
    """Receiver power P = 2 N_r (c P_AGC + FOM_w * M * f_Nyquist * 2^bits).

    The gain-control term is absent (c = 0) exactly for 1-bit converters.
    """
    if bits < 1:
        raise ValueError("bits must be at least 1")
    c = 0.0 if bits == 1 else 1.0
    p_adc = pm.fom_w * m_init * pm.f_nyquist * 2.0**bits
    return 2.0 * n_rx * (c * pm.p_agc + p_adc)


def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("need at least one observation")
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def ser(records: list[TrialRecord]) -> tuple[float, tuple[float, float]]:
    """Pooled symbol error ratio with its Wilson 95% interval."""
    if not records:
        raise ValueError("no trial records")
    k = sum(r.n_errors for r in records)
    n = sum(r.n_symbols for r in records)
    if n == 0:
        raise ValueError("records contain no detected symbols")
    return k / n, wilson_interval(k, n)


def nmse(records: list[TrialRecord]) -> tuple[float, float]:
    """Pooled normalized MSE and the standard error of the per-trial ratios."""
    if not records:
        raise ValueError("no trial records")
    num = sum(r.nmse_num for r in records)
    den = sum(r.nmse_den for r in records)
    if den == 0.0:
        raise ValueError("records contain no signal energy")
    ratios = [r.nmse_num / r.nmse_den for r in records if r.nmse_den > 0]
    stderr = float(np.std(ratios, ddof=1) / math.sqrt(len(ratios))) if len(ratios) > 1 else 0.0
    return num / den, stderr


def mean_stderr(values) -> tuple[float, float]:
    """Sample mean and standard error of a sequence of scalars."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise ValueError("no values")
    se = float(np.std(arr, ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return float(arr.mean()), se


def flop_report(counter: FlopCounter) -> list[tuple[str, int, int, int]]:
    """Rows of (phase, mults, adds, total) in a stable phase order."""
    order = [PHASE_DESIGN, PHASE_REDUCE, PHASE_DETECT]
    phases = order + sorted(set(counter.counts) - set(order))
    rows = []
    for phase in phases:
        m, a = counter.counts.get(phase, (0, 0))
        rows.append((phase, m, a, m + a))
    return rows


def format_flop_report(counter: FlopCounter) -> str:
    rows = flop_report(counter)
    width = max(len(r[0]) for r in rows)
    lines = [f"{'phase':<{width}}  {'mults':>14}  {'adds':>14}  {'total':>14}"]
    for phase, m, a, t in rows:
        lines.append(f"{phase:<{width}}  {m:>14}  {a:>14}  {t:>14}")
    return "\n".join(lines)
