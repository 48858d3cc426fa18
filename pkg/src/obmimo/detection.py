"""Sliding-window low-resolution-aware MMSE detection.

The receiver tiles each transmission block into non-overlapping windows of
l Nyquist symbols, reduces every window's quantized samples with the
designed reduction operator, and applies a linear filter built from the
quantized-signal statistics of the windowed model.  The filter and the
reduction operator are designed once per channel realization and reused
across all windows of the block.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .config import SystemConfig
from .flops import PHASE_DETECT, FlopCounter
from .metrics import TrialRecord
from .quantization import QuantizedStatistics, quantize_1bit
from .reduction import ReductionMatrix, apply_reduction, reduce_cov
from .signal_model import OversampledModel, TxBlock, simulate_rx

__all__ = [
    "WindowDetector",
    "design_lra_mmse",
    "detect_window",
    "slice_qpsk",
    "qpsk_bits",
    "analytic_window_mse",
    "run_block_detection",
]


@dataclass(frozen=True)
class WindowDetector:
    """Reduction operator plus LRA-MMSE filter for one window model.

    ``loaded`` flags that the reduced quantized covariance needed diagonal
    loading to factor.
    """

    delta: ReductionMatrix
    w: np.ndarray
    stats: QuantizedStatistics
    loaded: bool = False


def design_lra_mmse(stats: QuantizedStatistics, delta: ReductionMatrix,
                    counter: FlopCounter | None = None) -> WindowDetector:
    """LRA-MMSE filter W = (D C_yQ D^H)^-1 D C_yQx.

    Solved from the Cholesky factorization of the reduced quantized
    covariance; a singular covariance falls back to diagonal loading and
    sets the ``loaded`` flag.
    """
    s = reduce_cov(delta, stats.c_yq, counter)
    rhs = apply_reduction(delta, stats.c_yqx, counter)
    if counter is not None:
        counter.add_solve(PHASE_DETECT, s.shape[0], rhs.shape[1])
    loaded = False
    try:
        w = scipy.linalg.solve(s, rhs, assume_a="pos")
    except np.linalg.LinAlgError:
        load = 1e-10 * np.trace(s).real / s.shape[0] + 1e-15
        w = scipy.linalg.solve(s + load * np.eye(s.shape[0]), rhs, assume_a="pos")
        loaded = True
    return WindowDetector(delta=delta, w=w, stats=stats, loaded=loaded)


def detect_window(detector: WindowDetector, y_q_win: np.ndarray,
                  counter: FlopCounter | None = None) -> np.ndarray:
    """Soft symbols of one window, W^H D y_Q."""
    reduced = apply_reduction(detector.delta, y_q_win, counter)
    if counter is not None:
        counter.add_matmul(PHASE_DETECT, detector.w.shape[1], detector.w.shape[0], 1)
    return detector.w.conj().T @ reduced


def slice_qpsk(x_soft: np.ndarray) -> np.ndarray:
    """Hard QPSK decisions by the component signs, mapped to (+-1 +-1j)/sqrt(2).

    Gray labeling: bit 0 is the sign of the real part, bit 1 the sign of
    the imaginary part (0 for positive), so neighboring constellation
    points differ in exactly one bit.
    """
    return quantize_1bit(x_soft)


def qpsk_bits(symbols: np.ndarray) -> np.ndarray:
    """Gray-labeled bit pairs (b0, b1) of QPSK points; shape (n, 2)."""
    return np.stack([(np.real(symbols) < 0).astype(int),
                     (np.imag(symbols) < 0).astype(int)], axis=1)


def analytic_window_mse(stats: QuantizedStatistics, delta: ReductionMatrix,
                        w: np.ndarray | None = None) -> float:
    """Model-predicted squared error E||x_win - W^H D y_Q||^2 of one window.

    With ``w`` omitted the LRA-MMSE minimum
    Tr(I - C_yQx^H D^H (D C_yQ D^H)^-1 D C_yQx) is returned; otherwise
    the quadratic expansion for the given filter.  Totals over the l*N_t
    window symbols (unit symbol power).
    """
    s = reduce_cov(delta, stats.c_yq)
    r = apply_reduction(delta, stats.c_yqx)
    n_sym = r.shape[1]
    if w is None:
        return float(n_sym - np.trace(r.conj().T @ np.linalg.solve(s, r)).real)
    gain = np.trace(w.conj().T @ r).real
    quad = np.trace(w.conj().T @ s @ w).real
    return float(n_sym - 2.0 * gain + quad)


def window_sample_indices(cfg: SystemConfig, n_symbols: int, widx: int) -> np.ndarray:
    """Positions of window ``widx``'s samples inside the antenna-major block."""
    mn = cfg.m_init * n_symbols
    ml = cfg.m_init * cfg.window_len
    base = np.arange(cfg.n_rx)[:, None] * mn
    return (base + widx * ml + np.arange(ml)[None, :]).ravel()


def window_symbol_indices(cfg: SystemConfig, n_symbols: int, widx: int) -> np.ndarray:
    """Positions of window ``widx``'s symbols inside the user-major block."""
    base = np.arange(cfg.n_users)[:, None] * n_symbols
    return (base + widx * cfg.window_len + np.arange(cfg.window_len)[None, :]).ravel()


def run_block_detection(cfg: SystemConfig, model: OversampledModel,
                        detector: WindowDetector, tx: TxBlock, w_noise: np.ndarray,
                        counter: FlopCounter | None = None,
                        keep_decisions: bool = False) -> TrialRecord:
    """Detect one transmission block window by window.

    Simulates the full-block received signal, quantizes it, and runs
    quantize -> reduce -> filter -> slice on every complete window (a
    trailing partial window is dropped).  Accumulates symbol errors (QPSK
    blocks only) and the squared-error mass for the normalized MSE
    E||x - x_tilde||^2 / E||x||^2.
    """
    y = simulate_rx(model, tx, w_noise)
    y_q = quantize_1bit(y)
    n_windows = model.n_symbols // cfg.window_len
    err = 0
    n_detected = 0
    se_num = 0.0
    se_den = 0.0
    decisions = [] if keep_decisions else None
    for widx in range(n_windows):
        y_win = y_q[window_sample_indices(cfg, model.n_symbols, widx)]
        x_win = tx.x[window_symbol_indices(cfg, model.n_symbols, widx)]
        x_soft = detect_window(detector, y_win, counter)
        se_num += float(np.sum(np.abs(x_win - x_soft) ** 2))
        se_den += float(np.sum(np.abs(x_win) ** 2))
        if tx.modulation == "qpsk":
            hard = slice_qpsk(x_soft)
            err += int(np.sum(~np.isclose(hard, x_win)))
            if keep_decisions:
                decisions.append(hard)
        n_detected += x_win.size
    return TrialRecord(
        n_symbols=n_detected,
        n_errors=err,
        nmse_num=se_num,
        nmse_den=se_den,
        decisions=np.concatenate(decisions) if decisions else None,
        flops=counter,
    )
