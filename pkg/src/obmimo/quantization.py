"""1-bit quantization and closed-form second-order statistics.

The sign quantizer is statistically linearized: the quantized output is
the received vector scaled by a diagonal operator plus uncorrelated
distortion, and the quantized covariance follows the elementwise arcsine
of the normalized received covariance.  All statistics are valid at the
block scale and, with the windowed channel, at the window scale.
"""

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .signal_model import OversampledModel

__all__ = [
    "QuantizedStatistics",
    "quantize_1bit",
    "cov_received",
    "bussgang_gain",
    "arcsin_cov",
    "effective_noise_cov",
    "block_stats",
    "window_stats",
]

TWO_OVER_PI = 2.0 / np.pi


class DegenerateSignalError(ValueError):
    """A received-signal component has zero power; statistics are undefined."""


class NumericalConditioningError(ValueError):
    """A normalized correlation fell outside [-1, 1] beyond roundoff tolerance."""


def quantize_1bit(y: np.ndarray) -> np.ndarray:
    """Sign-quantize real and imaginary parts to {+-1/sqrt(2)}.

    Zeros map to +1/sqrt(2), so every output component has unit magnitude.
    """
    re = np.where(np.real(y) >= 0.0, 1.0, -1.0)
    im = np.where(np.imag(y) >= 0.0, 1.0, -1.0)
    return (re + 1j * im) / np.sqrt(2.0)


def cov_received(model: OversampledModel) -> np.ndarray:
    """Received covariance C_y = H H^H + noise_var * (I kron G G^H)."""
    gg = model.G @ model.G.T
    c = model.H @ model.H.conj().T
    c += model.cfg.noise_var * np.kron(np.eye(model.cfg.n_rx), gg)
    return 0.5 * (c + c.conj().T)


def bussgang_gain(c_y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of the linearization operator.

    Returns ``(a, k)`` with k = diag(C_y)^(-1/2) and a = sqrt(2/pi) * k,
    both as vectors.  The dense definition C_yQy C_y^-1 collapses to this
    diagonal because C_yQy = sqrt(2/pi) K C_y.
    """
    d = np.real(np.diag(c_y))
    if np.any(d <= 0.0):
        raise DegenerateSignalError("C_y has a nonpositive diagonal entry")
    k = 1.0 / np.sqrt(d)
    return np.sqrt(TWO_OVER_PI) * k, k


def _clamped_asin(r: np.ndarray) -> np.ndarray:
    over = np.max(np.abs(r)) - 1.0
    if over > 1e-8:
        raise NumericalConditioningError(
            f"normalized correlation exceeds 1 by {over:.3e}")
    return np.arcsin(np.clip(r, -1.0, 1.0))


def arcsin_cov(c_y: np.ndarray) -> np.ndarray:
    """Quantized covariance by the arcsine law.

    C_yQ = 2/pi * (asin(K Re(C_y) K) + j asin(K Im(C_y) K)), elementwise.
    Arguments are clamped to [-1, 1] within a 1e-8 roundoff tolerance.  The
    normalized diagonal is pinned to its exact value 1 before the arcsine,
    whose infinite slope there would otherwise amplify the k^2*d roundoff.
    """
    _, k = bussgang_gain(c_y)
    outer = np.outer(k, k)
    re_corr = outer * np.real(c_y)
    im_corr = outer * np.imag(c_y)
    np.fill_diagonal(re_corr, 1.0)
    np.fill_diagonal(im_corr, 0.0)
    return TWO_OVER_PI * (_clamped_asin(re_corr) + 1j * _clamped_asin(im_corr))


def effective_noise_cov(c_yq: np.ndarray, c_y: np.ndarray, c_n: np.ndarray,
                        a: np.ndarray) -> np.ndarray:
    """Total effective noise covariance C_n' = A C_n A^H + C_nq.

    ``a`` is the diagonal linearization gain as a vector and
    C_nq = C_yQ - A C_y A^H the distortion covariance.
    """
    scaled = np.outer(a, a)
    c_nq = c_yq - scaled * c_y
    c = scaled * c_n + c_nq
    return 0.5 * (c + c.conj().T)


@dataclass(frozen=True)
class QuantizedStatistics:
    """Second-order description of the quantized received signal.

    ``a`` and ``k_norm`` are the diagonals of the Bussgang operator and
    the normalizer, stored as vectors.  ``c_yqx`` (quantized-signal /
    symbol cross-covariance, sqrt(2/pi) K H) is populated whenever the
    model carries the channel, which is always here.
    """

    c_y: np.ndarray
    k_norm: np.ndarray
    a: np.ndarray
    c_yq: np.ndarray
    c_nq: np.ndarray
    c_nprime: np.ndarray
    c_yqx: np.ndarray
    n_symbols: int

    @property
    def dim(self) -> int:
        return self.c_y.shape[0]


def block_stats(model: OversampledModel) -> QuantizedStatistics:
    """All quantized-signal statistics of a model (block or window scale)."""
    cfg = model.cfg
    c_y = cov_received(model)
    a, k = bussgang_gain(c_y)
    c_yq = arcsin_cov(c_y)
    scaled = np.outer(a, a)
    c_nq = c_yq - scaled * c_y
    c_n = cfg.noise_var * np.kron(np.eye(cfg.n_rx), model.G @ model.G.T)
    c_nprime = effective_noise_cov(c_yq, c_y, c_n, a)
    c_yqx = np.sqrt(TWO_OVER_PI) * (k[:, None] * model.H)
    return QuantizedStatistics(c_y=c_y, k_norm=k, a=a, c_yq=c_yq, c_nq=c_nq,
                               c_nprime=c_nprime, c_yqx=c_yqx,
                               n_symbols=model.n_symbols)


def window_stats(cfg: SystemConfig, window_model: OversampledModel) -> QuantizedStatistics:
    """Statistics of the windowed model (the channel built with N = l)."""
    if window_model.n_symbols != cfg.window_len:
        raise ValueError(
            f"window model spans {window_model.n_symbols} symbols, expected {cfg.window_len}")
    return block_stats(window_model)
