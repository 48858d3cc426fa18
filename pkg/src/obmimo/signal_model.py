"""Oversampled uplink system model.

Builds the deterministic operators of the block transmission model: the
root-raised-cosine (RRC) pulse pair, the Toeplitz noise-shaping matrix G,
the per-user composite-pulse Toeplitz matrices Z, and the equivalent
channel H mapping one block of symbols to the oversampled received
samples.  Also draws the random per-trial quantities (flat channel, user
delays, symbols, thermal noise) and runs the unquantized receive chain.

Conventions: the received vector is antenna-major (all samples of antenna
1, then antenna 2, ...); the symbol vector is user-major (all symbols of
user 1, then user 2, ...).  Sample i of a block sits at time i*T/M, symbol
n at time n*T, so the oversampling selector places each symbol on the last
sample of its Nyquist interval.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .config import ConfigurationError, SystemConfig

__all__ = [
    "PulseShape",
    "OversampledModel",
    "TxBlock",
    "build_rrc",
    "pair_autocorr",
    "build_G",
    "build_Z",
    "build_equivalent_channel",
    "build_model",
    "draw_realization",
    "simulate_rx",
]


def _rrc_amplitude(t: np.ndarray, period: float, rolloff: float) -> np.ndarray:
    """Unit-energy RRC impulse response evaluated at times ``t``.

    Removable singularities at t=0 and |t|=T/(4*rolloff) are replaced by
    their analytic limits.
    """
    t = np.asarray(t, dtype=float)
    shape = t.shape
    t = np.atleast_1d(t).ravel()
    x = t / period
    out = np.empty_like(x)

    if rolloff == 0.0:
        return (np.sinc(x) / np.sqrt(period)).reshape(shape)

    at_zero = np.isclose(x, 0.0, atol=1e-12)
    sing = period / (4.0 * rolloff)
    at_sing = np.isclose(np.abs(t), sing, rtol=0.0, atol=1e-12 * period)
    regular = ~(at_zero | at_sing)

    xr = x[regular]
    num = np.sin(np.pi * xr * (1.0 - rolloff)) + 4.0 * rolloff * xr * np.cos(np.pi * xr * (1.0 + rolloff))
    den = np.pi * xr * (1.0 - (4.0 * rolloff * xr) ** 2)
    out[regular] = num / den / np.sqrt(period)

    out[at_zero] = (1.0 + rolloff * (4.0 / np.pi - 1.0)) / np.sqrt(period)
    lim = (rolloff / np.sqrt(2.0 * period)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * rolloff))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * rolloff))
    )
    out[at_sing] = lim
    return out.reshape(shape)


@dataclass(frozen=True)
class PulseShape:
    """Truncated, energy-normalized pulse sampled at rate M/T.

    ``taps[k]`` holds the impulse response at ``times[k]``; the pulse is
    also evaluable at arbitrary continuous times (zero outside the span).
    """

    taps: np.ndarray
    times: np.ndarray
    symbol_period: float
    sample_step: float
    rolloff: float
    scale: float  # renormalization applied on top of the analytic amplitude

    @property
    def half_span(self) -> float:
        return float(self.times[-1])

    def __call__(self, t) -> np.ndarray:
        """Impulse response at arbitrary times; zero outside the tap span."""
        t = np.asarray(t, dtype=float)
        vals = _rrc_amplitude(t, self.symbol_period, self.rolloff) * self.scale
        return np.where(np.abs(t) <= self.half_span + 1e-12 * self.symbol_period, vals, 0.0)

    @property
    def energy(self) -> float:
        """Continuous-time energy of the tap table, sum(taps^2) * T/M."""
        return float(np.sum(self.taps**2) * self.sample_step)


def build_rrc(cfg: SystemConfig, n_taps: int | None = None) -> PulseShape:
    """Sampled RRC pulse with ``n_taps`` taps at spacing T/M.

    Defaults to the 2*M*N+1 taps spanning [-N*T, N*T] that the
    noise-shaping matrix needs.  The tap table is renormalized to exact
    unit continuous-time energy, sum(taps^2) * T/M = 1.
    """
    if n_taps is None:
        n_taps = 2 * cfg.m_init * cfg.block_len + 1
    if n_taps % 2 == 0:
        raise ConfigurationError(f"tap count must be odd, got {n_taps}")
    step = cfg.symbol_period / cfg.m_init
    half = (n_taps - 1) // 2
    times = np.arange(-half, half + 1) * step
    raw = _rrc_amplitude(times, cfg.symbol_period, cfg.rolloff)
    scale = 1.0 / np.sqrt(np.sum(raw**2) * step)
    return PulseShape(taps=raw * scale, times=times, symbol_period=cfg.symbol_period,
                      sample_step=step, rolloff=cfg.rolloff, scale=scale)


def pair_autocorr(pulse: PulseShape, t) -> np.ndarray:
    """Composite pulse z(t) = (p * m)(t) of the matched transmit/receive pair.

    Evaluated as the Riemann sum of the transmit tap table against the
    continuously-evaluated receive pulse, so on-grid values coincide
    exactly with the discrete convolution of the two tap tables and
    z(0) = 1 by the energy normalization.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    # sum_k p[k] * m(t - t_k) * step, vectorized over both t and k
    vals = pulse(t[..., None] - pulse.times) * pulse.taps
    return vals.sum(axis=-1) * pulse.sample_step


def build_G(cfg: SystemConfig, pulse: PulseShape, n_symbols: int | None = None) -> np.ndarray:
    """Noise-shaping Toeplitz matrix of shape (M*N, 3*M*N).

    Row r, column c holds m(-N*T + (c - r)*T/M): the first row starts at
    m(-N*T) and each subsequent row is the previous one shifted right by
    one sample.
    """
    n = cfg.block_len if n_symbols is None else n_symbols
    mn = cfg.m_init * n
    span = cfg.symbol_period * n
    if pulse.half_span < span - 1e-12:
        raise ConfigurationError(
            f"pulse span {pulse.half_span} does not cover [-{span}, {span}]")
    vals = pulse(np.arange(2 * mn + 1) * pulse.sample_step - span)
    first_col = np.zeros(mn)
    first_col[0] = vals[0]
    first_row = np.concatenate([vals, np.zeros(mn - 1)])
    return toeplitz(first_col, first_row)


def build_Z(cfg: SystemConfig, pulse: PulseShape, delay: float,
            n_symbols: int | None = None) -> np.ndarray:
    """Composite-pulse Toeplitz matrix, entry (i, j) = z(delay + (j-i)*T/M)."""
    if abs(delay) > cfg.delay_dist_halfwidth + 1e-12:
        raise ValueError(
            f"delay {delay} outside [-{cfg.delay_dist_halfwidth}, {cfg.delay_dist_halfwidth}]")
    n = cfg.block_len if n_symbols is None else n_symbols
    mn = cfg.m_init * n
    step = pulse.sample_step
    # one z evaluation per diagonal offset d = j - i
    offsets = np.arange(-(mn - 1), mn)
    zvals = pair_autocorr(pulse, delay + offsets * step)
    first_col = zvals[mn - 1 :: -1]   # d = 0, -1, ..., -(mn-1)
    first_row = zvals[mn - 1 :]       # d = 0, +1, ..., +(mn-1)
    return toeplitz(first_col, first_row)


def oversampling_selector(m_init: int) -> np.ndarray:
    """Selector u = [0, ..., 0, 1]^T that places a symbol in its Nyquist slot."""
    u = np.zeros(m_init)
    u[-1] = 1.0
    return u


def build_equivalent_channel(cfg: SystemConfig, h_flat: np.ndarray,
                             z_list: list[np.ndarray]) -> np.ndarray:
    """Equivalent channel H = (H' kron I_MN) blkdiag(Z_1..Z_Nt) (I kron u).

    ``h_flat`` is the N_r x N_t flat channel, ``z_list`` the per-user
    composite-pulse matrices (all M*N x M*N for a common N).  Returns the
    M*N*N_r x N*N_t matrix.  Computed user by user: the selector keeps
    every M-th column of Z, and the Kronecker factor replicates it across
    antennas with the flat-channel weights.
    """
    n_rx, n_users = h_flat.shape
    if n_users != len(z_list):
        raise ValueError(f"{len(z_list)} Z matrices for {n_users} users")
    mn = z_list[0].shape[0]
    if mn % cfg.m_init:
        raise ValueError("Z dimension is not a multiple of m_init")
    n = mn // cfg.m_init
    H = np.empty((n_rx * mn, n_users * n), dtype=complex)
    for j, z in enumerate(z_list):
        if z.shape != (mn, mn):
            raise ValueError("inconsistent Z dimensions")
        cols = z[:, cfg.m_init - 1 :: cfg.m_init]          # Z (I_N kron u)
        H[:, j * n : (j + 1) * n] = np.kron(h_flat[:, j : j + 1], cols)
    return H


@dataclass(frozen=True)
class OversampledModel:
    """Deterministic operators of one channel realization.

    ``H`` maps the symbol block to noiseless oversampled samples; ``G``
    shapes the i.i.d. noise vector (rows scaled to unit norm so every
    filtered-noise sample has variance exactly ``noise_var``); ``Z_list``
    holds the per-user composite pulses and ``u`` the oversampling
    selector.  ``n_symbols`` is N for the block model or the window
    length for windowed variants.
    """

    cfg: SystemConfig
    h_flat: np.ndarray
    delays: np.ndarray
    H: np.ndarray
    G: np.ndarray
    Z_list: list[np.ndarray]
    u: np.ndarray
    n_symbols: int
    pulse: PulseShape = field(repr=False, default=None)

    @property
    def n_samples(self) -> int:
        """Length of the received vector, M * n_symbols * N_r."""
        return self.H.shape[0]

    @property
    def noise_dim(self) -> int:
        """Length of the unfiltered noise vector, 3 * M * n_symbols * N_r."""
        return 3 * self.cfg.m_init * self.n_symbols * self.cfg.n_rx


def build_model(cfg: SystemConfig, h_flat: np.ndarray, delays: np.ndarray,
                n_symbols: int | None = None) -> OversampledModel:
    """Assemble the oversampled model for a channel realization.

    With ``n_symbols`` set to the window length this produces the windowed
    model (N replaced by l) used by the sliding-window detector.  The
    noise-shaping matrix is the pulse Toeplitz with rows rescaled to unit
    norm, which keeps the filtered-noise variance per sample equal to
    noise_var for every oversampling factor.
    """
    n = cfg.block_len if n_symbols is None else n_symbols
    pulse = build_rrc(cfg, 2 * cfg.m_init * n + 1)
    g = build_G(cfg, pulse, n) * np.sqrt(cfg.symbol_period / cfg.m_init)
    z_list = [build_Z(cfg, pulse, d, n) for d in delays]
    H = build_equivalent_channel(cfg, h_flat, z_list)
    return OversampledModel(cfg=cfg, h_flat=np.asarray(h_flat), delays=np.asarray(delays),
                            H=H, G=g, Z_list=z_list, u=oversampling_selector(cfg.m_init),
                            n_symbols=n, pulse=pulse)


@dataclass(frozen=True)
class TxBlock:
    """One block of unit-power transmit symbols, user-major ordering."""

    x: np.ndarray
    modulation: str


def qpsk_symbols(rng: np.random.Generator, size: int) -> np.ndarray:
    """Unit-power QPSK symbols (+-1 +-1j)/sqrt(2)."""
    re = 1.0 - 2.0 * rng.integers(0, 2, size)
    im = 1.0 - 2.0 * rng.integers(0, 2, size)
    return (re + 1j * im) / np.sqrt(2.0)


def gaussian_symbols(rng: np.random.Generator, size: int) -> np.ndarray:
    """Unit-variance circular complex Gaussian symbols."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def draw_realization(cfg: SystemConfig, rng: np.random.Generator,
                     n_symbols: int | None = None):
    """Draw one trial: flat channel, delays, symbol block, unfiltered noise.

    Returns ``(h_flat, delays, tx, w)``.  The flat channel has i.i.d.
    CN(0, 1) entries (Rayleigh block fading), delays are uniform on
    [-T, T] by default, and ``w`` holds 3*M*n*N_r i.i.d. CN(0, noise_var)
    samples.  Draw order is fixed (channel, delays, symbols, noise) so
    runs that differ only in oversampling factor share channel and
    symbols for a common seed.
    """
    n = cfg.block_len if n_symbols is None else n_symbols
    h_flat = (rng.standard_normal((cfg.n_rx, cfg.n_users))
              + 1j * rng.standard_normal((cfg.n_rx, cfg.n_users))) / np.sqrt(2.0)
    delays = rng.uniform(-cfg.delay_dist_halfwidth, cfg.delay_dist_halfwidth, cfg.n_users)
    size = n * cfg.n_users
    if cfg.modulation == "qpsk":
        x = qpsk_symbols(rng, size)
    else:
        x = gaussian_symbols(rng, size)
    tx = TxBlock(x=x, modulation=cfg.modulation)
    ndim = 3 * cfg.m_init * n * cfg.n_rx
    w = np.sqrt(cfg.noise_var / 2.0) * (rng.standard_normal(ndim) + 1j * rng.standard_normal(ndim))
    return h_flat, delays, tx, w


def simulate_rx(model: OversampledModel, tx: TxBlock, w: np.ndarray) -> np.ndarray:
    """Unquantized received vector y = H x + (I_Nr kron G) w."""
    if tx.x.shape[0] != model.H.shape[1]:
        raise ValueError(f"symbol vector length {tx.x.shape[0]} != {model.H.shape[1]}")
    if w.shape[0] != model.noise_dim:
        raise ValueError(f"noise vector length {w.shape[0]} != {model.noise_dim}")
    w_per_ant = w.reshape(model.cfg.n_rx, -1)
    n = (model.G @ w_per_ant.T).T.reshape(-1)
    return model.H @ tx.x + n
