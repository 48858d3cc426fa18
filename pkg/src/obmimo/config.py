"""Scenario configuration for the oversampled 1-bit uplink simulator."""

from dataclasses import dataclass, field


class ConfigurationError(ValueError):
    """Raised when a scenario configuration violates a structural constraint."""


@dataclass(frozen=True)
class SystemConfig:
    """All scenario scalars of one simulated uplink.

    Attributes:
        n_users: number of single-antenna terminals (N_t).
        n_rx: number of receive antennas at the base station (N_r).
        block_len: symbols per transmission block (N).
        m_init: initial oversampling factor (M), samples per symbol period.
        m_proc: processing-rate factor (M') kept after dimension reduction.
        symbol_period: symbol duration T in seconds.
        rolloff: roll-off of the root-raised-cosine transmit/receive filters.
        noise_var: variance of the unfiltered complex noise samples.
        window_len: detection window length l, in Nyquist symbols.
        n_submatrices: number K of diagonal blocks used by the
            submatrix-level selection algorithms.
        search_range: half-width beta of the restricted greedy column search.
        delay_dist_halfwidth: user delays are drawn uniformly from
            [-delay_dist_halfwidth, +delay_dist_halfwidth]; defaults to one
            symbol period.
        modulation: "qpsk" or "gaussian" transmit symbols.
        rng_seed: root seed for all random draws of this scenario.
    """

    n_users: int = 4
    n_rx: int = 16
    block_len: int = 100
    m_init: int = 3
    m_proc: int = 2
    symbol_period: float = 1.0
    rolloff: float = 0.8
    noise_var: float = 0.4
    window_len: int = 4
    n_submatrices: int = 8
    search_range: int = 5
    delay_dist_halfwidth: float | None = None
    modulation: str = "qpsk"
    rng_seed: int = 12345

    def __post_init__(self):
        for name in ("n_users", "n_rx", "block_len", "m_init", "m_proc",
                     "window_len", "n_submatrices", "search_range"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigurationError(f"{name} must be a positive integer, got {v!r}")
        if self.symbol_period <= 0:
            raise ConfigurationError("symbol_period must be positive")
        if not 0.0 <= self.rolloff <= 1.0:
            raise ConfigurationError(f"rolloff must lie in [0, 1], got {self.rolloff}")
        if self.noise_var <= 0:
            raise ConfigurationError("noise_var must be positive")
        if self.m_proc > self.m_init:
            raise ConfigurationError(
                f"processing rate m_proc={self.m_proc} exceeds initial rate m_init={self.m_init}")
        if self.n_rx < self.n_users:
            raise ConfigurationError(
                f"need n_rx >= n_users, got n_rx={self.n_rx} < n_users={self.n_users}")
        if (self.m_proc * self.block_len * self.n_rx) % self.n_submatrices != 0:
            raise ConfigurationError(
                f"n_submatrices={self.n_submatrices} must divide "
                f"m_proc*block_len*n_rx={self.m_proc * self.block_len * self.n_rx}")
        if self.modulation not in ("qpsk", "gaussian"):
            raise ConfigurationError(f"unknown modulation {self.modulation!r}")
        if self.delay_dist_halfwidth is None:
            object.__setattr__(self, "delay_dist_halfwidth", self.symbol_period)
        elif self.delay_dist_halfwidth < 0:
            raise ConfigurationError("delay_dist_halfwidth must be nonnegative")

    @property
    def snr_db(self) -> float:
        """SNR implied by the current noise variance, 10*log10(n_users/noise_var)."""
        import math
        return 10.0 * math.log10(self.n_users / self.noise_var)

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        """Copy of this config with noise_var set from an SNR in dB."""
        from dataclasses import replace
        return replace(self, noise_var=self.n_users * 10.0 ** (-snr_db / 10.0))
